#pragma once

#include "resproxy/common/json_util.hpp"
#include "resproxy/common/matrix.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace resproxy::metrics {

/// Prefix sums down each column.
Matrix cumulative(const Matrix& y);

/// Half-open column range [begin, end).
struct DimGroup {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// "total" over all columns; with 23 columns also "field" (0..3) and "wells" (3..23).
std::vector<DimGroup> default_groups(std::size_t dims);

struct GroupError {
    std::string name;
    std::vector<double> errors;  // e_k per simulation
    double mean = 0.0;
    std::vector<double> per_step;
};

struct ErrorReport {
    std::size_t n = 0;
    std::vector<double> errors;    // e_k over the first group's columns
    double mean = 0.0;
    std::vector<GroupError> groups;
    std::vector<double> per_step;  // over the first group's columns

    [[nodiscard]] const GroupError& group(const std::string& name) const;
};

/// e_k = ||cum(pred_k) - cum(gt_k)||_2 / mean_j ||cum(gt_j)||_2, norms taken over the T x
/// |group| block flattened time-major. Throws NumericError when the denominator is zero.
std::vector<double> relative_sequence_error(std::span<const Matrix> predictions,
                                            std::span<const Matrix> truth, std::size_t begin,
                                            std::size_t end);

/// Per-step relative L2 error on rates: mean_k ||pred_kt - gt_kt|| / mean_j ||gt_jt||
/// over columns [begin, end). Steps whose denominator is zero report 0 when the
/// numerator is zero too and +inf otherwise.
std::vector<double> per_step_error(std::span<const Matrix> predictions,
                                   std::span<const Matrix> truth, std::size_t begin,
                                   std::size_t end);

/// Error report over `groups` (default_groups of the truth width when empty). Predictions
/// may be wider than the truth; extra columns are ignored.
ErrorReport evaluate(std::span<const Matrix> predictions, std::span<const Matrix> truth,
                     std::vector<DimGroup> groups = {});

Json to_json(const ErrorReport& report);
/// "step,<group>" header then one line per step.
std::string per_step_csv(const ErrorReport& report);

struct TTest {
    double t = 0.0;
    double p = 1.0;  // two-sided
    double mean_diff = 0.0;
    std::size_t df = 0;
};

/// Paired t-test on a - b. All-equal pairs give t = 0, p = 1; constant nonzero differences
/// give t = +-inf, p = 0. p comes from the regularized incomplete beta function.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);

struct NpvParams {
    double oil_price = 60.0;         // per m^3 produced
    double water_price = -5.0;       // per m^3 produced water
    double injection_price = -2.0;   // per m^3 injected
    double discount = 1.0;           // per-step factor applied as discount^t
    double dt_days = 30.0;
};

/// sum_t discount^t * dt * (p_o * fopr_t + p_w * fwpr_t + p_i * fwir_t), with rates
/// recovered as first differences of the cumulative columns 0..2.
double npv(const Matrix& cumulative_rates, const NpvParams& params);

struct TimingReport {
    std::string runner;
    std::size_t batch = 1;
    std::size_t n_runs = 0;
    std::size_t failures = 0;
    std::vector<double> samples_ms;  // per-simulation latency of each successful run
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;

    [[nodiscard]] double relative_std() const noexcept {
        return mean_ms > 0.0 ? std_ms / mean_ms : 0.0;
    }
};

/// Calls fn(run) for `warmup` discarded runs and then n_runs timed ones. Each call handles
/// `batch` simulations; latency per simulation is wall time / batch. Exceptions count as
/// failures and the run is left out of the statistics.
TimingReport time_runner(const std::string& name, const std::function<void(std::size_t)>& fn,
                         std::size_t n_runs = 100, std::size_t batch = 1, std::size_t warmup = 2);

Json to_json(const TimingReport& report);

}  // namespace resproxy::metrics
