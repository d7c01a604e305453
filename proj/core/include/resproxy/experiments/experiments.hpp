#pragma once

#include "resproxy/baselines/baselines.hpp"
#include "resproxy/metrics/metrics.hpp"
#include "resproxy/proxy/train.hpp"
#include "resproxy/scenario/dataset.hpp"

#include <string>
#include <vector>

namespace resproxy::experiments {

/// First `horizon` rows and `dims` columns of each record's rates.
std::vector<Matrix> truths(const scenario::Dataset& data, const std::vector<std::size_t>& indices,
                           int horizon, int dims);

/// Reported proxy predictions: clipped at zero and, for hybrid modes, with the leading
/// rows taken from the ground truth that was fed to the decoder.
std::vector<Matrix> proxy_predictions(const proxy::ProxyModel<float>& model,
                                      const scenario::Dataset& data,
                                      const std::vector<std::size_t>& indices,
                                      proxy::DecodeMode mode, int horizon,
                                      bool substitute = true);

metrics::ErrorReport evaluate_proxy(const proxy::ProxyModel<float>& model,
                                    const scenario::Dataset& data, scenario::Partition partition,
                                    proxy::DecodeMode mode, int horizon, bool substitute = true);

/// Fits on TRAIN (at `fit_horizon`, the evaluation horizon when 0) and scores `partition`.
metrics::ErrorReport evaluate_fixed(const scenario::Dataset& data, baselines::FixedKind kind,
                                    scenario::Partition partition, int horizon, int dims,
                                    int fit_horizon = 0);

struct UpscaledResult {
    metrics::ErrorReport report;
    double fine_ms = 0.0;    // mean fine-grid simulation time over the same records
    double coarse_ms = 0.0;  // mean upscaled simulation time
};

/// Simulates every partition record on the upscaled model (and on the fine grid for
/// timing when `time_fine`).
UpscaledResult evaluate_upscaled(const scenario::Dataset& data, int factor,
                                 scenario::Partition partition, int horizon, int dims,
                                 bool time_fine = false);

struct TableRow {
    std::string configuration;
    double error = 0.0;
    double field = -1.0;  // < 0 when not applicable
    double wells = -1.0;
};

/// Fixed-width text table: configuration, error (and field/wells when present) in percent.
std::string format_table(const std::vector<TableRow>& rows);

struct CurvePoint {
    std::size_t train_size = 0;
    double test_error = 0.0;
    double valid_loss = 0.0;
};

/// Halves TRAIN repeatedly (deterministic prefix of a shuffled order) down to `min_size`,
/// trains one model per size and reports TEST error in prop mode. Rows are ordered by size.
std::vector<CurvePoint> learning_curve(const scenario::Dataset& data,
                                       const proxy::ModelConfig& config,
                                       const proxy::TrainConfig& train, std::size_t min_size,
                                       std::uint64_t seed, const proxy::ProgressFn& progress = {});

/// Restricts a dataset to a subset of its TRAIN records (VALID and TEST kept).
scenario::Dataset subsample_train(const scenario::Dataset& data, std::size_t size,
                                  std::uint64_t seed);

struct HybridPoint {
    std::string mode;
    double test_error = 0.0;          // reported (leading rows from the simulator)
    double test_error_raw = 0.0;      // decoder outputs only
    std::vector<double> per_step;
};

/// Evaluates one model in prop and hybrid(k) for every k in `ks`.
std::vector<HybridPoint> hybrid_sweep(const proxy::ProxyModel<float>& model,
                                      const scenario::Dataset& data, const std::vector<int>& ks,
                                      scenario::Partition partition);

}  // namespace resproxy::experiments
