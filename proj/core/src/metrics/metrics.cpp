#include "resproxy/metrics/metrics.hpp"

#include "resproxy/common/errors.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace resproxy::metrics {

namespace {

void check_pairs(std::span<const Matrix> predictions, std::span<const Matrix> truth,
                 std::size_t begin, std::size_t end) {
    if (truth.empty()) throw ContractError("error metric needs a nonempty test set");
    if (predictions.size() != truth.size())
        throw ContractError("prediction and ground-truth counts differ");
    if (begin >= end) throw ContractError("empty column group");
    const std::size_t T = truth.front().rows();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i].rows() != T || predictions[i].rows() != T)
            throw ContractError("record " + std::to_string(i) + " has a mismatched horizon");
        if (truth[i].cols() < end || predictions[i].cols() < end)
            throw ContractError("record " + std::to_string(i) + " lacks columns of the group");
    }
}

double block_norm(const Matrix& a, const Matrix* b, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.rows(); ++t)
        for (std::size_t k = begin; k < end; ++k) {
            const double d = a(t, k) - (b ? (*b)(t, k) : 0.0);
            s += d * d;
        }
    return std::sqrt(s);
}

double row_norm(const Matrix& a, const Matrix* b, std::size_t t, std::size_t begin,
                std::size_t end) {
    double s = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
        const double d = a(t, k) - (b ? (*b)(t, k) : 0.0);
        s += d * d;
    }
    return std::sqrt(s);
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Matrix cumulative(const Matrix& y) {
    Matrix z = y;
    for (std::size_t t = 1; t < z.rows(); ++t)
        for (std::size_t k = 0; k < z.cols(); ++k) z(t, k) += z(t - 1, k);
    return z;
}

std::vector<DimGroup> default_groups(std::size_t dims) {
    std::vector<DimGroup> g{{"total", 0, dims}};
    if (dims > 3) {
        g.push_back({"field", 0, 3});
        g.push_back({"wells", 3, dims});
    }
    return g;
}

const GroupError& ErrorReport::group(const std::string& name) const {
    for (const auto& g : groups)
        if (g.name == name) return g;
    throw ContractError("error report has no group '" + name + "'");
}

std::vector<double> relative_sequence_error(std::span<const Matrix> predictions,
                                            std::span<const Matrix> truth, std::size_t begin,
                                            std::size_t end) {
    check_pairs(predictions, truth, begin, end);
    std::vector<Matrix> zt, zp;
    zt.reserve(truth.size());
    zp.reserve(truth.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        zt.push_back(cumulative(truth[i]));
        zp.push_back(cumulative(predictions[i]));
        denom += block_norm(zt.back(), nullptr, begin, end);
    }
    denom /= static_cast<double>(truth.size());
    if (!(denom > 0.0)) throw NumericError("relative sequence error is undefined: all targets are zero");
    std::vector<double> e(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) e[i] = block_norm(zp[i], &zt[i], begin, end) / denom;
    return e;
}

std::vector<double> per_step_error(std::span<const Matrix> predictions,
                                   std::span<const Matrix> truth, std::size_t begin,
                                   std::size_t end) {
    check_pairs(predictions, truth, begin, end);
    const std::size_t T = truth.front().rows();
    std::vector<double> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            num += row_norm(predictions[i], &truth[i], t, begin, end);
            den += row_norm(truth[i], nullptr, t, begin, end);
        }
        out[t] = den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    }
    return out;
}

ErrorReport evaluate(std::span<const Matrix> predictions, std::span<const Matrix> truth,
                     std::vector<DimGroup> groups) {
    if (truth.empty()) throw ContractError("error metric needs a nonempty test set");
    if (groups.empty()) groups = default_groups(truth.front().cols());
    ErrorReport r;
    r.n = truth.size();
    for (const auto& g : groups) {
        GroupError ge{g.name, relative_sequence_error(predictions, truth, g.begin, g.end), 0.0,
                      per_step_error(predictions, truth, g.begin, g.end)};
        ge.mean = mean_of(ge.errors);
        r.groups.push_back(std::move(ge));
    }
    r.errors = r.groups.front().errors;
    r.mean = r.groups.front().mean;
    r.per_step = r.groups.front().per_step;
    return r;
}

Json to_json(const ErrorReport& report) {
    Json groups = Json::object();
    for (const auto& g : report.groups) groups[g.name] = g.mean;
    Json steps = Json::array();
    for (double v : report.per_step) steps.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
    return Json{{"n", report.n},
                {"mean", report.mean},
                {"groups", groups},
                {"per_step", steps},
                {"errors", report.errors}};
}

std::string per_step_csv(const ErrorReport& report) {
    std::ostringstream out;
    out.precision(10);
    out << "step";
    for (const auto& g : report.groups) out << ',' << g.name;
    out << '\n';
    for (std::size_t t = 0; t < report.per_step.size(); ++t) {
        out << t;
        for (const auto& g : report.groups) out << ',' << g.per_step[t];
        out << '\n';
    }
    return out.str();
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractError("paired t-test needs equal-length samples");
    if (a.size() < 2) throw ContractError("paired t-test needs at least two pairs");
    const auto n = static_cast<double>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    TTest r;
    r.df = a.size() - 1;
    r.mean_diff = mean;
    if (ss == 0.0) {
        if (mean == 0.0) return r;
        r.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
        r.p = 0.0;
        return r;
    }
    const double se = std::sqrt(ss / (n - 1.0) / n);
    r.t = mean / se;
    const double df = n - 1.0;
    // Two-sided survival of Student's t: I_{df/(df+t^2)}(df/2, 1/2).
    r.p = boost::math::ibeta(df / 2.0, 0.5, df / (df + r.t * r.t));
    return r;
}

double npv(const Matrix& cumulative_rates, const NpvParams& params) {
    if (cumulative_rates.cols() < 3) throw ContractError("NPV needs the three field-rate columns");
    const double prices[3] = {params.oil_price, params.water_price, params.injection_price};
    for (double p : prices)
        if (!std::isfinite(p)) throw ContractError("NPV prices must be finite");
    double total = 0.0;
    double factor = 1.0;
    for (std::size_t t = 0; t < cumulative_rates.rows(); ++t) {
        double value = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const double rate = cumulative_rates(t, k) - (t > 0 ? cumulative_rates(t - 1, k) : 0.0);
            value += prices[k] * rate;
        }
        total += factor * params.dt_days * value;
        factor *= params.discount;
    }
    return total;
}

TimingReport time_runner(const std::string& name, const std::function<void(std::size_t)>& fn,
                         std::size_t n_runs, std::size_t batch, std::size_t warmup) {
    if (batch < 1) throw ContractError("batch size must be >= 1");
    TimingReport r;
    r.runner = name;
    r.batch = batch;
    r.n_runs = n_runs;
    for (std::size_t i = 0; i < warmup; ++i) {
        try {
            fn(i % std::max<std::size_t>(n_runs, 1));
        } catch (const std::exception&) {
        }
    }
    for (std::size_t i = 0; i < n_runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn(i);
        } catch (const std::exception&) {
            ++r.failures;
            continue;
        }
        const auto t1 = std::chrono::steady_clock::now();
        r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                               static_cast<double>(batch));
    }
    if (!r.samples_ms.empty()) {
        r.mean_ms = mean_of(r.samples_ms);
        double ss = 0.0;
        for (double v : r.samples_ms) ss += (v - r.mean_ms) * (v - r.mean_ms);
        r.std_ms = r.samples_ms.size() > 1
                       ? std::sqrt(ss / static_cast<double>(r.samples_ms.size() - 1))
                       : 0.0;
        const auto [lo, hi] = std::minmax_element(r.samples_ms.begin(), r.samples_ms.end());
        r.min_ms = *lo;
        r.max_ms = *hi;
    }
    return r;
}

Json to_json(const TimingReport& r) {
    return Json{{"runner", r.runner},   {"batch", r.batch},   {"n_runs", r.n_runs},
                {"failures", r.failures}, {"mean_ms", r.mean_ms}, {"std_ms", r.std_ms},
                {"min_ms", r.min_ms},   {"max_ms", r.max_ms}, {"relative_std", r.relative_std()},
                {"samples_ms", r.samples_ms}};
}

}  // namespace resproxy::metrics
