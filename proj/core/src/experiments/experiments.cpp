#include "resproxy/experiments/experiments.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/common/random.hpp"
#include "resproxy/sim/upscale.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

namespace resproxy::experiments {

using scenario::Partition;

std::vector<Matrix> truths(const scenario::Dataset& data, const std::vector<std::size_t>& indices,
                           int horizon, int dims) {
    std::vector<Matrix> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        const auto& r = data.records.at(i).rates;
        if (r.rows() < static_cast<std::size_t>(horizon) || r.cols() < static_cast<std::size_t>(dims))
            throw ContractError("record " + std::to_string(i) + " does not cover the requested window");
        out.push_back(r.block(static_cast<std::size_t>(horizon), 0, static_cast<std::size_t>(dims)));
    }
    return out;
}

std::vector<Matrix> proxy_predictions(const proxy::ProxyModel<float>& model,
                                      const scenario::Dataset& data,
                                      const std::vector<std::size_t>& indices,
                                      proxy::DecodeMode mode, int horizon, bool substitute) {
    auto preds = proxy::predict_records(model, data, indices, mode, horizon);
    std::vector<Matrix> out;
    out.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        Matrix m = proxy::clip_nonnegative(std::move(preds[i].rates));
        if (substitute) proxy::substitute_truth(m, data.records.at(indices[i]).rates, mode);
        out.push_back(std::move(m));
    }
    return out;
}

metrics::ErrorReport evaluate_proxy(const proxy::ProxyModel<float>& model,
                                    const scenario::Dataset& data, Partition partition,
                                    proxy::DecodeMode mode, int horizon, bool substitute) {
    const auto idx = data.indices(partition);
    const auto pred = proxy_predictions(model, data, idx, mode, horizon, substitute);
    return metrics::evaluate(pred, truths(data, idx, horizon, model.config().output_dim));
}

metrics::ErrorReport evaluate_fixed(const scenario::Dataset& data, baselines::FixedKind kind,
                                    Partition partition, int horizon, int dims, int fit_horizon) {
    std::vector<const scenario::SimulationRecord*> train;
    for (auto i : data.indices(Partition::train)) train.push_back(&data.records[i]);
    const auto predictor = baselines::fit_fixed(train, kind, dims, fit_horizon > 0 ? fit_horizon : horizon);
    const auto idx = data.indices(partition);
    const std::vector<Matrix> pred(idx.size(), predictor.predict(horizon));
    return metrics::evaluate(pred, truths(data, idx, horizon, dims));
}

UpscaledResult evaluate_upscaled(const scenario::Dataset& data, int factor, Partition partition,
                                 int horizon, int dims, bool time_fine) {
    const auto& m = data.manifest;
    const auto ensemble = scenario::generate_ensemble(m.realizations, m.geology_seed, m.grid, m.geology);
    std::vector<sim::CoarseModel> coarse;
    coarse.reserve(ensemble.size());
    for (const auto& r : ensemble) coarse.push_back(sim::upscale(r, m.grid, factor));

    const auto idx = data.indices(partition);
    std::vector<Matrix> pred;
    double coarse_ms = 0.0, fine_ms = 0.0;
    for (auto i : idx) {
        const auto& rec = data.records[i];
        const auto t0 = std::chrono::steady_clock::now();
        auto out = baselines::upscaled_predict(coarse[static_cast<std::size_t>(rec.realization_id)],
                                               rec.actions, m.simulator, horizon);
        const auto t1 = std::chrono::steady_clock::now();
        coarse_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        pred.push_back(out.rates.block(static_cast<std::size_t>(horizon), 0, static_cast<std::size_t>(dims)));
        if (time_fine) {
            const auto f0 = std::chrono::steady_clock::now();
            (void)sim::run_simulation(ensemble[static_cast<std::size_t>(rec.realization_id)],
                                      rec.actions, m.grid, m.simulator, horizon);
            fine_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - f0).count();
        }
    }
    UpscaledResult r;
    r.report = metrics::evaluate(pred, truths(data, idx, horizon, dims));
    r.coarse_ms = coarse_ms / static_cast<double>(idx.size());
    r.fine_ms = time_fine ? fine_ms / static_cast<double>(idx.size()) : 0.0;
    return r;
}

std::string format_table(const std::vector<TableRow>& rows) {
    bool groups = false;
    std::size_t width = 13;
    for (const auto& r : rows) {
        groups = groups || r.field >= 0.0;
        width = std::max(width, r.configuration.size());
    }
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s %9s", static_cast<int>(width), "Configuration", "Error");
    out += buf;
    if (groups) {
        std::snprintf(buf, sizeof(buf), " %9s %9s", "Field", "Wells");
        out += buf;
    }
    out += '\n';
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s %8.2f%%", static_cast<int>(width), r.configuration.c_str(),
                      100.0 * r.error);
        out += buf;
        if (groups) {
            auto cell = [&](double v) {
                if (v < 0.0) std::snprintf(buf, sizeof(buf), " %9s", "-");
                else std::snprintf(buf, sizeof(buf), " %8.2f%%", 100.0 * v);
                out += buf;
            };
            cell(r.field);
            cell(r.wells);
        }
        out += '\n';
    }
    return out;
}

scenario::Dataset subsample_train(const scenario::Dataset& data, std::size_t size,
                                  std::uint64_t seed) {
    auto train = data.indices(Partition::train);
    if (size > train.size()) throw ConfigError("subsample larger than TRAIN");
    Rng rng(derive_seed({seed, 0x4c43}));
    for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.below(i)]);
    train.resize(size);
    std::sort(train.begin(), train.end());
    std::vector<char> keep(data.records.size(), 0);
    for (auto i : train) keep[i] = 1;
    for (std::size_t i = 0; i < data.records.size(); ++i)
        if (data.partition[i] != Partition::train) keep[i] = 1;

    scenario::Dataset out;
    out.manifest = data.manifest;
    out.manifest.name = data.manifest.name + "-train" + std::to_string(size);
    for (std::size_t i = 0; i < data.records.size(); ++i)
        if (keep[i]) {
            out.records.push_back(data.records[i]);
            out.partition.push_back(data.partition[i]);
        }
    out.manifest.n_records = static_cast<std::int64_t>(out.records.size());
    out.manifest.counts[0] = static_cast<std::int64_t>(size);
    return out;
}

std::vector<CurvePoint> learning_curve(const scenario::Dataset& data,
                                       const proxy::ModelConfig& config,
                                       const proxy::TrainConfig& train, std::size_t min_size,
                                       std::uint64_t seed, const proxy::ProgressFn& progress) {
    std::vector<std::size_t> sizes;
    for (std::size_t n = data.indices(Partition::train).size(); n >= std::max<std::size_t>(min_size, 1); n /= 2)
        sizes.push_back(n);
    std::sort(sizes.begin(), sizes.end());
    std::vector<CurvePoint> out;
    for (auto n : sizes) {
        const auto sub = subsample_train(data, n, seed);
        const auto model = proxy::train_proxy(sub, config, train, progress);
        const auto report = evaluate_proxy(model, sub, Partition::test, proxy::DecodeMode::prop(),
                                           model.config().horizon);
        out.push_back({n, report.mean, model.training.best_valid_loss});
    }
    return out;
}

std::vector<HybridPoint> hybrid_sweep(const proxy::ProxyModel<float>& model,
                                      const scenario::Dataset& data, const std::vector<int>& ks,
                                      Partition partition) {
    std::vector<proxy::DecodeMode> modes{proxy::DecodeMode::prop()};
    for (int k : ks) modes.push_back(proxy::DecodeMode::hybrid(k));
    const int T = model.config().horizon;
    std::vector<HybridPoint> out;
    for (const auto& mode : modes) {
        const auto reported = evaluate_proxy(model, data, partition, mode, T, true);
        const auto raw = evaluate_proxy(model, data, partition, mode, T, false);
        out.push_back({mode.label(), reported.mean, raw.mean, reported.per_step});
    }
    return out;
}

}  // namespace resproxy::experiments
