#include "resproxy/proxy/features.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/sim/simulator.hpp"

#include <cmath>

namespace resproxy::proxy {

namespace {

std::size_t kind_slot(scenario::ActionKind kind) {
    return kind == scenario::ActionKind::producer ? 0 : 1;
}

}  // namespace

GeologyTable::GeologyTable(const std::vector<sim::Realization>& ensemble, const sim::GridSpec& grid,
                           int completion_depth)
    : realizations_(static_cast<int>(ensemble.size())), nx_(grid.nx), ny_(grid.ny) {
    const auto block = static_cast<std::size_t>(kGeologyFeatures);
    data_.assign(ensemble.size() * 2 * static_cast<std::size_t>(nx_ * ny_) * block, 0.0);
    for (std::size_t r = 0; r < ensemble.size(); ++r) {
        const auto& real = ensemble[r];
        if (real.cells() != static_cast<std::size_t>(grid.cells()))
            throw ContractError("realization does not match grid");
        for (auto kind : {sim::WellKind::producer, sim::WellKind::injector}) {
            const auto layers = sim::completion_layers(kind, grid, completion_depth);
            const std::size_t slot = kind == sim::WellKind::producer ? 0 : 1;
            for (int y = 0; y < ny_; ++y)
                for (int x = 0; x < nx_; ++x) {
                    double* out = data_.data() +
                                  (((r * 2 + slot) * static_cast<std::size_t>(ny_) +
                                    static_cast<std::size_t>(y)) *
                                       static_cast<std::size_t>(nx_) +
                                   static_cast<std::size_t>(x)) *
                                      block;
                    for (std::size_t c = 0; c < layers.size() && c < kGeologyCells; ++c) {
                        const auto cell = static_cast<std::size_t>(grid.index(x, y, layers[c]));
                        out[c * kGeologyPerCell + 0] =
                            real.rock_type[cell] == sim::RockType::shale ? 1.0 : 0.0;
                        out[c * kGeologyPerCell + 1] = real.porosity[cell];
                        out[c * kGeologyPerCell + 2] = std::log(real.perm_h[cell]);
                        out[c * kGeologyPerCell + 3] = std::log(real.perm_v[cell]);
                    }
                }
        }
    }
}

std::span<const double> GeologyTable::raw(int realization, scenario::ActionKind kind, int x,
                                          int y) const {
    if (realization < 0 || realization >= realizations_ || x < 0 || x >= nx_ || y < 0 || y >= ny_ ||
        kind == scenario::ActionKind::none)
        throw ContractError("geology lookup out of range");
    const auto block = static_cast<std::size_t>(kGeologyFeatures);
    const std::size_t off = (((static_cast<std::size_t>(realization) * 2 + kind_slot(kind)) *
                                  static_cast<std::size_t>(ny_) +
                              static_cast<std::size_t>(y)) *
                                 static_cast<std::size_t>(nx_) +
                             static_cast<std::size_t>(x)) *
                            block;
    return {data_.data() + off, block};
}

Standardizer Standardizer::fit(std::span<const scenario::SimulationRecord* const> records, int dims,
                               const GeologyTable* geology) {
    if (records.empty()) throw ContractError("cannot fit a standardizer on an empty partition");
    const auto d = static_cast<std::size_t>(dims);
    Standardizer s;
    std::vector<double> sum(d, 0.0), sq(d, 0.0);
    double count = 0.0;
    for (const auto* r : records) {
        if (r->dims() < d) throw ContractError("record has fewer rate columns than the model");
        for (std::size_t t = 0; t < r->horizon(); ++t) {
            for (std::size_t k = 0; k < d; ++k) {
                const double v = r->rates(t, k);
                sum[k] += v;
                sq[k] += v * v;
            }
            count += 1.0;
        }
    }
    s.out_mean.resize(d);
    s.out_std.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double mean = sum[k] / count;
        const double var = std::max(0.0, sq[k] / count - mean * mean);
        s.out_mean[k] = mean;
        s.out_std[k] = std::max(std::sqrt(var), kMinStd);
    }

    const auto g = static_cast<std::size_t>(kGeologyFeatures);
    s.geo_mean.assign(g, 0.0);
    s.geo_std.assign(g, 1.0);
    if (geology && !geology->empty()) {
        std::vector<double> gs(g, 0.0), gq(g, 0.0);
        double n = 0.0;
        for (const auto* r : records)
            for (const auto& a : r->actions) {
                if (!a.drills()) continue;
                const auto f = geology->raw(r->realization_id, a.kind, a.x, a.y);
                for (std::size_t k = 0; k < g; ++k) {
                    gs[k] += f[k];
                    gq[k] += f[k] * f[k];
                }
                n += 1.0;
            }
        if (n > 0.0)
            for (std::size_t k = 0; k < g; ++k) {
                const double mean = gs[k] / n;
                s.geo_mean[k] = mean;
                s.geo_std[k] = std::max(std::sqrt(std::max(0.0, gq[k] / n - mean * mean)), kMinStd);
            }
    }
    return s;
}

Matrix Standardizer::standardize(const Matrix& rates) const {
    if (rates.cols() < out_mean.size()) throw ContractError("rate matrix narrower than standardizer");
    Matrix z(rates.rows(), out_mean.size());
    for (std::size_t t = 0; t < rates.rows(); ++t)
        for (std::size_t k = 0; k < out_mean.size(); ++k) z(t, k) = standardize(k, rates(t, k));
    return z;
}

Matrix Standardizer::destandardize(const Matrix& z) const {
    if (z.cols() != out_mean.size()) throw ContractError("standardized matrix width mismatch");
    Matrix y(z.rows(), z.cols());
    for (std::size_t t = 0; t < z.rows(); ++t)
        for (std::size_t k = 0; k < z.cols(); ++k) y(t, k) = destandardize(k, z(t, k));
    return y;
}

Json to_json(const Standardizer& s) {
    return Json{{"out_mean", s.out_mean},
                {"out_std", s.out_std},
                {"geo_mean", s.geo_mean},
                {"geo_std", s.geo_std}};
}

Standardizer standardizer_from_json(const Json& j) {
    Standardizer s;
    try {
        s.out_mean = j.at("out_mean").get<std::vector<double>>();
        s.out_std = j.at("out_std").get<std::vector<double>>();
        s.geo_mean = j.at("geo_mean").get<std::vector<double>>();
        s.geo_std = j.at("geo_std").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed standardizer: ") + e.what());
    }
    if (s.out_mean.size() != s.out_std.size() || s.geo_mean.size() != s.geo_std.size())
        throw DataError("standardizer arrays have mismatched lengths");
    return s;
}

template <typename T>
EncodedBatch<T> encode_inputs(std::span<const ProxyInput> inputs, const ModelConfig& config,
                              const GeologyTable* geology, const Standardizer& standardizer) {
    if (inputs.empty()) throw ContractError("empty input batch");
    const std::size_t K = inputs.front().actions.size();
    if (K == 0) throw ContractError("action sequence is empty");
    const bool use_geo = config.encoding == Encoding::factored && config.geology;
    if (use_geo && (!geology || geology->empty()))
        throw ContractError("model needs geology features but none were supplied");
    if (use_geo && standardizer.geo_mean.size() != static_cast<std::size_t>(kGeologyFeatures))
        throw ContractError("standardizer lacks geology statistics");

    EncodedBatch<T> e;
    e.batch = inputs.size();
    e.length = K;
    e.type.assign(K, std::vector<std::size_t>(e.batch));
    e.x.assign(K, std::vector<std::size_t>(e.batch));
    e.y.assign(K, std::vector<std::size_t>(e.batch));
    e.joint.assign(K, std::vector<std::size_t>(e.batch));
    e.realization.resize(e.batch);
    if (use_geo) e.geology.assign(K, tensor::Tensor<T>(e.batch, kGeologyFeatures));

    const auto nx = static_cast<std::size_t>(config.nx);
    const auto ny = static_cast<std::size_t>(config.ny);
    for (std::size_t b = 0; b < e.batch; ++b) {
        const auto& in = inputs[b];
        if (in.actions.size() != K) throw ContractError("ragged action sequence lengths in batch");
        if (in.realization < 0 || in.realization >= config.realizations)
            throw ContractError("realization " + std::to_string(in.realization) +
                                " is outside the model vocabulary [0, " +
                                std::to_string(config.realizations) + ")");
        e.realization[b] = static_cast<std::size_t>(in.realization);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& a = in.actions[k];
            if (a.drills() && (a.x < 0 || a.x >= config.nx || a.y < 0 || a.y >= config.ny))
                throw ContractError("action " + scenario::to_token(a) + " is outside the grid");
            e.type[k][b] = static_cast<std::size_t>(a.kind);
            e.x[k][b] = a.drills() ? static_cast<std::size_t>(a.x) : nx;
            e.y[k][b] = a.drills() ? static_cast<std::size_t>(a.y) : ny;
            const std::size_t cell = static_cast<std::size_t>(a.x) + nx * static_cast<std::size_t>(a.y);
            e.joint[k][b] = a.kind == scenario::ActionKind::producer ? cell
                            : a.kind == scenario::ActionKind::injector ? nx * ny + cell
                                                                       : 2 * nx * ny;
            if (use_geo && a.drills()) {
                const auto f = geology->raw(in.realization, a.kind, a.x, a.y);
                for (std::size_t g = 0; g < static_cast<std::size_t>(kGeologyFeatures); ++g)
                    e.geology[k](b, g) = static_cast<T>((f[g] - standardizer.geo_mean[g]) /
                                                        standardizer.geo_std[g]);
            }
        }
    }
    return e;
}

template EncodedBatch<float> encode_inputs<float>(std::span<const ProxyInput>, const ModelConfig&,
                                                  const GeologyTable*, const Standardizer&);
template EncodedBatch<double> encode_inputs<double>(std::span<const ProxyInput>,
                                                    const ModelConfig&, const GeologyTable*,
                                                    const Standardizer&);

}  // namespace resproxy::proxy
