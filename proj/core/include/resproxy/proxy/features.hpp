#pragma once

#include "resproxy/common/json_util.hpp"
#include "resproxy/common/matrix.hpp"
#include "resproxy/proxy/config.hpp"
#include "resproxy/scenario/record.hpp"
#include "resproxy/sim/grid.hpp"
#include "resproxy/sim/realization.hpp"
#include "resproxy/tensor/tensor.hpp"

#include <span>
#include <vector>

namespace resproxy::proxy {

/// Raw completion-cell geology per (realization, well kind, x, y).
///
/// Feature order for each of the completed cells, shallowest first:
/// rock type (0 sand, 1 shale), porosity, ln perm_h, ln perm_v.
class GeologyTable {
public:
    GeologyTable() = default;
    GeologyTable(const std::vector<sim::Realization>& ensemble, const sim::GridSpec& grid,
                 int completion_depth);

    [[nodiscard]] std::span<const double> raw(int realization, scenario::ActionKind kind, int x,
                                              int y) const;
    [[nodiscard]] int realizations() const noexcept { return realizations_; }
    [[nodiscard]] int nx() const noexcept { return nx_; }
    [[nodiscard]] int ny() const noexcept { return ny_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

private:
    int realizations_ = 0;
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> data_;
};

/// Per-dimension affine standardization fitted on TRAIN.
struct Standardizer {
    static constexpr double kMinStd = 1e-8;

    std::vector<double> out_mean, out_std;  // D
    std::vector<double> geo_mean, geo_std;  // kGeologyFeatures

    /// Output statistics over every step of every record (first `dims` columns); geology
    /// statistics over every drilled action.
    static Standardizer fit(std::span<const scenario::SimulationRecord* const> records, int dims,
                            const GeologyTable* geology);

    [[nodiscard]] double standardize(std::size_t k, double y) const {
        return (y - out_mean[k]) / out_std[k];
    }
    [[nodiscard]] double destandardize(std::size_t k, double z) const {
        return z * out_std[k] + out_mean[k];
    }
    [[nodiscard]] Matrix standardize(const Matrix& rates) const;
    [[nodiscard]] Matrix destandardize(const Matrix& z) const;

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

Json to_json(const Standardizer& s);
Standardizer standardizer_from_json(const Json& j);

/// One model query: a realization and its drilling plan.
struct ProxyInput {
    int realization = 0;
    scenario::ActionSequence actions;
};

/// Embedding ids and standardized geology for a batch, position-major.
template <typename T>
struct EncodedBatch {
    std::size_t batch = 0;
    std::size_t length = 0;                          // K
    std::vector<std::vector<std::size_t>> type;      // [K][B]
    std::vector<std::vector<std::size_t>> x;
    std::vector<std::vector<std::size_t>> y;
    std::vector<std::vector<std::size_t>> joint;
    std::vector<std::size_t> realization;            // [B]
    std::vector<tensor::Tensor<T>> geology;          // [K] of B x kGeologyFeatures
};

/// Throws ContractError for ids outside the model's vocabularies or ragged lengths.
template <typename T>
EncodedBatch<T> encode_inputs(std::span<const ProxyInput> inputs, const ModelConfig& config,
                              const GeologyTable* geology, const Standardizer& standardizer);

}  // namespace resproxy::proxy
