#pragma once

#include "resproxy/common/matrix.hpp"
#include "resproxy/proxy/features.hpp"
#include "resproxy/proxy/model.hpp"
#include "resproxy/sim/grid.hpp"
#include "resproxy/sim/realization.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace resproxy::proxy {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// How the geology table of a model was built; stored so a checkpoint can rebuild it.
struct GeologySource {
    sim::GridSpec grid;
    sim::GeoParams geology;
    std::uint64_t geology_seed = 0;
    int completion_depth = 5;

    friend bool operator==(const GeologySource&, const GeologySource&) = default;
};

struct TrainingInfo {
    std::string schedule;
    std::string dataset;       // dataset name
    std::string dataset_hash;  // FNV-1a of the TRAIN records, hex
    int epochs = 0;
    int best_epoch = -1;
    double best_valid_loss = 0.0;

    friend bool operator==(const TrainingInfo&, const TrainingInfo&) = default;
};

struct Prediction {
    Matrix rates;  // T_out x D, physical units
    Matrix mask;   // T_out x K; empty without attention
};

/// Trained network plus everything needed to turn raw inputs into physical rates.
///
/// predict() only reads parameters, so one instance may serve concurrent callers as long as
/// nobody trains it at the same time.
template <typename T>
class ProxyModel {
public:
    ProxyModel(const ModelConfig& config, Standardizer standardizer,
               std::optional<GeologySource> source);
    /// Shares an already built geology table (must match `source`).
    ProxyModel(const ModelConfig& config, Standardizer standardizer,
               std::optional<GeologySource> source, std::shared_ptr<const GeologyTable> table);

    /// `truth[b]` holds physical ground-truth rates for input b (at least the steps the mode
    /// feeds back, D columns or more).
    std::vector<Prediction> predict(std::span<const ProxyInput> inputs, DecodeMode mode,
                                    int horizon, std::span<const Matrix> truth = {}) const;

    [[nodiscard]] EncodedBatch<T> encode(std::span<const ProxyInput> inputs) const;
    /// Standardized B x D truth tensors per step for the first `steps` steps.
    [[nodiscard]] std::vector<tensor::Tensor<T>> truth_tensors(std::span<const Matrix> truth,
                                                               int steps) const;

    [[nodiscard]] const ModelConfig& config() const noexcept { return net_.config(); }
    Seq2Seq<T>& net() noexcept { return net_; }
    [[nodiscard]] const Seq2Seq<T>& net() const noexcept { return net_; }
    [[nodiscard]] const Standardizer& standardizer() const noexcept { return standardizer_; }
    [[nodiscard]] const std::optional<GeologySource>& geology_source() const noexcept {
        return source_;
    }
    [[nodiscard]] const GeologyTable* geology() const noexcept { return table_.get(); }

    TrainingInfo training;

private:
    mutable Seq2Seq<T> net_;
    Standardizer standardizer_;
    std::optional<GeologySource> source_;
    std::shared_ptr<const GeologyTable> table_;
};

extern template class ProxyModel<float>;
extern template class ProxyModel<double>;

/// Builds the geology table described by `source` (regenerates the ensemble).
std::shared_ptr<const GeologyTable> build_geology(const GeologySource& source, int realizations);

/// Layout: "RPXCKPT\0", u32 version, u64 header length, JSON header, raw little-endian
/// parameter arrays in header order, u64 FNV-1a of all preceding bytes.
template <typename T>
void save_checkpoint(const std::string& path, const ProxyModel<T>& model);

/// Throws DataError on corruption or version mismatch, ConfigError if the stored element
/// type differs from T.
template <typename T>
ProxyModel<T> load_checkpoint(const std::string& path);

/// Header of a checkpoint without its parameters (validated the same way).
Json read_checkpoint_header(const std::string& path);

/// Copies parameters from `path` into `net`; names and shapes must match exactly.
template <typename T>
void load_parameters(const std::string& path, Seq2Seq<T>& net);

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept;

/// Negative rates clipped to zero; used only when reporting predictions.
Matrix clip_nonnegative(Matrix rates);

/// Deployment convention for hybrid(k): the simulator that supplies the fed ground truth
/// also supplies the first k reported rows. Other modes are left untouched.
void substitute_truth(Matrix& rates, const Matrix& truth, DecodeMode mode);

/// Rows of ground truth a deployed model needs from the simulator in `mode`.
int simulated_steps(DecodeMode mode, int horizon) noexcept;

}  // namespace resproxy::proxy
