#pragma once

#include "resproxy/proxy/proxy.hpp"
#include "resproxy/scenario/dataset.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace resproxy::proxy {

/// gt_pretrain_then_prop and hybridprop share the gt pre-training phase; the second phase
/// decodes in prop or hybrid(hybrid_k) at finetune_lr.
enum class Schedule { gt_only, prop_only, gt_pretrain_then_prop, hybridprop };

const char* to_string(Schedule s) noexcept;
Schedule parse_schedule(std::string_view text);

struct TrainConfig {
    Schedule schedule = Schedule::gt_pretrain_then_prop;
    int hybrid_k = 1;
    int epochs = 200;          // per phase
    int patience = 20;         // epochs without VALID improvement; 0 disables early stopping
    int batch_size = 100;
    double lr = 1e-3;
    double finetune_lr = 2e-4; // second phase of gt_pretrain_then_prop and hybridprop
    double clip_norm = 5.0;    // global gradient norm; 0 disables
    std::uint64_t seed = 1;    // batch shuffling
    std::string log_path;      // JSONL, one line per epoch; empty disables

    void validate() const;
};

Json to_json(const TrainConfig& t);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

struct EpochLog {
    std::string phase;  // decode mode label
    int epoch = 0;      // 0 is the evaluation before any update
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

Json to_json(const EpochLog& e);
std::vector<EpochLog> read_training_log(const std::string& path);

using ProgressFn = std::function<void(const EpochLog&)>;

/// Fills the dataset-derived fields of `config` (K, grid size, R, T unless set) and trains.
/// The returned model holds the parameters with the best VALID loss of the last phase.
ProxyModel<float> train_proxy(const scenario::Dataset& data, ModelConfig config,
                              const TrainConfig& train, const ProgressFn& progress = {});

/// Model config with K, nx, ny and R taken from the dataset; horizon and D from the caller.
ModelConfig fit_to_dataset(ModelConfig config, const scenario::Dataset& data);

std::vector<ProxyInput> inputs_of(const scenario::Dataset& data,
                                  const std::vector<std::size_t>& indices);

/// Batched prediction for dataset records, feeding their own ground truth where needed.
template <typename T>
std::vector<Prediction> predict_records(const ProxyModel<T>& model, const scenario::Dataset& data,
                                        const std::vector<std::size_t>& indices, DecodeMode mode,
                                        int horizon, std::size_t batch_size = 100);

/// Mean standardized sequence MSE over records.
template <typename T>
double evaluate_loss(const ProxyModel<T>& model, const scenario::Dataset& data,
                     const std::vector<std::size_t>& indices, DecodeMode mode, int horizon,
                     std::size_t batch_size = 100);

/// Hex FNV-1a over the serialized records.
std::string hash_records(const scenario::Dataset& data, const std::vector<std::size_t>& indices);

}  // namespace resproxy::proxy
