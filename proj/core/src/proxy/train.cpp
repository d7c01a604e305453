#include "resproxy/proxy/train.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/common/random.hpp"
#include "resproxy/tensor/adam.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

namespace resproxy::proxy {

using tensor::Tensor;
using tensor::Var;

const char* to_string(Schedule s) noexcept {
    switch (s) {
        case Schedule::gt_only: return "gt_only";
        case Schedule::prop_only: return "prop_only";
        case Schedule::gt_pretrain_then_prop: return "gt_pretrain_then_prop";
        case Schedule::hybridprop: return "hybridprop";
    }
    return "?";
}

Schedule parse_schedule(std::string_view text) {
    for (auto s : {Schedule::gt_only, Schedule::prop_only, Schedule::gt_pretrain_then_prop,
                   Schedule::hybridprop})
        if (text == to_string(s)) return s;
    throw ConfigError("unknown training schedule '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(lr > 0.0) || !(finetune_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (clip_norm < 0.0) throw ConfigError("clip norm must be >= 0");
    if (schedule == Schedule::hybridprop && hybrid_k < 0) throw ConfigError("hybrid k must be >= 0");
}

Json to_json(const TrainConfig& t) {
    return Json{{"schedule", to_string(t.schedule)}, {"hybrid_k", t.hybrid_k},
                {"epochs", t.epochs},                {"patience", t.patience},
                {"batch_size", t.batch_size},        {"lr", t.lr},
                {"finetune_lr", t.finetune_lr},      {"clip_norm", t.clip_norm},
                {"seed", t.seed}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig t) {
    require_keys(j,
                 {"schedule", "hybrid_k", "epochs", "patience", "batch_size", "lr", "finetune_lr",
                  "clip_norm", "seed", "log_path"},
                 "train");
    if (auto it = j.find("schedule"); it != j.end()) t.schedule = parse_schedule(it->get<std::string>());
    read_optional(j, "hybrid_k", t.hybrid_k, "train");
    read_optional(j, "epochs", t.epochs, "train");
    read_optional(j, "patience", t.patience, "train");
    read_optional(j, "batch_size", t.batch_size, "train");
    read_optional(j, "lr", t.lr, "train");
    read_optional(j, "finetune_lr", t.finetune_lr, "train");
    read_optional(j, "clip_norm", t.clip_norm, "train");
    read_optional(j, "seed", t.seed, "train");
    read_optional(j, "log_path", t.log_path, "train");
    t.validate();
    return t;
}

Json to_json(const EpochLog& e) {
    return Json{{"phase", e.phase},           {"epoch", e.epoch}, {"train_loss", e.train_loss},
                {"valid_loss", e.valid_loss}, {"lr", e.lr},       {"seconds", e.seconds}};
}

std::vector<EpochLog> read_training_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open training log '" + path + "'");
    std::vector<EpochLog> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto j = Json::parse(line);
            EpochLog e;
            e.phase = j.at("phase").get<std::string>();
            e.epoch = j.at("epoch").get<int>();
            e.train_loss = j.at("train_loss").get<double>();
            e.valid_loss = j.at("valid_loss").get<double>();
            e.lr = j.at("lr").get<double>();
            e.seconds = j.at("seconds").get<double>();
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("malformed training log line: " + std::string(ex.what()));
        }
    }
    return out;
}

ModelConfig fit_to_dataset(ModelConfig config, const scenario::Dataset& data) {
    const auto& m = data.manifest;
    config.sequence_length = m.sequence_length;
    config.nx = m.grid.nx;
    config.ny = m.grid.ny;
    config.realizations = m.realizations;
    if (config.horizon > m.horizon)
        throw ConfigError("model horizon " + std::to_string(config.horizon) +
                          " exceeds dataset horizon " + std::to_string(m.horizon));
    if (config.output_dim > m.dims)
        throw ConfigError("model output dimension exceeds dataset rate columns");
    config.validate();
    return config;
}

std::vector<ProxyInput> inputs_of(const scenario::Dataset& data,
                                  const std::vector<std::size_t>& indices) {
    std::vector<ProxyInput> out;
    out.reserve(indices.size());
    for (auto i : indices)
        out.push_back({data.records.at(i).realization_id, data.records.at(i).actions});
    return out;
}

std::string hash_records(const scenario::Dataset& data, const std::vector<std::size_t>& indices) {
    std::uint64_t h = fnv1a64(nullptr, 0);
    for (auto i : indices) {
        const auto line = scenario::record_to_line(data.records.at(i));
        h = fnv1a64(line.data(), line.size(), h);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

template <typename T>
struct BatchView {
    std::vector<ProxyInput> inputs;
    std::vector<Matrix> truth;
};

template <typename T>
BatchView<T> gather(const scenario::Dataset& data, std::span<const std::size_t> indices) {
    BatchView<T> v;
    for (auto i : indices) {
        const auto& r = data.records.at(i);
        v.inputs.push_back({r.realization_id, r.actions});
        v.truth.push_back(r.rates);
    }
    return v;
}

/// Forward pass plus standardized MSE over all steps.
template <typename T>
Var batch_loss(tensor::Tape<T>& tape, const ProxyModel<T>& model, Seq2Seq<T>& net,
               const BatchView<T>& view, DecodeMode mode, int horizon) {
    const auto batch = model.encode(view.inputs);
    const auto truth = model.truth_tensors(view.truth, horizon);
    const auto out = net.forward(tape, batch, mode, horizon, &truth);
    const Var pred = out.steps.size() == 1 ? out.steps[0] : tape.concat(out.steps, 0);
    std::vector<Var> targets;
    targets.reserve(truth.size());
    for (const auto& t : truth) targets.push_back(tape.constant(t));
    const Var target = targets.size() == 1 ? targets[0] : tape.concat(targets, 0);
    return tape.mse_loss(pred, target);
}

template <typename T>
std::vector<Tensor<T>> snapshot(const tensor::ParameterStore<T>& store) {
    std::vector<Tensor<T>> s;
    for (std::size_t i = 0; i < store.size(); ++i) s.push_back(store[i].value);
    return s;
}

template <typename T>
void restore(tensor::ParameterStore<T>& store, const std::vector<Tensor<T>>& s) {
    for (std::size_t i = 0; i < store.size(); ++i) store[i].value = s[i];
}

template <typename T>
void clip_gradients(tensor::ParameterStore<T>& store, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i)
        for (auto g : store[i].grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const auto s = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < store.size(); ++i)
        for (auto& g : store[i].grad.values()) g *= s;
}

}  // namespace

template <typename T>
std::vector<Prediction> predict_records(const ProxyModel<T>& model, const scenario::Dataset& data,
                                        const std::vector<std::size_t>& indices, DecodeMode mode,
                                        int horizon, std::size_t batch_size) {
    std::vector<Prediction> out;
    out.reserve(indices.size());
    const bool needs_truth = mode.truth_steps(horizon) > 0;
    for (std::size_t s = 0; s < indices.size(); s += batch_size) {
        const auto n = std::min(batch_size, indices.size() - s);
        const auto view = gather<T>(data, std::span(indices).subspan(s, n));
        auto preds = model.predict(view.inputs, mode, horizon,
                                   needs_truth ? std::span<const Matrix>(view.truth)
                                               : std::span<const Matrix>());
        for (auto& p : preds) out.push_back(std::move(p));
    }
    return out;
}

template <typename T>
double evaluate_loss(const ProxyModel<T>& model, const scenario::Dataset& data,
                     const std::vector<std::size_t>& indices, DecodeMode mode, int horizon,
                     std::size_t batch_size) {
    if (indices.empty()) throw ContractError("cannot evaluate on an empty partition");
    auto& net = const_cast<Seq2Seq<T>&>(model.net());
    double total = 0.0;
    for (std::size_t s = 0; s < indices.size(); s += batch_size) {
        const auto n = std::min(batch_size, indices.size() - s);
        const auto view = gather<T>(data, std::span(indices).subspan(s, n));
        tensor::Tape<T> tape;
        const Var loss = batch_loss(tape, model, net, view, mode, horizon);
        total += static_cast<double>(tape.value(loss)[0]) * static_cast<double>(n);
    }
    return total / static_cast<double>(indices.size());
}

ProxyModel<float> train_proxy(const scenario::Dataset& data, ModelConfig config,
                              const TrainConfig& train, const ProgressFn& progress) {
    train.validate();
    config = fit_to_dataset(std::move(config), data);
    const auto train_idx = data.indices(scenario::Partition::train);
    const auto valid_idx = data.indices(scenario::Partition::valid);
    if (train_idx.empty() || valid_idx.empty())
        throw ContractError("training needs nonempty TRAIN and VALID partitions");

    const auto& m = data.manifest;
    GeologySource source{m.grid, m.geology, m.geology_seed, m.simulator.wells.completion_depth};
    std::shared_ptr<const GeologyTable> table;
    if (config.encoding == Encoding::factored && config.geology)
        table = build_geology(source, config.realizations);
    std::vector<const scenario::SimulationRecord*> train_records;
    for (auto i : train_idx) train_records.push_back(&data.records[i]);
    ProxyModel<float> model(config,
                            Standardizer::fit(train_records, config.output_dim, table.get()),
                            source, table);
    model.training.schedule = to_string(train.schedule);
    if (train.schedule == Schedule::hybridprop)
        model.training.schedule += ":" + std::to_string(train.hybrid_k);
    model.training.dataset = m.name;
    model.training.dataset_hash = hash_records(data, train_idx);

    std::vector<std::pair<DecodeMode, double>> phases;
    switch (train.schedule) {
        case Schedule::gt_only: phases = {{DecodeMode::gt(), train.lr}}; break;
        case Schedule::prop_only: phases = {{DecodeMode::prop(), train.lr}}; break;
        case Schedule::gt_pretrain_then_prop:
            phases = {{DecodeMode::gt(), train.lr}, {DecodeMode::prop(), train.finetune_lr}};
            break;
        case Schedule::hybridprop:
            phases = {{DecodeMode::gt(), train.lr}, {DecodeMode::hybrid(train.hybrid_k), train.finetune_lr}};
            break;
    }

    std::ofstream log;
    if (!train.log_path.empty()) {
        log.open(train.log_path, std::ios::trunc);
        if (!log) throw DataError("cannot open training log '" + train.log_path + "'");
    }
    auto emit = [&](const EpochLog& e) {
        if (log) log << to_json(e).dump() << '\n' << std::flush;
        if (progress) progress(e);
    };

    const int horizon = config.horizon;
    auto& net = model.net();
    auto& store = net.params();
    const auto B = static_cast<std::size_t>(train.batch_size);
    double last_finite = std::numeric_limits<double>::quiet_NaN();
    int total_epochs = 0;

    for (std::size_t p = 0; p < phases.size(); ++p) {
        const auto [mode, lr] = phases[p];
        tensor::Adam<float> adam({.lr = lr});
        const std::string label = mode.label();
        double best = evaluate_loss(model, data, valid_idx, mode, horizon);
        int best_epoch = 0;
        auto best_params = snapshot(store);
        emit({label, 0, evaluate_loss(model, data, train_idx, mode, horizon), best, lr, 0.0});

        int since = 0;
        std::vector<std::size_t> order = train_idx;
        for (int epoch = 1; epoch <= train.epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            Rng rng(derive_seed({train.seed, p, static_cast<std::uint64_t>(epoch)}));
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
            double sum = 0.0;
            try {
                for (std::size_t s = 0; s < order.size(); s += B) {
                    const auto n = std::min(B, order.size() - s);
                    const auto view = gather<float>(data, std::span(order).subspan(s, n));
                    store.zero_grad();
                    tensor::Tape<float> tape;
                    const Var loss = batch_loss(tape, model, net, view, mode, horizon);
                    tape.backward(loss);
                    clip_gradients(store, train.clip_norm);
                    adam.step(store);
                    const double l = static_cast<double>(tape.value(loss)[0]);
                    sum += l * static_cast<double>(n);
                    last_finite = l;
                }
            } catch (const NumericError& e) {
                throw NumericError("training diverged in " + label + " epoch " +
                                   std::to_string(epoch) + " (last finite batch loss " +
                                   std::to_string(last_finite) + "): " + e.what());
            }
            const double valid = evaluate_loss(model, data, valid_idx, mode, horizon);
            ++total_epochs;
            if (valid < best) {
                best = valid;
                best_epoch = epoch;
                best_params = snapshot(store);
                since = 0;
            } else {
                ++since;
            }
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            emit({label, epoch, sum / static_cast<double>(order.size()), valid, lr, secs});
            if (train.patience > 0 && since >= train.patience) break;
        }
        restore(store, best_params);
        model.training.best_epoch = best_epoch;
        model.training.best_valid_loss = best;
    }
    model.training.epochs = total_epochs;
    store.zero_grad();
    return model;
}

template std::vector<Prediction> predict_records<float>(const ProxyModel<float>&,
                                                        const scenario::Dataset&,
                                                        const std::vector<std::size_t>&,
                                                        DecodeMode, int, std::size_t);
template std::vector<Prediction> predict_records<double>(const ProxyModel<double>&,
                                                         const scenario::Dataset&,
                                                         const std::vector<std::size_t>&,
                                                         DecodeMode, int, std::size_t);
template double evaluate_loss<float>(const ProxyModel<float>&, const scenario::Dataset&,
                                     const std::vector<std::size_t>&, DecodeMode, int,
                                     std::size_t);
template double evaluate_loss<double>(const ProxyModel<double>&, const scenario::Dataset&,
                                      const std::vector<std::size_t>&, DecodeMode, int,
                                      std::size_t);

}  // namespace resproxy::proxy
