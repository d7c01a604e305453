#include "resproxy/proxy/proxy.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/scenario/dataset.hpp"
#include "resproxy/sim/config_json.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace resproxy::proxy {

namespace {

constexpr char kMagic[8] = {'R', 'P', 'X', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
constexpr const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

Json to_json(const GeologySource& s) {
    return Json{{"grid", sim::to_json(s.grid)},
                {"geology", sim::to_json(s.geology)},
                {"geology_seed", s.geology_seed},
                {"completion_depth", s.completion_depth}};
}

GeologySource source_from_json(const Json& j) {
    require_keys(j, {"grid", "geology", "geology_seed", "completion_depth"}, "geology_source");
    GeologySource s;
    sim::from_json(j.at("grid"), s.grid);
    sim::from_json(j.at("geology"), s.geology);
    s.geology_seed = j.at("geology_seed").get<std::uint64_t>();
    s.completion_depth = j.at("completion_depth").get<int>();
    return s;
}

Json to_json(const TrainingInfo& t) {
    return Json{{"schedule", t.schedule},       {"dataset", t.dataset},
                {"dataset_hash", t.dataset_hash}, {"epochs", t.epochs},
                {"best_epoch", t.best_epoch},   {"best_valid_loss", t.best_valid_loss}};
}

TrainingInfo training_from_json(const Json& j) {
    TrainingInfo t;
    t.schedule = j.at("schedule").get<std::string>();
    t.dataset = j.at("dataset").get<std::string>();
    t.dataset_hash = j.at("dataset_hash").get<std::string>();
    t.epochs = j.at("epochs").get<int>();
    t.best_epoch = j.at("best_epoch").get<int>();
    t.best_valid_loss = j.at("best_valid_loss").get<double>();
    return t;
}

template <typename V>
void append(std::string& buf, V v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    buf.append(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V take(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(V) > buf.size()) throw DataError("checkpoint is truncated");
    V v;
    std::memcpy(&v, buf.data() + pos, sizeof(V));
    pos += sizeof(V);
    return v;
}

struct RawCheckpoint {
    Json header;
    std::string bytes;
    std::size_t body = 0;  // offset of the first parameter array
};

RawCheckpoint read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    RawCheckpoint raw;
    raw.bytes = ss.str();
    const auto& b = raw.bytes;
    if (b.size() < sizeof(kMagic) || std::memcmp(b.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError("'" + path + "' is not a checkpoint");
    std::size_t pos = sizeof(kMagic);
    const auto version = take<std::uint32_t>(b, pos);
    if (version != kCheckpointVersion)
        throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    const auto header_len = take<std::uint64_t>(b, pos);
    if (b.size() < sizeof(std::uint64_t) || header_len > b.size() - pos - sizeof(std::uint64_t))
        throw DataError("checkpoint is truncated");
    std::size_t trailer = b.size() - sizeof(std::uint64_t);
    std::uint64_t stored = 0;
    std::memcpy(&stored, b.data() + trailer, sizeof(stored));
    if (fnv1a64(b.data(), trailer) != stored) throw DataError("checkpoint checksum mismatch");
    try {
        raw.header = Json::parse(b.substr(pos, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header is malformed: ") + e.what());
    }
    raw.body = pos + header_len;
    return raw;
}

template <typename T>
void read_arrays(const RawCheckpoint& raw, tensor::ParameterStore<T>& store) {
    const std::string stored_dtype = raw.header.at("dtype").get<std::string>();
    if (stored_dtype != dtype_name<T>())
        throw ConfigError("checkpoint stores " + stored_dtype + " parameters, expected " +
                          dtype_name<T>());
    const auto& list = raw.header.at("params");
    if (list.size() != store.size())
        throw ConfigError("checkpoint has " + std::to_string(list.size()) +
                          " parameter arrays, model expects " + std::to_string(store.size()));
    std::size_t pos = raw.body;
    const std::size_t end = raw.bytes.size() - sizeof(std::uint64_t);
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto& p = store[i];
        const auto name = list[i].at("name").get<std::string>();
        const auto rows = list[i].at("rows").get<std::size_t>();
        const auto cols = list[i].at("cols").get<std::size_t>();
        if (name != p.name || rows != p.value.rows() || cols != p.value.cols())
            throw ConfigError("checkpoint array " + name + " [" + std::to_string(rows) + "x" +
                              std::to_string(cols) + "] does not match model array " + p.name +
                              " " + p.value.shape_string());
        const std::size_t n = p.value.size() * sizeof(T);
        if (pos + n > end) throw DataError("checkpoint is truncated");
        std::memcpy(p.value.data(), raw.bytes.data() + pos, n);
        pos += n;
        p.grad.fill(T(0));
    }
    if (pos != end) throw DataError("checkpoint has trailing bytes");
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= p[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

Matrix clip_nonnegative(Matrix rates) {
    for (auto& v : rates.values())
        if (v < 0.0) v = 0.0;
    return rates;
}

void substitute_truth(Matrix& rates, const Matrix& truth, DecodeMode mode) {
    if (mode.kind != DecodeMode::Kind::hybrid) return;
    const auto rows = std::min<std::size_t>(static_cast<std::size_t>(std::max(mode.k, 0)), rates.rows());
    if (truth.rows() < rows || truth.cols() < rates.cols())
        throw ContractError("ground truth does not cover the substituted hybrid rows");
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t k = 0; k < rates.cols(); ++k) rates(t, k) = truth(t, k);
}

int simulated_steps(DecodeMode mode, int horizon) noexcept {
    if (mode.kind == DecodeMode::Kind::hybrid) return std::clamp(mode.k, 0, horizon);
    return mode.truth_steps(horizon);
}

std::shared_ptr<const GeologyTable> build_geology(const GeologySource& source, int realizations) {
    const auto ensemble =
        scenario::generate_ensemble(realizations, source.geology_seed, source.grid, source.geology);
    return std::make_shared<const GeologyTable>(ensemble, source.grid, source.completion_depth);
}

template <typename T>
ProxyModel<T>::ProxyModel(const ModelConfig& config, Standardizer standardizer,
                          std::optional<GeologySource> source)
    : ProxyModel(config, std::move(standardizer), source,
                 source && config.encoding == Encoding::factored && config.geology
                     ? build_geology(*source, config.realizations)
                     : nullptr) {}

template <typename T>
ProxyModel<T>::ProxyModel(const ModelConfig& config, Standardizer standardizer,
                          std::optional<GeologySource> source,
                          std::shared_ptr<const GeologyTable> table)
    : net_(config), standardizer_(std::move(standardizer)), source_(std::move(source)),
      table_(std::move(table)) {
    if (standardizer_.out_mean.size() != static_cast<std::size_t>(config.output_dim))
        throw ContractError("standardizer width does not match model output dimension");
    if (source_ && (source_->grid.nx != config.nx || source_->grid.ny != config.ny))
        throw ContractError("geology grid does not match model grid");
    if (table_ && (table_->nx() != config.nx || table_->ny() != config.ny ||
                   table_->realizations() < config.realizations))
        throw ContractError("geology table does not match model vocabulary");
}

template <typename T>
EncodedBatch<T> ProxyModel<T>::encode(std::span<const ProxyInput> inputs) const {
    return encode_inputs<T>(inputs, net_.config(), table_.get(), standardizer_);
}

template <typename T>
std::vector<tensor::Tensor<T>> ProxyModel<T>::truth_tensors(std::span<const Matrix> truth,
                                                            int steps) const {
    const auto D = static_cast<std::size_t>(net_.config().output_dim);
    std::vector<tensor::Tensor<T>> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
        tensor::Tensor<T> step(truth.size(), D);
        for (std::size_t b = 0; b < truth.size(); ++b) {
            if (truth[b].rows() <= static_cast<std::size_t>(t) || truth[b].cols() < D)
                throw ContractError("ground truth for input " + std::to_string(b) +
                                    " does not cover step " + std::to_string(t));
            for (std::size_t k = 0; k < D; ++k)
                step(b, k) = static_cast<T>(standardizer_.standardize(k, truth[b](static_cast<std::size_t>(t), k)));
        }
        out.push_back(std::move(step));
    }
    return out;
}

template <typename T>
std::vector<Prediction> ProxyModel<T>::predict(std::span<const ProxyInput> inputs,
                                               DecodeMode mode, int horizon,
                                               std::span<const Matrix> truth) const {
    const auto batch = encode(inputs);
    const int needed = mode.truth_steps(horizon);
    std::vector<tensor::Tensor<T>> fed;
    if (needed > 0) {
        if (truth.size() != inputs.size())
            throw ContractError("decode mode " + mode.label() + " needs ground truth for every input");
        fed = truth_tensors(truth, needed);
    }
    tensor::Tape<T> tape;
    const auto out = net_.forward(tape, batch, mode, horizon, needed > 0 ? &fed : nullptr);

    const auto D = static_cast<std::size_t>(net_.config().output_dim);
    const auto T_out = static_cast<std::size_t>(horizon);
    std::vector<Prediction> preds(inputs.size());
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        preds[b].rates = Matrix(T_out, D);
        if (!out.masks.empty()) preds[b].mask = Matrix(T_out, batch.length);
    }
    for (std::size_t t = 0; t < T_out; ++t) {
        const auto& y = tape.value(out.steps[t]);
        for (std::size_t b = 0; b < inputs.size(); ++b) {
            for (std::size_t k = 0; k < D; ++k)
                preds[b].rates(t, k) = standardizer_.destandardize(k, static_cast<double>(y(b, k)));
            if (!out.masks.empty())
                for (std::size_t k = 0; k < batch.length; ++k)
                    preds[b].mask(t, k) = static_cast<double>(out.masks[t](b, k));
        }
    }
    return preds;
}

template <typename T>
void save_checkpoint(const std::string& path, const ProxyModel<T>& model) {
    const auto& store = model.net().params();
    Json params = Json::array();
    for (std::size_t i = 0; i < store.size(); ++i)
        params.push_back(Json{{"name", store[i].name},
                              {"rows", store[i].value.rows()},
                              {"cols", store[i].value.cols()}});
    const Json header{{"format", "resproxy.checkpoint"},
                      {"dtype", dtype_name<T>()},
                      {"config", to_json(model.config())},
                      {"standardizer", to_json(model.standardizer())},
                      {"geology_source", model.geology_source() ? to_json(*model.geology_source()) : Json()},
                      {"training", to_json(model.training)},
                      {"params", params}};
    const std::string text = header.dump();

    std::string buf(kMagic, sizeof(kMagic));
    append<std::uint32_t>(buf, kCheckpointVersion);
    append<std::uint64_t>(buf, text.size());
    buf += text;
    for (std::size_t i = 0; i < store.size(); ++i)
        buf.append(reinterpret_cast<const char*>(store[i].value.data()),
                   store[i].value.size() * sizeof(T));
    append<std::uint64_t>(buf, fnv1a64(buf.data(), buf.size()));
    write_text_file(path, buf);
}

Json read_checkpoint_header(const std::string& path) { return read_raw(path).header; }

template <typename T>
ProxyModel<T> load_checkpoint(const std::string& path) {
    const auto raw = read_raw(path);
    try {
        const auto& h = raw.header;
        const ModelConfig config = model_config_from_json(h.at("config"));
        std::optional<GeologySource> source;
        if (!h.at("geology_source").is_null()) source = source_from_json(h.at("geology_source"));
        ProxyModel<T> model(config, standardizer_from_json(h.at("standardizer")), source);
        model.training = training_from_json(h.at("training"));
        read_arrays(raw, model.net().params());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header is malformed: ") + e.what());
    }
}

template <typename T>
void load_parameters(const std::string& path, Seq2Seq<T>& net) {
    const auto raw = read_raw(path);
    try {
        if (model_config_from_json(raw.header.at("config")) != net.config())
            throw ConfigError("checkpoint configuration differs from the target model");
        read_arrays(raw, net.params());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header is malformed: ") + e.what());
    }
}

template class ProxyModel<float>;
template class ProxyModel<double>;
template void save_checkpoint<float>(const std::string&, const ProxyModel<float>&);
template void save_checkpoint<double>(const std::string&, const ProxyModel<double>&);
template ProxyModel<float> load_checkpoint<float>(const std::string&);
template ProxyModel<double> load_checkpoint<double>(const std::string&);
template void load_parameters<float>(const std::string&, Seq2Seq<float>&);
template void load_parameters<double>(const std::string&, Seq2Seq<double>&);

}  // namespace resproxy::proxy
