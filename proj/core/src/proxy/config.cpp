#include "resproxy/proxy/config.hpp"

#include "resproxy/common/errors.hpp"

#include <charconv>

namespace resproxy::proxy {

const char* to_string(Encoding e) noexcept { return e == Encoding::factored ? "factored" : "joint"; }

const char* to_string(AttentionKind a) noexcept {
    switch (a) {
        case AttentionKind::none: return "none";
        case AttentionKind::top_layer: return "top_layer";
        case AttentionKind::all_layers: return "all_layers";
    }
    return "?";
}

Encoding parse_encoding(std::string_view text) {
    if (text == "factored") return Encoding::factored;
    if (text == "joint") return Encoding::joint;
    throw ConfigError("unknown encoding '" + std::string(text) + "'");
}

AttentionKind parse_attention(std::string_view text) {
    if (text == "none") return AttentionKind::none;
    if (text == "top_layer") return AttentionKind::top_layer;
    if (text == "all_layers") return AttentionKind::all_layers;
    throw ConfigError("unknown attention kind '" + std::string(text) + "'");
}

int DecodeMode::truth_steps(int horizon) const noexcept {
    switch (kind) {
        case Kind::gt: return horizon > 0 ? horizon - 1 : 0;
        case Kind::prop: return 0;
        case Kind::hybrid: return std::min(k, horizon > 0 ? horizon - 1 : 0);
    }
    return 0;
}

std::string DecodeMode::label() const {
    switch (kind) {
        case Kind::gt: return "gt";
        case Kind::prop: return "prop";
        case Kind::hybrid: return "hybrid:" + std::to_string(k);
    }
    return "?";
}

DecodeMode parse_decode_mode(std::string_view text, int k) {
    if (text == "gt") return DecodeMode::gt();
    if (text == "prop") return DecodeMode::prop();
    if (text == "hybrid") {
        if (k < 0) throw ConfigError("hybrid k must be >= 0");
        return DecodeMode::hybrid(k);
    }
    if (text.starts_with("hybrid:")) {
        int value = -1;
        const auto digits = text.substr(7);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
        if (ec != std::errc() || ptr != digits.data() + digits.size() || value < 0)
            throw ConfigError("bad hybrid step count in '" + std::string(text) + "'");
        return DecodeMode::hybrid(value);
    }
    throw ConfigError("unknown decode mode '" + std::string(text) + "'");
}

ModelConfig ModelConfig::preset(std::string_view name) {
    ModelConfig c;
    if (name == "64x1") {
        c.hidden = 64;
        c.layers = 1;
    } else if (name == "128x5") {
        c.hidden = 128;
        c.layers = 5;
    } else if (name == "1024x2") {
        c.hidden = 1024;
        c.layers = 2;
    } else {
        throw ConfigError("unknown model preset '" + std::string(name) + "'");
    }
    return c;
}

std::string ModelConfig::preset_name() const {
    return std::to_string(hidden) + "x" + std::to_string(layers);
}

int ModelConfig::input_dim() const noexcept {
    if (encoding == Encoding::joint) return emb_joint + emb_realization;
    return emb_type + emb_x + emb_y + emb_realization + (geology ? kGeologyFeatures : 0);
}

int ModelConfig::memory_dim() const noexcept {
    switch (attention) {
        case AttentionKind::none: return 0;
        case AttentionKind::top_layer: return hidden;
        case AttentionKind::all_layers: return hidden * layers;
    }
    return 0;
}

void ModelConfig::validate() const {
    if (hidden < 1 || layers < 1) throw ConfigError("hidden units and layers must be >= 1");
    if (emb_type < 1 || emb_x < 1 || emb_y < 1 || emb_realization < 1 || emb_joint < 1)
        throw ConfigError("embedding dimensions must be >= 1");
    if (output_dim < 1) throw ConfigError("output dimension must be >= 1");
    if (horizon < 1 || sequence_length < 1) throw ConfigError("horizon and K must be >= 1");
    if (nx < 1 || ny < 1 || realizations < 1)
        throw ConfigError("grid surface and realization count must be >= 1");
    if (!(init_scale >= 0.0)) throw ConfigError("init scale must be >= 0");
}

Json to_json(const ModelConfig& c) {
    return Json{{"hidden", c.hidden},
                {"layers", c.layers},
                {"emb_type", c.emb_type},
                {"emb_x", c.emb_x},
                {"emb_y", c.emb_y},
                {"emb_realization", c.emb_realization},
                {"emb_joint", c.emb_joint},
                {"geology", c.geology},
                {"encoding", to_string(c.encoding)},
                {"attention", to_string(c.attention)},
                {"output_dim", c.output_dim},
                {"horizon", c.horizon},
                {"sequence_length", c.sequence_length},
                {"nx", c.nx},
                {"ny", c.ny},
                {"realizations", c.realizations},
                {"seed", c.seed},
                {"init_scale", c.init_scale}};
}

ModelConfig model_config_from_json(const Json& j) {
    require_keys(j,
                 {"preset", "hidden", "layers", "emb_type", "emb_x", "emb_y", "emb_realization",
                  "emb_joint", "geology", "encoding", "attention", "output_dim", "horizon",
                  "sequence_length", "nx", "ny", "realizations", "seed", "init_scale"},
                 "model");
    ModelConfig c;
    if (auto it = j.find("preset"); it != j.end()) c = ModelConfig::preset(it->get<std::string>());
    read_optional(j, "hidden", c.hidden, "model");
    read_optional(j, "layers", c.layers, "model");
    read_optional(j, "emb_type", c.emb_type, "model");
    read_optional(j, "emb_x", c.emb_x, "model");
    read_optional(j, "emb_y", c.emb_y, "model");
    read_optional(j, "emb_realization", c.emb_realization, "model");
    read_optional(j, "emb_joint", c.emb_joint, "model");
    read_optional(j, "geology", c.geology, "model");
    if (auto it = j.find("encoding"); it != j.end()) c.encoding = parse_encoding(it->get<std::string>());
    if (auto it = j.find("attention"); it != j.end())
        c.attention = parse_attention(it->get<std::string>());
    read_optional(j, "output_dim", c.output_dim, "model");
    read_optional(j, "horizon", c.horizon, "model");
    read_optional(j, "sequence_length", c.sequence_length, "model");
    read_optional(j, "nx", c.nx, "model");
    read_optional(j, "ny", c.ny, "model");
    read_optional(j, "realizations", c.realizations, "model");
    read_optional(j, "seed", c.seed, "model");
    read_optional(j, "init_scale", c.init_scale, "model");
    c.validate();
    return c;
}

}  // namespace resproxy::proxy
