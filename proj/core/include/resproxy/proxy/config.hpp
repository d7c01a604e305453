#pragma once

#include "resproxy/common/json_util.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace resproxy::proxy {

enum class Encoding { factored, joint };
enum class AttentionKind { none, top_layer, all_layers };

const char* to_string(Encoding e) noexcept;
const char* to_string(AttentionKind a) noexcept;
Encoding parse_encoding(std::string_view text);
AttentionKind parse_attention(std::string_view text);

/// Decoder feeding regime. hybrid(k) feeds ground truth y_{t-1} while t-1 < k and the
/// model's own prediction afterwards, so hybrid(0) is prop and hybrid(T) is gt.
struct DecodeMode {
    enum class Kind { gt, prop, hybrid };
    Kind kind = Kind::prop;
    int k = 0;

    static DecodeMode gt() { return {Kind::gt, 0}; }
    static DecodeMode prop() { return {Kind::prop, 0}; }
    static DecodeMode hybrid(int k) { return {Kind::hybrid, k}; }

    /// Whether step t (0-based) consumes the ground truth of step t-1.
    [[nodiscard]] bool feeds_truth(int t) const noexcept {
        if (t == 0) return false;
        switch (kind) {
            case Kind::gt: return true;
            case Kind::prop: return false;
            case Kind::hybrid: return t - 1 < k;
        }
        return false;
    }
    /// Number of leading ground-truth rows this mode reads.
    [[nodiscard]] int truth_steps(int horizon) const noexcept;
    [[nodiscard]] std::string label() const;

    friend bool operator==(const DecodeMode&, const DecodeMode&) = default;
};

/// "gt", "prop", "hybrid" (with k) or "hybrid:<k>".
DecodeMode parse_decode_mode(std::string_view text, int k = 0);

struct ModelConfig {
    int hidden = 64;
    int layers = 1;
    int emb_type = 3;
    int emb_x = 10;
    int emb_y = 10;
    int emb_realization = 20;
    int emb_joint = 23;
    bool geology = true;  // 20 standardized features per action (factored encoding only)
    Encoding encoding = Encoding::factored;
    AttentionKind attention = AttentionKind::all_layers;
    int output_dim = 3;   // D
    int horizon = 12;     // training T
    int sequence_length = 10;  // K
    int nx = 12;
    int ny = 12;
    int realizations = 100;
    std::uint64_t seed = 1;  // initialization
    double init_scale = 0.08;

    /// "64x1", "128x5" or "1024x2"; other fields keep their values.
    static ModelConfig preset(std::string_view name);

    [[nodiscard]] int input_dim() const noexcept;
    [[nodiscard]] int memory_dim() const noexcept;
    [[nodiscard]] std::string preset_name() const;
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr int kGeologyCells = 5;
inline constexpr int kGeologyPerCell = 4;  // rock type, porosity, ln perm_h, ln perm_v
inline constexpr int kGeologyFeatures = kGeologyCells * kGeologyPerCell;

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

}  // namespace resproxy::proxy
