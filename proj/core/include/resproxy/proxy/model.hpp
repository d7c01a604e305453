#pragma once

#include "resproxy/proxy/config.hpp"
#include "resproxy/proxy/features.hpp"
#include "resproxy/tensor/tape.hpp"

#include <vector>

namespace resproxy::proxy {

/// Embedding encoder, LSTM encoder/decoder stacks and additive attention.
///
/// Parameter names (registration order):
///   emb.type emb.x emb.y emb.real emb.joint, enc.l{i}.W enc.l{i}.b,
///   dec.in.W dec.in.b, dec.l{i}.W dec.l{i}.b, att.Ws att.Wm att.v, out.W out.b.
/// LSTM gate columns are ordered i, f, g, o. Attention parameters exist only when
/// attention is enabled; emb.type/x/y only for the factored encoding, emb.joint only for
/// the joint one.
template <typename T>
class Seq2Seq {
public:
    explicit Seq2Seq(const ModelConfig& config);

    /// Standardized per-step outputs (each B x D) and attention rows (each B x K; empty
    /// without attention).
    struct Output {
        std::vector<tensor::Var> steps;
        std::vector<tensor::Tensor<T>> masks;
    };

    /// `truth[t]` is the standardized B x D ground truth of step t; it must cover every
    /// step the mode feeds back (t < mode.truth_steps(horizon)).
    Output forward(tensor::Tape<T>& tape, const EncodedBatch<T>& batch, DecodeMode mode,
                   int horizon, const std::vector<tensor::Tensor<T>>* truth = nullptr);

    /// Encoder only: per-position memory (B x memory_dim) and final per-layer states.
    struct Encoded {
        std::vector<tensor::Var> memory;
        std::vector<tensor::Var> h, c;
    };
    Encoded encode(tensor::Tape<T>& tape, const EncodedBatch<T>& batch);

    /// Context (B x M) and mask row (B x K) for decoder state `s` (B x H).
    std::pair<tensor::Var, tensor::Var> attend(tensor::Tape<T>& tape, tensor::Var s,
                                               const std::vector<tensor::Var>& memory,
                                               const std::vector<tensor::Var>& memory_proj);

    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    tensor::ParameterStore<T>& params() noexcept { return params_; }
    [[nodiscard]] const tensor::ParameterStore<T>& params() const noexcept { return params_; }

    /// Re-draws all parameters from config.seed.
    void initialize();

private:
    struct Cell {
        tensor::Var h, c;
    };
    struct Affine {
        tensor::Parameter<T>* W = nullptr;
        tensor::Parameter<T>* b = nullptr;
    };
    Cell lstm(tensor::Tape<T>& tape, tensor::Var x, tensor::Var h, tensor::Var c,
              const Affine& layer);
    tensor::Var affine(tensor::Tape<T>& tape, tensor::Var x, const Affine& layer);
    tensor::Var embed(tensor::Tape<T>& tape, const EncodedBatch<T>& batch, std::size_t k,
                      tensor::Var realization);
    void check_batch(const EncodedBatch<T>& batch) const;

    ModelConfig config_;
    tensor::ParameterStore<T> params_;
    tensor::Parameter<T>* emb_type_ = nullptr;
    tensor::Parameter<T>* emb_x_ = nullptr;
    tensor::Parameter<T>* emb_y_ = nullptr;
    tensor::Parameter<T>* emb_real_ = nullptr;
    tensor::Parameter<T>* emb_joint_ = nullptr;
    std::vector<Affine> enc_;
    Affine dec_in_;
    std::vector<Affine> dec_;
    tensor::Parameter<T>* att_ws_ = nullptr;
    tensor::Parameter<T>* att_wm_ = nullptr;
    tensor::Parameter<T>* att_v_ = nullptr;
    Affine out_;
};

extern template class Seq2Seq<float>;
extern template class Seq2Seq<double>;

}  // namespace resproxy::proxy
