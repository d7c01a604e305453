#include "resproxy/proxy/model.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/common/random.hpp"

#include <string>

namespace resproxy::proxy {

using tensor::Tensor;
using tensor::Var;

template <typename T>
Seq2Seq<T>::Seq2Seq(const ModelConfig& config) : config_(config) {
    config_.validate();
    const auto H = static_cast<std::size_t>(config_.hidden);
    const auto D = static_cast<std::size_t>(config_.output_dim);
    const auto M = static_cast<std::size_t>(config_.memory_dim());
    const auto nx = static_cast<std::size_t>(config_.nx);
    const auto ny = static_cast<std::size_t>(config_.ny);

    if (config_.encoding == Encoding::factored) {
        emb_type_ = &params_.add("emb.type", 3, static_cast<std::size_t>(config_.emb_type));
        emb_x_ = &params_.add("emb.x", nx + 1, static_cast<std::size_t>(config_.emb_x));
        emb_y_ = &params_.add("emb.y", ny + 1, static_cast<std::size_t>(config_.emb_y));
    }
    emb_real_ = &params_.add("emb.real", static_cast<std::size_t>(config_.realizations),
                             static_cast<std::size_t>(config_.emb_realization));
    if (config_.encoding == Encoding::joint)
        emb_joint_ = &params_.add("emb.joint", 2 * nx * ny + 1,
                                  static_cast<std::size_t>(config_.emb_joint));

    std::size_t in = static_cast<std::size_t>(config_.input_dim());
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "enc.l" + std::to_string(l);
        enc_.push_back({&params_.add(p + ".W", in + H, 4 * H), &params_.add(p + ".b", 1, 4 * H)});
        in = H;
    }
    dec_in_ = {&params_.add("dec.in.W", D + M, H), &params_.add("dec.in.b", 1, H)};
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "dec.l" + std::to_string(l);
        dec_.push_back({&params_.add(p + ".W", 2 * H, 4 * H), &params_.add(p + ".b", 1, 4 * H)});
    }
    if (M > 0) {
        att_ws_ = &params_.add("att.Ws", H, H);
        att_wm_ = &params_.add("att.Wm", M, H);
        att_v_ = &params_.add("att.v", H, 1);
    }
    out_ = {&params_.add("out.W", H + M, D), &params_.add("out.b", 1, D)};
    initialize();
}

template <typename T>
void Seq2Seq<T>::initialize() {
    Rng rng(derive_seed({config_.seed, 0x494e4954}));
    const double s = config_.init_scale;
    const auto H = static_cast<std::size_t>(config_.hidden);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        const bool bias = p.name.size() >= 2 && p.name.ends_with(".b");
        for (auto& v : p.value.values())
            v = bias ? T(0) : static_cast<T>((2.0 * rng.uniform() - 1.0) * s);
        // Forget gate bias +1 for LSTM layers.
        if (bias && p.value.cols() == 4 * H && (p.name.starts_with("enc.l") || p.name.starts_with("dec.l")))
            for (std::size_t c = H; c < 2 * H; ++c) p.value(0, c) = T(1);
        p.grad.fill(T(0));
    }
}

template <typename T>
Var Seq2Seq<T>::affine(tensor::Tape<T>& tape, Var x, const Affine& layer) {
    return tape.add(tape.matmul(x, tape.param(*layer.W)), tape.param(*layer.b));
}

template <typename T>
typename Seq2Seq<T>::Cell Seq2Seq<T>::lstm(tensor::Tape<T>& tape, Var x, Var h, Var c,
                                           const Affine& layer) {
    const Var xh[] = {x, h};
    const Var gates = affine(tape, tape.concat(xh, 1), layer);
    const auto H = static_cast<std::size_t>(config_.hidden);
    const Var i = tape.sigmoid(tape.slice(gates, 1, 0, H));
    const Var f = tape.sigmoid(tape.slice(gates, 1, H, 2 * H));
    const Var g = tape.tanh(tape.slice(gates, 1, 2 * H, 3 * H));
    const Var o = tape.sigmoid(tape.slice(gates, 1, 3 * H, 4 * H));
    const Var c2 = tape.add(tape.mul(f, c), tape.mul(i, g));
    return {tape.mul(o, tape.tanh(c2)), c2};
}

template <typename T>
Var Seq2Seq<T>::embed(tensor::Tape<T>& tape, const EncodedBatch<T>& batch, std::size_t k,
                      Var realization) {
    if (config_.encoding == Encoding::joint) {
        const Var parts[] = {tape.embedding(tape.param(*emb_joint_), batch.joint[k]), realization};
        return tape.concat(parts, 1);
    }
    std::vector<Var> parts{tape.embedding(tape.param(*emb_type_), batch.type[k]),
                           tape.embedding(tape.param(*emb_x_), batch.x[k]),
                           tape.embedding(tape.param(*emb_y_), batch.y[k]), realization};
    if (config_.geology) parts.push_back(tape.constant(batch.geology[k]));
    return tape.concat(parts, 1);
}

template <typename T>
void Seq2Seq<T>::check_batch(const EncodedBatch<T>& batch) const {
    if (batch.batch == 0 || batch.length == 0) throw ContractError("empty encoded batch");
    if (config_.encoding == Encoding::factored && config_.geology &&
        batch.geology.size() != batch.length)
        throw ContractError("encoded batch lacks geology features");
}

template <typename T>
typename Seq2Seq<T>::Encoded Seq2Seq<T>::encode(tensor::Tape<T>& tape,
                                                const EncodedBatch<T>& batch) {
    check_batch(batch);
    const auto B = batch.batch;
    const auto H = static_cast<std::size_t>(config_.hidden);
    const auto L = static_cast<std::size_t>(config_.layers);
    Encoded e;
    const Var zero = tape.constant(Tensor<T>(B, H));
    e.h.assign(L, zero);
    e.c.assign(L, zero);
    const Var real = tape.embedding(tape.param(*emb_real_), batch.realization);
    for (std::size_t k = 0; k < batch.length; ++k) {
        Var x = embed(tape, batch, k, real);
        for (std::size_t l = 0; l < L; ++l) {
            const Cell cell = lstm(tape, x, e.h[l], e.c[l], enc_[l]);
            e.h[l] = cell.h;
            e.c[l] = cell.c;
            x = cell.h;
        }
        switch (config_.attention) {
            case AttentionKind::none: break;
            case AttentionKind::top_layer: e.memory.push_back(e.h.back()); break;
            case AttentionKind::all_layers: e.memory.push_back(L == 1 ? e.h[0] : tape.concat(e.h, 1)); break;
        }
    }
    return e;
}

template <typename T>
std::pair<Var, Var> Seq2Seq<T>::attend(tensor::Tape<T>& tape, Var s,
                                       const std::vector<Var>& memory,
                                       const std::vector<Var>& memory_proj) {
    if (memory.empty() || memory.size() != memory_proj.size())
        throw ContractError("attention needs a nonempty memory");
    const Var sp = tape.matmul(s, tape.param(*att_ws_));
    const Var v = tape.param(*att_v_);
    std::vector<Var> scores;
    scores.reserve(memory.size());
    for (const Var mp : memory_proj) scores.push_back(tape.matmul(tape.tanh(tape.add(sp, mp)), v));
    const Var alpha = tape.softmax(scores.size() == 1 ? scores[0] : tape.concat(scores, 1), 1);
    Var ctx = tape.mul(tape.slice(alpha, 1, 0, 1), memory[0]);
    for (std::size_t k = 1; k < memory.size(); ++k)
        ctx = tape.add(ctx, tape.mul(tape.slice(alpha, 1, k, k + 1), memory[k]));
    return {ctx, alpha};
}

template <typename T>
typename Seq2Seq<T>::Output Seq2Seq<T>::forward(tensor::Tape<T>& tape,
                                                const EncodedBatch<T>& batch, DecodeMode mode,
                                                int horizon,
                                                const std::vector<Tensor<T>>* truth) {
    if (horizon < 1) throw ContractError("output horizon must be >= 1");
    const int needed = mode.truth_steps(horizon);
    const auto B = batch.batch;
    const auto D = static_cast<std::size_t>(config_.output_dim);
    if (needed > 0) {
        if (!truth || truth->size() < static_cast<std::size_t>(needed))
            throw ContractError("decode mode " + mode.label() + " needs ground truth for " +
                                std::to_string(needed) + " steps");
        for (int t = 0; t < needed; ++t)
            if ((*truth)[static_cast<std::size_t>(t)].rows() != B ||
                (*truth)[static_cast<std::size_t>(t)].cols() != D)
                throw ContractError("ground truth step has shape " +
                                    (*truth)[static_cast<std::size_t>(t)].shape_string());
    }

    Encoded enc = encode(tape, batch);
    const bool use_att = config_.attention != AttentionKind::none;
    std::vector<Var> memory_proj;
    if (use_att) {
        const Var wm = tape.param(*att_wm_);
        for (const Var m : enc.memory) memory_proj.push_back(tape.matmul(m, wm));
    }

    Output out;
    std::vector<Var> h = enc.h, c = enc.c;
    Var prev = tape.constant(Tensor<T>(B, D));
    for (int t = 0; t < horizon; ++t) {
        if (mode.feeds_truth(t)) prev = tape.constant((*truth)[static_cast<std::size_t>(t - 1)]);
        Var ctx;
        Var x;
        if (use_att) {
            const auto [context, alpha] = attend(tape, h.back(), enc.memory, memory_proj);
            ctx = context;
            out.masks.push_back(tape.value(alpha));
            const Var in[] = {prev, ctx};
            x = affine(tape, tape.concat(in, 1), dec_in_);
        } else {
            x = affine(tape, prev, dec_in_);
        }
        for (std::size_t l = 0; l < h.size(); ++l) {
            const Cell cell = lstm(tape, x, h[l], c[l], dec_[l]);
            h[l] = cell.h;
            c[l] = cell.c;
            x = cell.h;
        }
        Var y;
        if (use_att) {
            const Var o[] = {h.back(), ctx};
            y = affine(tape, tape.concat(o, 1), out_);
        } else {
            y = affine(tape, h.back(), out_);
        }
        out.steps.push_back(y);
        prev = y;
    }
    return out;
}

template class Seq2Seq<float>;
template class Seq2Seq<double>;

}  // namespace resproxy::proxy
