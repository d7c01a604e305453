#include "resproxy/tensor/tape.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace resproxy::tensor {

namespace {

std::string two_shapes(const char* op, const std::string& a, const std::string& b) {
    return std::string(op) + ": incompatible shapes " + a + " and " + b;
}

template <typename T>
T sigmoid_scalar(T x) {
    // Split by sign so exp never overflows.
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

// ---- ParameterStore

template <typename T>
Parameter<T>& ParameterStore<T>::add(std::string name, std::size_t rows, std::size_t cols) {
    if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
    auto p = std::make_unique<Parameter<T>>();
    p->name = std::move(name);
    p->value = Tensor<T>(rows, cols);
    p->grad = Tensor<T>(rows, cols);
    params_.push_back(std::move(p));
    return *params_.back();
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(std::string_view name) {
    for (auto& p : params_)
        if (p->name == name) return *p;
    throw ContractError("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(std::string_view name) const {
    for (const auto& p : params_)
        if (p->name == name) return *p;
    throw ContractError("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
bool ParameterStore<T>::contains(std::string_view name) const {
    return std::any_of(params_.begin(), params_.end(),
                       [&](const auto& p) { return p->name == name; });
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
    for (auto& p : params_) p->grad.fill(T(0));
}

// ---- Tape plumbing

template <typename T>
std::size_t Tape<T>::check(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
    return v.id;
}

template <typename T>
Tensor<T>& Tape<T>::grad_ref(std::size_t i) {
    auto& n = nodes_[i];
    if (n.param) return n.param->grad;
    if (n.grad.size() != val(i).size()) n.grad = Tensor<T>(val(i).rows(), val(i).cols());
    return n.grad;
}

template <typename T>
Var Tape<T>::push(const char* op, Tensor<T> value, bool requires_grad, Backward back) {
    for (const T v : value.values())
        if (!std::isfinite(v))
            throw NumericError(std::string("non-finite value produced by ") + op + " " +
                               value.shape_string());
    Node n;
    n.own = std::move(value);
    n.requires_grad = requires_grad;
    n.op = op;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
    Node n;
    n.ref = &p.value;
    n.param = &p;
    n.requires_grad = true;
    n.op = "param";
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
    return push("constant", std::move(value), false, {});
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
    return val(check(v));
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) const {
    const auto i = check(v);
    return nodes_[i].param ? nodes_[i].param->grad : nodes_[i].grad;
}

// ---- ops

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
    const auto ia = check(a), ib = check(b);
    const auto& A = val(ia);
    const auto& B = val(ib);
    if (A.cols() != B.rows())
        throw ContractError(two_shapes("matmul", A.shape_string(), B.shape_string()));
    Tensor<T> C(A.rows(), B.cols());
    gemm(A.data(), B.data(), C.data(), A.rows(), A.cols(), B.cols(), false);
    return push("matmul", std::move(C), needs(a) || needs(b), [ia, ib](Tape& t, std::size_t self) {
        const auto& A = t.val(ia);
        const auto& B = t.val(ib);
        const auto& dC = t.nodes_[self].grad;
        const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
        if (t.nodes_[ia].requires_grad) {
            std::vector<T> bt(n * k);
            transpose(B.data(), bt.data(), k, n);
            gemm(dC.data(), bt.data(), t.grad_ref(ia).data(), m, n, k, true);
        }
        if (t.nodes_[ib].requires_grad) {
            std::vector<T> at(k * m);
            transpose(A.data(), at.data(), m, k);
            gemm(at.data(), dC.data(), t.grad_ref(ib).data(), k, m, n, true);
        }
    });
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
    const auto ia = check(a), ib = check(b);
    const auto& A = val(ia);
    const auto& B = val(ib);
    const std::size_t m = A.rows(), n = A.cols();
    enum Mode { same, row, col };
    Mode mode;
    if (A.same_shape(B)) mode = same;
    else if (B.rows() == 1 && B.cols() == n) mode = row;
    else if (B.cols() == 1 && B.rows() == m) mode = col;
    else throw ContractError(two_shapes("add", A.shape_string(), B.shape_string()));
    Tensor<T> C = A;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            C(i, j) += mode == same ? B(i, j) : (mode == row ? B(0, j) : B(i, 0));
    return push("add", std::move(C), needs(a) || needs(b), [ia, ib, mode, m, n](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        if (t.nodes_[ia].requires_grad) {
            auto& dA = t.grad_ref(ia);
            for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i];
        }
        if (t.nodes_[ib].requires_grad) {
            auto& dB = t.grad_ref(ib);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (mode == same) dB(i, j) += dC(i, j);
                    else if (mode == row) dB(0, j) += dC(i, j);
                    else dB(i, 0) += dC(i, j);
                }
        }
    });
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
    const auto ia = check(a), ib = check(b);
    const auto& A = val(ia);
    const auto& B = val(ib);
    if (!A.same_shape(B)) throw ContractError(two_shapes("sub", A.shape_string(), B.shape_string()));
    Tensor<T> C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
    return push("sub", std::move(C), needs(a) || needs(b), [ia, ib](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        if (t.nodes_[ia].requires_grad) {
            auto& dA = t.grad_ref(ia);
            for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i];
        }
        if (t.nodes_[ib].requires_grad) {
            auto& dB = t.grad_ref(ib);
            for (std::size_t i = 0; i < dC.size(); ++i) dB[i] -= dC[i];
        }
    });
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
    auto ia = check(a), ib = check(b);
    if (val(ia).same_shape(val(ib))) {
        const auto& A = val(ia);
        const auto& B = val(ib);
        Tensor<T> C = A;
        for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
        return push("mul", std::move(C), needs(a) || needs(b), [ia, ib](Tape& t, std::size_t self) {
            const auto& dC = t.nodes_[self].grad;
            const auto& A = t.val(ia);
            const auto& B = t.val(ib);
            if (t.nodes_[ia].requires_grad) {
                auto& dA = t.grad_ref(ia);
                for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * B[i];
            }
            if (t.nodes_[ib].requires_grad) {
                auto& dB = t.grad_ref(ib);
                for (std::size_t i = 0; i < dC.size(); ++i) dB[i] += dC[i] * A[i];
            }
        });
    }
    // Column broadcast: s (m x 1) scales the rows of x (m x n).
    std::size_t is = ia, ix = ib;
    if (val(ib).cols() == 1 && val(ib).rows() == val(ia).rows()) std::swap(is, ix);
    const auto& S = val(is);
    const auto& X = val(ix);
    if (S.cols() != 1 || S.rows() != X.rows())
        throw ContractError(two_shapes("mul", val(ia).shape_string(), val(ib).shape_string()));
    const std::size_t m = X.rows(), n = X.cols();
    Tensor<T> C = X;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) C(i, j) *= S(i, 0);
    return push("mul", std::move(C), needs(a) || needs(b), [is, ix, m, n](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        const auto& S = t.val(is);
        const auto& X = t.val(ix);
        if (t.nodes_[is].requires_grad) {
            auto& dS = t.grad_ref(is);
            for (std::size_t i = 0; i < m; ++i) {
                T acc = T(0);
                for (std::size_t j = 0; j < n; ++j) acc += dC(i, j) * X(i, j);
                dS(i, 0) += acc;
            }
        }
        if (t.nodes_[ix].requires_grad) {
            auto& dX = t.grad_ref(ix);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) dX(i, j) += dC(i, j) * S(i, 0);
        }
    });
}

template <typename T>
Var Tape<T>::scale(Var a, T s) {
    const auto ia = check(a);
    Tensor<T> C = val(ia);
    for (auto& v : C.values()) v *= s;
    return push("scale", std::move(C), needs(a), [ia, s](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        auto& dA = t.grad_ref(ia);
        for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += s * dC[i];
    });
}

template <typename T>
Var Tape<T>::sigmoid(Var a) {
    const auto ia = check(a);
    Tensor<T> C = val(ia);
    for (auto& v : C.values()) v = sigmoid_scalar(v);
    return push("sigmoid", std::move(C), needs(a), [ia](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        const auto& Y = t.nodes_[self].own;
        auto& dA = t.grad_ref(ia);
        for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * Y[i] * (T(1) - Y[i]);
    });
}

template <typename T>
Var Tape<T>::tanh(Var a) {
    const auto ia = check(a);
    Tensor<T> C = val(ia);
    for (auto& v : C.values()) v = std::tanh(v);
    return push("tanh", std::move(C), needs(a), [ia](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        const auto& Y = t.nodes_[self].own;
        auto& dA = t.grad_ref(ia);
        for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * (T(1) - Y[i] * Y[i]);
    });
}

template <typename T>
Var Tape<T>::concat(std::span<const Var> parts, int axis) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    if (axis != 0 && axis != 1) throw ContractError("concat axis must be 0 or 1");
    std::vector<std::size_t> ids;
    bool rg = false;
    for (Var v : parts) {
        ids.push_back(check(v));
        rg = rg || nodes_[ids.back()].requires_grad;
    }
    const auto& first = val(ids[0]);
    std::size_t rows = 0, cols = 0;
    for (auto i : ids) {
        const auto& P = val(i);
        if (axis == 1) {
            if (P.rows() != first.rows())
                throw ContractError(two_shapes("concat", first.shape_string(), P.shape_string()));
            cols += P.cols();
        } else {
            if (P.cols() != first.cols())
                throw ContractError(two_shapes("concat", first.shape_string(), P.shape_string()));
            rows += P.rows();
        }
    }
    if (axis == 1) rows = first.rows();
    else cols = first.cols();
    Tensor<T> C(rows, cols);
    std::size_t offset = 0;
    for (auto i : ids) {
        const auto& P = val(i);
        for (std::size_t r = 0; r < P.rows(); ++r)
            for (std::size_t c = 0; c < P.cols(); ++c) {
                if (axis == 1) C(r, offset + c) = P(r, c);
                else C(offset + r, c) = P(r, c);
            }
        offset += axis == 1 ? P.cols() : P.rows();
    }
    return push("concat", std::move(C), rg, [ids, axis](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        std::size_t offset = 0;
        for (auto i : ids) {
            const auto rows = t.val(i).rows(), cols = t.val(i).cols();
            if (t.nodes_[i].requires_grad) {
                auto& dP = t.grad_ref(i);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c)
                        dP(r, c) += axis == 1 ? dC(r, offset + c) : dC(offset + r, c);
            }
            offset += axis == 1 ? cols : rows;
        }
    });
}

template <typename T>
Var Tape<T>::slice(Var a, int axis, std::size_t begin, std::size_t end) {
    const auto ia = check(a);
    const auto& A = val(ia);
    if (axis != 0 && axis != 1) throw ContractError("slice axis must be 0 or 1");
    const std::size_t len = axis == 0 ? A.rows() : A.cols();
    if (begin > end || end > len)
        throw ContractError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                            ") out of range for " + A.shape_string());
    const std::size_t rows = axis == 0 ? end - begin : A.rows();
    const std::size_t cols = axis == 1 ? end - begin : A.cols();
    Tensor<T> C(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            C(r, c) = axis == 0 ? A(begin + r, c) : A(r, begin + c);
    return push("slice", std::move(C), needs(a), [ia, axis, begin, rows, cols](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        auto& dA = t.grad_ref(ia);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                if (axis == 0) dA(begin + r, c) += dC(r, c);
                else dA(r, begin + c) += dC(r, c);
            }
    });
}

template <typename T>
Var Tape<T>::softmax(Var a, int axis) {
    const auto ia = check(a);
    const auto& A = val(ia);
    if (axis != 0 && axis != 1) throw ContractError("softmax axis must be 0 or 1");
    const std::size_t outer = axis == 1 ? A.rows() : A.cols();
    const std::size_t inner = axis == 1 ? A.cols() : A.rows();
    auto at = [axis](auto& M, std::size_t o, std::size_t k) -> decltype(auto) {
        return axis == 1 ? M(o, k) : M(k, o);
    };
    Tensor<T> C(A.rows(), A.cols());
    for (std::size_t o = 0; o < outer; ++o) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t k = 0; k < inner; ++k) mx = std::max(mx, at(A, o, k));
        T sum = T(0);
        for (std::size_t k = 0; k < inner; ++k) {
            const T e = std::exp(at(A, o, k) - mx);
            at(C, o, k) = e;
            sum += e;
        }
        for (std::size_t k = 0; k < inner; ++k) at(C, o, k) /= sum;
    }
    return push("softmax", std::move(C), needs(a), [ia, outer, inner, at](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        const auto& Y = t.nodes_[self].own;
        auto& dA = t.grad_ref(ia);
        for (std::size_t o = 0; o < outer; ++o) {
            T dot = T(0);
            for (std::size_t k = 0; k < inner; ++k) dot += at(dC, o, k) * at(Y, o, k);
            for (std::size_t k = 0; k < inner; ++k)
                at(dA, o, k) += at(Y, o, k) * (at(dC, o, k) - dot);
        }
    });
}

template <typename T>
Var Tape<T>::embedding(Var table, std::span<const std::size_t> ids) {
    const auto it = check(table);
    const auto& W = val(it);
    std::vector<std::size_t> rows(ids.begin(), ids.end());
    Tensor<T> C(rows.size(), W.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= W.rows())
            throw ContractError("embedding id " + std::to_string(rows[r]) +
                                " out of range for table " + W.shape_string());
        std::copy_n(W.data() + rows[r] * W.cols(), W.cols(), C.data() + r * W.cols());
    }
    return push("embedding", std::move(C), needs(table), [it, rows](Tape& t, std::size_t self) {
        const auto& dC = t.nodes_[self].grad;
        auto& dW = t.grad_ref(it);
        const std::size_t n = dC.cols();
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < n; ++c) dW(rows[r], c) += dC(r, c);
    });
}

template <typename T>
Var Tape<T>::mse_loss(Var pred, Var target) {
    const auto ip = check(pred), it = check(target);
    const auto& P = val(ip);
    const auto& Y = val(it);
    if (!P.same_shape(Y)) throw ContractError(two_shapes("mse_loss", P.shape_string(), Y.shape_string()));
    if (P.size() == 0) throw ContractError("mse_loss of empty tensors");
    T sum = T(0);
    for (std::size_t i = 0; i < P.size(); ++i) {
        const T d = P[i] - Y[i];
        sum += d * d;
    }
    Tensor<T> C(1, 1, sum / static_cast<T>(P.size()));
    return push("mse_loss", std::move(C), needs(pred) || needs(target), [ip, it](Tape& t, std::size_t self) {
        const T g = t.nodes_[self].grad[0];
        const auto& P = t.val(ip);
        const auto& Y = t.val(it);
        const T k = T(2) * g / static_cast<T>(P.size());
        if (t.nodes_[ip].requires_grad) {
            auto& dP = t.grad_ref(ip);
            for (std::size_t i = 0; i < P.size(); ++i) dP[i] += k * (P[i] - Y[i]);
        }
        if (t.nodes_[it].requires_grad) {
            auto& dY = t.grad_ref(it);
            for (std::size_t i = 0; i < P.size(); ++i) dY[i] -= k * (P[i] - Y[i]);
        }
    });
}

template <typename T>
void Tape<T>::backward(Var loss) {
    const auto il = check(loss);
    if (val(il).size() != 1)
        throw ContractError("backward needs a scalar loss, got " + val(il).shape_string());
    for (std::size_t i = 0; i <= il; ++i)
        if (!nodes_[i].param) nodes_[i].grad = Tensor<T>();
    if (!nodes_[il].requires_grad) return;
    grad_ref(il)[0] += T(1);
    for (std::size_t i = il + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.requires_grad || !n.back) continue;
        if (n.grad.size() == 0) continue;  // not on a path to the loss
        n.back(*this, i);
    }
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace resproxy::tensor
