#pragma once

#include "resproxy/tensor/tensor.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace resproxy::tensor {

/// Named trainable array with its gradient accumulator.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
};

/// Owns parameters across tapes. Registration order is the iteration (and file) order.
template <typename T>
class ParameterStore {
public:
    Parameter<T>& add(std::string name, std::size_t rows, std::size_t cols);
    Parameter<T>& get(std::string_view name);
    [[nodiscard]] const Parameter<T>& get(std::string_view name) const;
    [[nodiscard]] bool contains(std::string_view name) const;

    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
    Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

    /// Total number of scalars.
    [[nodiscard]] std::size_t scalar_count() const noexcept;
    void zero_grad();

private:
    std::vector<std::unique_ptr<Parameter<T>>> params_;
};

/// Handle to a tape node.
struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
    [[nodiscard]] bool valid() const noexcept { return id != std::numeric_limits<std::size_t>::max(); }
};

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so walking them
/// backwards is a reverse topological order. Single owner; not thread-safe.
template <typename T>
class Tape {
public:
    /// Leaf bound to a parameter: reads its value in place, accumulates into its grad.
    Var param(Parameter<T>& p);
    Var constant(Tensor<T> value);

    [[nodiscard]] const Tensor<T>& value(Var v) const;
    /// Gradient of the last backward() target w.r.t. v (zero-sized if never reached).
    [[nodiscard]] const Tensor<T>& grad(Var v) const;

    Var matmul(Var a, Var b);
    /// b has a's shape, or is 1 x cols (row broadcast), or rows x 1 (column broadcast).
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    /// Element-wise; either operand may instead be rows x 1 and scale the other's rows.
    Var mul(Var a, Var b);
    Var scale(Var a, T s);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var concat(std::span<const Var> parts, int axis);
    Var slice(Var a, int axis, std::size_t begin, std::size_t end);
    Var softmax(Var a, int axis);
    /// Rows of `table` selected by ids: output ids.size() x table.cols.
    Var embedding(Var table, std::span<const std::size_t> ids);
    /// Mean of squared differences over all elements; 1 x 1.
    Var mse_loss(Var pred, Var target);

    void backward(Var loss);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    using Backward = std::function<void(Tape&, std::size_t)>;
    struct Node {
        Tensor<T> own;
        const Tensor<T>* ref = nullptr;  // parameter value
        Tensor<T> grad;
        Parameter<T>* param = nullptr;
        bool requires_grad = false;
        const char* op = "";
        Backward back;
    };

    const Tensor<T>& val(std::size_t i) const {
        return nodes_[i].ref ? *nodes_[i].ref : nodes_[i].own;
    }
    Tensor<T>& grad_ref(std::size_t i);
    bool needs(Var v) const { return nodes_[check(v)].requires_grad; }
    std::size_t check(Var v) const;
    Var push(const char* op, Tensor<T> value, bool requires_grad, Backward back);

    std::vector<Node> nodes_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace resproxy::tensor
