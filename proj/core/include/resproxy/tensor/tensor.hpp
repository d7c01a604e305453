#pragma once

#include "resproxy/common/errors.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace resproxy::tensor {

/// Row-major 2-D array. Batches are rows; vectors are 1 x n or n x 1.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<T> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows * cols)
            throw ContractError("tensor value count " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string());
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool same_shape(const Tensor& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }
    [[nodiscard]] std::string shape_string() const {
        return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
    }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    T* data() noexcept { return data_.data(); }
    [[nodiscard]] const T* data() const noexcept { return data_.data(); }
    std::vector<T>& values() noexcept { return data_; }
    [[nodiscard]] const std::vector<T>& values() const noexcept { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// C (m x n) (+)= A (m x k) * B (k x n), all row-major.
///
/// Every output row is computed from its own input row with the same operation order, so
/// a row's result does not depend on how many other rows are in the batch.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate);

/// out (cols x rows) = in^T.
template <typename T>
void transpose(const T* in, T* out, std::size_t rows, std::size_t cols);

}  // namespace resproxy::tensor
