#include "resproxy/tensor/tensor.hpp"

#include <algorithm>

namespace resproxy::tensor {

namespace {

template <typename T>
inline void axpy_row(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

}  // namespace

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, T(0));
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const T* a0 = a + i * k;
        const T* a1 = a0 + k;
        const T* a2 = a1 + k;
        const T* a3 = a2 + k;
        T* __restrict c0 = c + i * n;
        T* __restrict c1 = c0 + n;
        T* __restrict c2 = c1 + n;
        T* __restrict c3 = c2 + n;
        for (std::size_t p = 0; p < k; ++p) {
            const T* __restrict brow = b + p * n;
            const T s0 = a0[p], s1 = a1[p], s2 = a2[p], s3 = a3[p];
            for (std::size_t j = 0; j < n; ++j) {
                const T bj = brow[j];
                c0[j] += s0 * bj;
                c1[j] += s1 * bj;
                c2[j] += s2 * bj;
                c3[j] += s3 * bj;
            }
        }
    }
    for (; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) axpy_row(arow[p], b + p * n, crow, n);
    }
}

template <typename T>
void transpose(const T* in, T* out, std::size_t rows, std::size_t cols) {
    constexpr std::size_t kBlock = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += kBlock)
        for (std::size_t c0 = 0; c0 < cols; c0 += kBlock)
            for (std::size_t r = r0; r < std::min(rows, r0 + kBlock); ++r)
                for (std::size_t c = c0; c < std::min(cols, c0 + kBlock); ++c)
                    out[c * rows + r] = in[r * cols + c];
}

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t,
                          std::size_t, bool);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t,
                           std::size_t, bool);
template void transpose<float>(const float*, float*, std::size_t, std::size_t);
template void transpose<double>(const double*, double*, std::size_t, std::size_t);

}  // namespace resproxy::tensor
