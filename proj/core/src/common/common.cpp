#include "resproxy/common/errors.hpp"
#include "resproxy/common/matrix.hpp"
#include "resproxy/common/random.hpp"

#include <cmath>
#include <numbers>

namespace resproxy {

const char* to_string(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::data: return "data";
        case ErrorCategory::solver: return "solver";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::contract: return "contract";
    }
    return "unknown";
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

Matrix Matrix::block(std::size_t rows, std::size_t col_begin, std::size_t col_end) const {
    if (rows > rows_ || col_begin > col_end || col_end > cols_)
        throw ContractError("block [" + std::to_string(rows) + ", " + std::to_string(col_begin) +
                            ":" + std::to_string(col_end) + ") outside a " + std::to_string(rows_) +
                            "x" + std::to_string(cols_) + " matrix");
    Matrix out(rows, col_end - col_begin);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = col_begin; c < col_end; ++c) out(r, c - col_begin) = (*this)(r, c);
    return out;
}

}  // namespace resproxy
