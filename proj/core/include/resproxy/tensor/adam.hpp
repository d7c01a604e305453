#pragma once

#include "resproxy/tensor/tape.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace resproxy::tensor {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over every parameter of a store.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void set_lr(double lr) noexcept { config_.lr = lr; }
    [[nodiscard]] const AdamConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::int64_t steps() const noexcept { return t_; }

    void step(ParameterStore<T>& store) {
        if (m_.empty()) {
            for (std::size_t i = 0; i < store.size(); ++i) {
                m_.emplace_back(store[i].value.size(), 0.0);
                v_.emplace_back(store[i].value.size(), 0.0);
            }
        }
        if (m_.size() != store.size()) throw ContractError("Adam state does not match parameters");
        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < store.size(); ++i) {
            auto& p = store[i];
            auto& m = m_[i];
            auto& v = v_[i];
            if (m.size() != p.value.size()) throw ContractError("Adam state shape mismatch for " + p.name);
            for (std::size_t k = 0; k < m.size(); ++k) {
                const double g = static_cast<double>(p.grad[k]);
                m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
                v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
                const double mh = m[k] / c1;
                const double vh = v[k] / c2;
                p.value[k] -= static_cast<T>(config_.lr * mh / (std::sqrt(vh) + config_.eps));
            }
        }
    }

private:
    AdamConfig config_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace resproxy::tensor
