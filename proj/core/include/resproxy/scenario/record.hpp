#pragma once

#include "resproxy/common/matrix.hpp"
#include "resproxy/scenario/action.hpp"

#include <cstdint>
#include <string>

namespace resproxy::scenario {

enum class ControlMode { fixed, optimized };

const char* to_string(ControlMode mode) noexcept;
ControlMode parse_control_mode(const std::string& text);

/// Field rate columns followed by per-producer oil rates in drilling order.
inline constexpr std::size_t kFieldRates = 3;  // FOPR, FWPR, FWIR
inline constexpr std::size_t kWellSlots = 20;
inline constexpr std::size_t kRatesWithWells = kFieldRates + kWellSlots;

/// One simulator run: inputs plus the T x D rate table (m^3/day).
struct SimulationRecord {
    std::int64_t id = 0;
    int realization_id = 0;
    ActionSequence actions;
    Matrix rates;
    ControlMode control_mode = ControlMode::fixed;
    double control_multiplier = 1.0;
    std::uint64_t seed = 0;
    std::string simulator_version;

    [[nodiscard]] std::size_t horizon() const noexcept { return rates.rows(); }
    [[nodiscard]] std::size_t dims() const noexcept { return rates.cols(); }
};

}  // namespace resproxy::scenario
