#pragma once

#include "resproxy/common/matrix.hpp"
#include "resproxy/scenario/record.hpp"
#include "resproxy/sim/simulator.hpp"
#include "resproxy/sim/upscale.hpp"

#include <span>
#include <string_view>

namespace resproxy::baselines {

enum class FixedKind { mean, tsm };

const char* to_string(FixedKind k) noexcept;
FixedKind parse_fixed_kind(std::string_view text);

/// Input-independent predictor fitted on TRAIN.
struct FixedPredictor {
    FixedKind kind = FixedKind::mean;
    Matrix table;  // 1 x D grand mean, or T x D per-step mean

    /// T_out x D. TSM repeats its last row past the fitted horizon.
    [[nodiscard]] Matrix predict(int horizon) const;
    [[nodiscard]] int fitted_horizon() const noexcept { return static_cast<int>(table.rows()); }
};

/// Uses the first `horizon` steps and `dims` columns of every record (0 = all).
FixedPredictor fit_fixed(std::span<const scenario::SimulationRecord* const> train, FixedKind kind,
                         int dims = 0, int horizon = 0);

/// Simulates the plan on an upscaled model. Drilling locations map by integer division.
/// Injectors sharing a coarse cell add their rates; a producer landing in a cell that
/// already holds a producer is dropped (the first well's BHP control is kept) and its
/// well-rate slot stays zero.
scenario::SimulationRecord upscaled_predict(const sim::CoarseModel& coarse,
                                            const scenario::ActionSequence& actions,
                                            const sim::SimulatorConfig& config, int horizon);

scenario::SimulationRecord upscaled_predict(const sim::Realization& fine,
                                            const scenario::ActionSequence& actions, int factor,
                                            const sim::GridSpec& grid,
                                            const sim::SimulatorConfig& config, int horizon);

}  // namespace resproxy::baselines
