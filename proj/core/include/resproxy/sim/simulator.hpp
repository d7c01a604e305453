#pragma once

#include "resproxy/scenario/action.hpp"
#include "resproxy/scenario/record.hpp"
#include "resproxy/sim/grid.hpp"
#include "resproxy/sim/realization.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace resproxy::sim {

inline constexpr const char* kSimulatorVersion = "resflow-2p/1.0";

/// Slightly compressible oil/water with Corey relative permeabilities.
struct FluidProps {
    double viscosity_water_cp = 0.5;
    double viscosity_oil_cp = 2.0;
    double compress_water_per_bar = 4.5e-5;
    double compress_oil_per_bar = 5.0e-4;
    double compress_rock_per_bar = 5.0e-5;
    double reference_pressure_bar = 250.0;
    double residual_water = 0.2;
    double residual_oil = 0.2;
    double corey_water = 2.0;
    double corey_oil = 2.0;
    double krw_max = 1.0;
    double kro_max = 1.0;

    friend bool operator==(const FluidProps&, const FluidProps&) = default;
};

struct WellDefaults {
    double producer_bhp_bar = 150.0;
    double injector_rate = 150.0;       // m^3/day at surface conditions
    double wellbore_radius_m = 0.1;
    double skin = 0.0;
    int completion_depth = 5;           // producers: top layers, injectors: bottom layers

    friend bool operator==(const WellDefaults&, const WellDefaults&) = default;
};

struct SimulatorConfig {
    double newton_tol = 1e-6;      // max cell residual, in pore-volume fractions
    double mb_tol = 1e-11;         // field material balance, relative to fluid in place
    int newton_max_iter = 25;
    int max_dt_chops = 6;
    double max_sat_change = 0.2;   // per Newton update
    double max_pressure_change_bar = 100.0;
    scenario::ControlMode control_mode = scenario::ControlMode::fixed;
    std::vector<double> control_candidates{0.5, 1.0, 1.5};
    /// Operating cost of the control multiplier in oil-rate units (m^3/day per unit).
    double control_cost = 140.0;
    bool gravity = false;
    double initial_pressure_bar = 250.0;
    double initial_sat_w = 0.2;
    FluidProps fluid;
    WellDefaults wells;

    void validate() const;
    friend bool operator==(const SimulatorConfig&, const SimulatorConfig&) = default;
};

enum class WellKind { producer, injector };

struct WellSpec {
    WellKind kind = WellKind::producer;
    int x = 0;
    int y = 0;
    std::vector<int> completion_layers;
    double control = 0.0;  // producer: BHP (bar); injector: water rate (m^3/day)
    int open_step = 0;
};

/// Well for a drilling action using the configured default controls.
WellSpec make_well(const scenario::Action& action, const GridSpec& grid,
                   const WellDefaults& defaults, int open_step);

/// Layers completed by a well of the given kind (top for producers, bottom for injectors).
std::vector<int> completion_layers(WellKind kind, const GridSpec& grid, int depth);

struct ReservoirState {
    std::vector<double> pressure;  // bar
    std::vector<double> sat_w;
    int step = 0;

    friend bool operator==(const ReservoirState&, const ReservoirState&) = default;
};

/// Surface rates of one well over a step (m^3/day). For producers both phases are
/// produced volumes; for injectors `water` is the injected volume.
struct WellFlow {
    double oil = 0.0;
    double water = 0.0;
};

struct RateVector {
    double fopr = 0.0;
    double fwpr = 0.0;
    double fwir = 0.0;
    std::vector<double> well_opr;  // kWellSlots entries, producers in drilling order
};

struct StepResult {
    ReservoirState state;
    std::vector<WellFlow> flows;  // aligned with the input well list
    RateVector rates;
    int newton_iterations = 0;
    int substeps = 1;
    double residual = 0.0;
};

/// Surface volumes of each phase in place (m^3).
struct PhaseVolumes {
    double oil = 0.0;
    double water = 0.0;
};

/// Fully implicit two-phase finite-volume solver bound to one realization.
///
/// Not thread-safe: each instance caches the sparse factorisation pattern. Independent
/// instances share nothing and may run concurrently.
class Simulator {
public:
    Simulator(const Realization& realization, const GridSpec& grid, SimulatorConfig config);
    ~Simulator();
    Simulator(Simulator&&) noexcept;
    Simulator& operator=(Simulator&&) noexcept;

    [[nodiscard]] ReservoirState initial_state() const;

    /// Advances one time step of grid.dt_days. Producers' drawdown and injectors' rates are
    /// scaled by `control_multiplier` relative to the initial pressure and the nominal rate.
    StepResult step(const ReservoirState& state, std::span<const WellSpec> wells,
                    double control_multiplier = 1.0);

    [[nodiscard]] PhaseVolumes in_place(const ReservoirState& state) const;
    [[nodiscard]] const GridSpec& grid() const noexcept;
    [[nodiscard]] const SimulatorConfig& config() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

StepResult solve_timestep(const ReservoirState& state, std::span<const WellSpec> wells,
                          const Realization& realization, const GridSpec& grid,
                          const SimulatorConfig& config);

/// Chosen joint control multiplier and the step it was chosen on.
struct ControlChoice {
    double multiplier = 1.0;
    int solves = 0;
    std::optional<StepResult> chosen_step;
};

/// Greedy control selection on one step: the candidate maximising field oil rate minus
/// control_cost * multiplier. Ties go to 1.0. Without active producers nothing is solved.
ControlChoice optimize_well_controls(Simulator& simulator, const ReservoirState& state,
                                     std::span<const WellSpec> wells,
                                     std::span<const double> candidates);

/// Applies action t at the start of step t and records `horizon` rate vectors
/// (3 field rates + kWellSlots producer oil rates).
scenario::SimulationRecord run_simulation(const Realization& realization,
                                          const scenario::ActionSequence& actions,
                                          const GridSpec& grid, const SimulatorConfig& config,
                                          int horizon);

/// Same as run_simulation but with an explicit well list (used by the upscaling baseline).
scenario::SimulationRecord run_wells(const Realization& realization,
                                     const std::vector<WellSpec>& wells,
                                     const std::vector<int>& producer_slot,
                                     const GridSpec& grid, const SimulatorConfig& config,
                                     int horizon);

}  // namespace resproxy::sim
