#pragma once

#include "resproxy/common/json_util.hpp"
#include "resproxy/scenario/sampler.hpp"
#include "resproxy/sim/grid.hpp"
#include "resproxy/sim/realization.hpp"
#include "resproxy/sim/simulator.hpp"

namespace resproxy::sim {

Json to_json(const GridSpec& grid);
Json to_json(const GeoParams& geo);
Json to_json(const SimulatorConfig& config);

/// Missing keys keep the values already in `out`; unknown keys are rejected.
void from_json(const Json& j, GridSpec& out);
void from_json(const Json& j, GeoParams& out);
void from_json(const Json& j, SimulatorConfig& out);

}  // namespace resproxy::sim

namespace resproxy::scenario {

Json to_json(const SamplingPolicy& policy);
void from_json(const Json& j, SamplingPolicy& out);

}  // namespace resproxy::scenario
