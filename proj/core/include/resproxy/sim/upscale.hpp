#pragma once

#include "resproxy/scenario/action.hpp"
#include "resproxy/sim/grid.hpp"
#include "resproxy/sim/realization.hpp"

namespace resproxy::sim {

struct CoarseModel {
    GridSpec grid;
    Realization realization;
    int factor = 1;
};

/// Merges f x f columns of cells (z untouched). Trailing columns that do not fill a whole
/// block form narrower coarse cells. Porosity is bulk-volume weighted, which keeps pore
/// volume exact; permeabilities are pore-volume weighted; rock type is a pore-volume
/// weighted majority vote with ties going to sand.
CoarseModel upscale(const Realization& fine, const GridSpec& grid, int factor);

/// Maps drilling locations onto the coarse surface grid (x / f, y / f).
scenario::ActionSequence coarsen_actions(const scenario::ActionSequence& actions, int factor);

}  // namespace resproxy::sim
