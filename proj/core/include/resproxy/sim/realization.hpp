#pragma once

#include "resproxy/sim/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace resproxy::sim {

enum class RockType : std::uint8_t { sand = 0, shale = 1 };

/// Moments and correlation lengths of the synthetic geology.
struct GeoParams {
    int smoothing_radius = 2;       // moving-average half-width in cells (all three axes)
    double porosity_mean = 0.2;
    double porosity_std = 0.05;
    double ln_perm_mean = 3.0;      // ln(mD); exp(3) ~ 20 mD
    double ln_perm_std = 1.0;
    double porosity_perm_corr = 0.7;
    double shale_fraction = 0.15;
    double shale_multiplier = 0.01; // applied to both permeabilities
    double vertical_ratio = 0.1;    // perm_v / perm_h

    void validate() const;
    friend bool operator==(const GeoParams&, const GeoParams&) = default;
};

/// Per-cell rock properties of one geological sample.
struct Realization {
    int id = 0;
    std::uint64_t seed = 0;
    std::vector<double> porosity;
    std::vector<double> perm_h;  // mD
    std::vector<double> perm_v;  // mD
    std::vector<RockType> rock_type;

    [[nodiscard]] std::size_t cells() const noexcept { return porosity.size(); }

    friend bool operator==(const Realization&, const Realization&) = default;
};

/// Deterministic in (id, seed): smoothed Gaussian porosity, correlated log-normal
/// permeability and an independent smoothed indicator field for shale.
Realization generate_realization(int id, std::uint64_t seed, const GridSpec& grid,
                                 const GeoParams& params);

/// Realization with identical properties in every cell.
Realization uniform_realization(const GridSpec& grid, double porosity, double perm_h,
                                double perm_v);

/// Binary export for the planner view.
///
/// Layout, all little-endian:
///   char[8]  magic "RPXREAL1"
///   int32    nx, ny, nz
///   int32    id
///   uint64   seed
///   then four cell arrays in x-fastest order: float64 porosity, float64 perm_h,
///   float64 perm_v, uint8 rock_type (0 sand, 1 shale).
void write_realization(const std::string& path, const Realization& r, const GridSpec& grid);
Realization read_realization(const std::string& path, GridSpec* grid_dims = nullptr);

}  // namespace resproxy::sim
