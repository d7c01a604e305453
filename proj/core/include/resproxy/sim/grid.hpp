#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace resproxy::sim {

/// Cartesian corner-free grid with per-axis cell widths.
///
/// Cells are indexed x-fastest: index = x + nx * (y + ny * z). Layer z = 0 is the top.
/// Widths may vary along an axis, which is how coarse grids with partial remainder
/// columns are represented.
struct GridSpec {
    int nx = 1;
    int ny = 1;
    int nz = 1;
    std::vector<double> dx;  // metres, size nx
    std::vector<double> dy;  // metres, size ny
    std::vector<double> dz;  // metres, size nz
    double dt_days = 30.0;
    int horizon = 20;

    static GridSpec uniform(int nx, int ny, int nz, double dx, double dy, double dz,
                            double dt_days = 30.0, int horizon = 20);

    /// "spe9-full" (24x25x15, T=20) or "desk" (12x12x6, T=12).
    static GridSpec preset(std::string_view name);

    [[nodiscard]] int cells() const noexcept { return nx * ny * nz; }
    [[nodiscard]] int index(int x, int y, int z) const noexcept { return x + nx * (y + ny * z); }
    [[nodiscard]] double cell_volume(int x, int y, int z) const { return dx[x] * dy[y] * dz[z]; }
    [[nodiscard]] double cell_volume(int cell) const;
    [[nodiscard]] bool contains(int x, int y) const noexcept {
        return x >= 0 && x < nx && y >= 0 && y < ny;
    }

    /// Throws ConfigError when an invariant is broken.
    void validate() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

}  // namespace resproxy::sim
