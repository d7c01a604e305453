#include "resproxy/sim/grid.hpp"

#include "resproxy/common/errors.hpp"

namespace resproxy::sim {

GridSpec GridSpec::uniform(int nx, int ny, int nz, double dx, double dy, double dz,
                           double dt_days, int horizon) {
    GridSpec g;
    g.nx = nx;
    g.ny = ny;
    g.nz = nz;
    g.dx.assign(static_cast<std::size_t>(nx > 0 ? nx : 0), dx);
    g.dy.assign(static_cast<std::size_t>(ny > 0 ? ny : 0), dy);
    g.dz.assign(static_cast<std::size_t>(nz > 0 ? nz : 0), dz);
    g.dt_days = dt_days;
    g.horizon = horizon;
    g.validate();
    return g;
}

GridSpec GridSpec::preset(std::string_view name) {
    if (name == "spe9-full") return uniform(24, 25, 15, 90.0, 90.0, 6.0, 30.0, 20);
    if (name == "desk") return uniform(12, 12, 6, 50.0, 50.0, 4.0, 30.0, 12);
    throw ConfigError("unknown grid preset '" + std::string(name) + "'");
}

double GridSpec::cell_volume(int cell) const {
    const int x = cell % nx;
    const int y = (cell / nx) % ny;
    const int z = cell / (nx * ny);
    return cell_volume(x, y, z);
}

void GridSpec::validate() const {
    if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("grid dimensions must be >= 1");
    if (dx.size() != static_cast<std::size_t>(nx) || dy.size() != static_cast<std::size_t>(ny) ||
        dz.size() != static_cast<std::size_t>(nz))
        throw ConfigError("grid width arrays do not match dimensions");
    for (const auto* widths : {&dx, &dy, &dz})
        for (double w : *widths)
            if (!(w > 0.0)) throw ConfigError("grid cell widths must be positive");
    if (!(dt_days > 0.0)) throw ConfigError("time step length must be positive");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
}

}  // namespace resproxy::sim
