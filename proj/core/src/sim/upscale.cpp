#include "resproxy/sim/upscale.hpp"

#include "resproxy/common/errors.hpp"

namespace resproxy::sim {

namespace {

std::vector<double> merge_widths(const std::vector<double>& fine, int factor) {
    std::vector<double> out;
    for (std::size_t i = 0; i < fine.size(); i += static_cast<std::size_t>(factor)) {
        double w = 0.0;
        for (std::size_t k = i; k < std::min(fine.size(), i + static_cast<std::size_t>(factor)); ++k)
            w += fine[k];
        out.push_back(w);
    }
    return out;
}

}  // namespace

CoarseModel upscale(const Realization& fine, const GridSpec& grid, int factor) {
    if (factor != 2 && factor != 3) throw ContractError("upscaling factor must be 2 or 3");
    grid.validate();
    if (fine.cells() != static_cast<std::size_t>(grid.cells()))
        throw ContractError("realization does not match grid");

    CoarseModel out;
    out.factor = factor;
    GridSpec& cg = out.grid;
    cg.nx = (grid.nx + factor - 1) / factor;
    cg.ny = (grid.ny + factor - 1) / factor;
    cg.nz = grid.nz;
    cg.dx = merge_widths(grid.dx, factor);
    cg.dy = merge_widths(grid.dy, factor);
    cg.dz = grid.dz;
    cg.dt_days = grid.dt_days;
    cg.horizon = grid.horizon;

    const auto n = static_cast<std::size_t>(cg.cells());
    std::vector<double> bulk(n, 0.0), pore(n, 0.0), kh(n, 0.0), kv(n, 0.0), shale_pv(n, 0.0);
    for (int z = 0; z < grid.nz; ++z)
        for (int y = 0; y < grid.ny; ++y)
            for (int x = 0; x < grid.nx; ++x) {
                const auto f = static_cast<std::size_t>(grid.index(x, y, z));
                const auto c = static_cast<std::size_t>(cg.index(x / factor, y / factor, z));
                const double v = grid.cell_volume(x, y, z);
                const double pv = v * fine.porosity[f];
                bulk[c] += v;
                pore[c] += pv;
                kh[c] += pv * fine.perm_h[f];
                kv[c] += pv * fine.perm_v[f];
                if (fine.rock_type[f] == RockType::shale) shale_pv[c] += pv;
            }

    Realization& r = out.realization;
    r.id = fine.id;
    r.seed = fine.seed;
    r.porosity.resize(n);
    r.perm_h.resize(n);
    r.perm_v.resize(n);
    r.rock_type.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        r.porosity[c] = pore[c] / bulk[c];
        r.perm_h[c] = kh[c] / pore[c];
        r.perm_v[c] = kv[c] / pore[c];
        r.rock_type[c] = shale_pv[c] > 0.5 * pore[c] ? RockType::shale : RockType::sand;
    }
    return out;
}

scenario::ActionSequence coarsen_actions(const scenario::ActionSequence& actions, int factor) {
    if (factor < 1) throw ContractError("upscaling factor must be >= 1");
    auto out = actions;
    for (auto& a : out)
        if (a.drills()) {
            a.x /= factor;
            a.y /= factor;
        }
    return out;
}

}  // namespace resproxy::sim
