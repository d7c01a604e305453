#include "resproxy/sim/realization.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/common/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace resproxy::sim {

namespace {

constexpr std::uint64_t kPorosityStream = 1;
constexpr std::uint64_t kPermStream = 2;
constexpr std::uint64_t kShaleStream = 3;

/// Box-summed white noise rescaled to unit variance per cell.
std::vector<double> smoothed_gaussian(const GridSpec& g, int radius, std::uint64_t seed) {
    const int n = g.cells();
    std::vector<double> field(static_cast<std::size_t>(n));
    Rng rng(seed);
    for (auto& v : field) v = rng.normal();
    if (radius == 0) return field;

    std::vector<double> tmp(field.size());
    // Separable window sums along x, then y, then z.
    auto sum_axis = [&](int axis) {
        for (int z = 0; z < g.nz; ++z)
            for (int y = 0; y < g.ny; ++y)
                for (int x = 0; x < g.nx; ++x) {
                    int c[3] = {x, y, z};
                    const int len = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
                    const int lo = std::max(0, c[axis] - radius);
                    const int hi = std::min(len - 1, c[axis] + radius);
                    double s = 0.0;
                    for (int k = lo; k <= hi; ++k) {
                        c[axis] = k;
                        s += field[static_cast<std::size_t>(g.index(c[0], c[1], c[2]))];
                    }
                    tmp[static_cast<std::size_t>(g.index(x, y, z))] = s;
                }
        field.swap(tmp);
    };
    sum_axis(0);
    sum_axis(1);
    sum_axis(2);

    auto window = [&](int pos, int len) {
        return std::min(len - 1, pos + radius) - std::max(0, pos - radius) + 1;
    };
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const double count = static_cast<double>(window(x, g.nx)) * window(y, g.ny) *
                                     window(z, g.nz);
                field[static_cast<std::size_t>(g.index(x, y, z))] /= std::sqrt(count);
            }
    return field;
}

template <typename T>
void put(std::ofstream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("truncated realization file");
    return value;
}

}  // namespace

void GeoParams::validate() const {
    if (smoothing_radius < 0) throw ConfigError("smoothing radius must be >= 0");
    if (!(porosity_mean > 0.0 && porosity_mean < 1.0) || porosity_std < 0.0 ||
        porosity_mean - 3.0 * porosity_std <= 0.0 || porosity_mean + 3.0 * porosity_std >= 1.0)
        throw ConfigError("porosity moments put probability mass outside (0,1)");
    if (ln_perm_std < 0.0 || !std::isfinite(ln_perm_mean))
        throw ConfigError("invalid log-permeability moments");
    if (porosity_perm_corr < -1.0 || porosity_perm_corr > 1.0)
        throw ConfigError("porosity/permeability correlation must be in [-1,1]");
    if (shale_fraction < 0.0 || shale_fraction >= 1.0)
        throw ConfigError("shale fraction must be in [0,1)");
    if (!(shale_multiplier > 0.0 && shale_multiplier <= 0.05))
        throw ConfigError("shale permeability multiplier must be in (0, 0.05]");
    if (!(vertical_ratio > 0.0 && vertical_ratio <= 1.0))
        throw ConfigError("vertical permeability ratio must be in (0,1]");
}

Realization generate_realization(int id, std::uint64_t seed, const GridSpec& grid,
                                 const GeoParams& params) {
    if (id < 0) throw ContractError("realization id must be >= 0");
    grid.validate();
    params.validate();

    const auto uid = static_cast<std::uint64_t>(id);
    const auto g_poro = smoothed_gaussian(grid, params.smoothing_radius,
                                          derive_seed({seed, uid, kPorosityStream}));
    const auto g_perm = smoothed_gaussian(grid, params.smoothing_radius,
                                          derive_seed({seed, uid, kPermStream}));
    const auto g_shale = smoothed_gaussian(grid, params.smoothing_radius,
                                           derive_seed({seed, uid, kShaleStream}));

    const std::size_t n = g_poro.size();
    Realization r;
    r.id = id;
    r.seed = seed;
    r.porosity.resize(n);
    r.perm_h.resize(n);
    r.perm_v.resize(n);
    r.rock_type.assign(n, RockType::sand);

    const double rho = params.porosity_perm_corr;
    const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t i = 0; i < n; ++i) {
        r.porosity[i] =
            std::clamp(params.porosity_mean + params.porosity_std * g_poro[i], 1e-3, 1.0 - 1e-3);
        const double ln_k = params.ln_perm_mean +
                            params.ln_perm_std * (rho * g_poro[i] + rho_c * g_perm[i]);
        r.perm_h[i] = std::exp(ln_k);
    }

    const auto shale_cells = static_cast<std::size_t>(params.shale_fraction * static_cast<double>(n));
    if (shale_cells > 0) {
        auto sorted = g_shale;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(shale_cells),
                         sorted.end());
        const double threshold = sorted[shale_cells];
        for (std::size_t i = 0; i < n; ++i)
            if (g_shale[i] < threshold) {
                r.rock_type[i] = RockType::shale;
                r.perm_h[i] *= params.shale_multiplier;
            }
    }
    for (std::size_t i = 0; i < n; ++i) r.perm_v[i] = params.vertical_ratio * r.perm_h[i];
    return r;
}

Realization uniform_realization(const GridSpec& grid, double porosity, double perm_h,
                                double perm_v) {
    const auto n = static_cast<std::size_t>(grid.cells());
    Realization r;
    r.porosity.assign(n, porosity);
    r.perm_h.assign(n, perm_h);
    r.perm_v.assign(n, perm_v);
    r.rock_type.assign(n, RockType::sand);
    return r;
}

void write_realization(const std::string& path, const Realization& r, const GridSpec& grid) {
    if (r.cells() != static_cast<std::size_t>(grid.cells()))
        throw ContractError("realization does not match grid");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write("RPXREAL1", 8);
    put<std::int32_t>(out, grid.nx);
    put<std::int32_t>(out, grid.ny);
    put<std::int32_t>(out, grid.nz);
    put<std::int32_t>(out, r.id);
    put<std::uint64_t>(out, r.seed);
    for (double v : r.porosity) put(out, v);
    for (double v : r.perm_h) put(out, v);
    for (double v : r.perm_v) put(out, v);
    for (auto t : r.rock_type) put<std::uint8_t>(out, static_cast<std::uint8_t>(t));
    if (!out) throw DataError("failed writing '" + path + "'");
}

Realization read_realization(const std::string& path, GridSpec* grid_dims) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "RPXREAL1", 8) != 0) throw DataError("not a realization file");
    const int nx = get<std::int32_t>(in);
    const int ny = get<std::int32_t>(in);
    const int nz = get<std::int32_t>(in);
    if (nx < 1 || ny < 1 || nz < 1) throw DataError("bad realization dimensions");
    Realization r;
    r.id = get<std::int32_t>(in);
    r.seed = get<std::uint64_t>(in);
    const auto n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
                   static_cast<std::size_t>(nz);
    r.porosity.resize(n);
    r.perm_h.resize(n);
    r.perm_v.resize(n);
    r.rock_type.resize(n);
    for (auto& v : r.porosity) v = get<double>(in);
    for (auto& v : r.perm_h) v = get<double>(in);
    for (auto& v : r.perm_v) v = get<double>(in);
    for (auto& t : r.rock_type) t = static_cast<RockType>(get<std::uint8_t>(in));
    if (grid_dims) {
        grid_dims->nx = nx;
        grid_dims->ny = ny;
        grid_dims->nz = nz;
    }
    return r;
}

}  // namespace resproxy::sim
