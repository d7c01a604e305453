#include "resproxy/sim/simulator.hpp"

#include "resproxy/common/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace resproxy::sim {

namespace {

constexpr double kMilliDarcy = 9.869233e-16;  // m^2
constexpr double kBar = 1.0e5;                // Pa
constexpr double kDay = 86400.0;              // s

struct PhaseMobility {
    double value = 0.0;
    double dsat = 0.0;
};

struct Face {
    int a = 0;
    int b = 0;
    double trans = 0.0;  // m^3
};

constexpr int kMaxKrylov = 40;
constexpr int kRefactorAfter = 8;

using SparseLUSolver = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;

/// Preconditioner applying previously computed LU factors of an earlier Jacobian.
struct StaleLU {
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };
    const SparseLUSolver* lu = nullptr;

    template <typename M> StaleLU& analyzePattern(const M&) { return *this; }
    template <typename M> StaleLU& factorize(const M&) { return *this; }
    template <typename M> StaleLU& compute(const M&) { return *this; }
    template <typename R> Eigen::VectorXd solve(const Eigen::MatrixBase<R>& b) const {
        return lu->solve(b);
    }
    [[nodiscard]] Eigen::ComputationInfo info() const { return Eigen::Success; }
};

/// Value-array offsets of a 2x2 Jacobian block.
struct BlockSlots {
    std::array<int, 4> at{};  // (water,p) (water,s) (oil,p) (oil,s)
};

}  // namespace

struct Simulator::Impl {
    GridSpec grid;
    SimulatorConfig config;
    int cells = 0;
    std::vector<double> pv_ref;
    std::vector<double> perm_h_si;
    std::vector<Face> faces;
    std::vector<int> cell_x, cell_y, cell_z;

    Eigen::SparseMatrix<double> jacobian;
    std::vector<BlockSlots> diag_slots;
    std::vector<BlockSlots> face_ab;  // row a, column b
    std::vector<BlockSlots> face_ba;  // row b, column a
    SparseLUSolver lu;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, StaleLU> krylov;
    bool lu_analyzed = false;
    bool lu_valid = false;
    Eigen::VectorXd residual;
    Eigen::VectorXd update;

    double mu_w = 0.0;
    double mu_o = 0.0;

    Impl(const Realization& r, const GridSpec& g, SimulatorConfig cfg)
        : grid(g), config(std::move(cfg)) {
        grid.validate();
        config.validate();
        cells = grid.cells();
        if (r.cells() != static_cast<std::size_t>(cells))
            throw ContractError("realization has " + std::to_string(r.cells()) +
                                " cells, grid has " + std::to_string(cells));
        mu_w = config.fluid.viscosity_water_cp * 1e-3;
        mu_o = config.fluid.viscosity_oil_cp * 1e-3;

        pv_ref.resize(static_cast<std::size_t>(cells));
        perm_h_si.resize(static_cast<std::size_t>(cells));
        cell_x.resize(static_cast<std::size_t>(cells));
        cell_y.resize(static_cast<std::size_t>(cells));
        cell_z.resize(static_cast<std::size_t>(cells));
        for (int z = 0; z < grid.nz; ++z)
            for (int y = 0; y < grid.ny; ++y)
                for (int x = 0; x < grid.nx; ++x) {
                    const auto c = static_cast<std::size_t>(grid.index(x, y, z));
                    pv_ref[c] = grid.cell_volume(x, y, z) * r.porosity[c];
                    perm_h_si[c] = r.perm_h[c] * kMilliDarcy;
                    cell_x[c] = x;
                    cell_y[c] = y;
                    cell_z[c] = z;
                }

        auto half = [](double k, double area, double len) { return k * area / (0.5 * len); };
        auto harmonic = [](double t1, double t2) { return t1 * t2 / (t1 + t2); };
        for (int z = 0; z < grid.nz; ++z)
            for (int y = 0; y < grid.ny; ++y)
                for (int x = 0; x < grid.nx; ++x) {
                    const int a = grid.index(x, y, z);
                    const auto ua = static_cast<std::size_t>(a);
                    if (x + 1 < grid.nx) {
                        const int b = grid.index(x + 1, y, z);
                        const double area = grid.dy[y] * grid.dz[z];
                        faces.push_back({a, b,
                                         harmonic(half(perm_h_si[ua], area, grid.dx[x]),
                                                  half(perm_h_si[static_cast<std::size_t>(b)],
                                                       area, grid.dx[x + 1]))});
                    }
                    if (y + 1 < grid.ny) {
                        const int b = grid.index(x, y + 1, z);
                        const double area = grid.dx[x] * grid.dz[z];
                        faces.push_back({a, b,
                                         harmonic(half(perm_h_si[ua], area, grid.dy[y]),
                                                  half(perm_h_si[static_cast<std::size_t>(b)],
                                                       area, grid.dy[y + 1]))});
                    }
                    if (z + 1 < grid.nz) {
                        const int b = grid.index(x, y, z + 1);
                        const double area = grid.dx[x] * grid.dy[y];
                        const double kva = r.perm_v[ua] * kMilliDarcy;
                        const double kvb = r.perm_v[static_cast<std::size_t>(b)] * kMilliDarcy;
                        faces.push_back({a, b,
                                         harmonic(half(kva, area, grid.dz[z]),
                                                  half(kvb, area, grid.dz[z + 1]))});
                    }
                }

        build_pattern();
    }

    void build_pattern() {
        const int n = 2 * cells;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(4 * cells) + 8 * faces.size());
        auto block = [&](int row_cell, int col_cell) {
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) trip.emplace_back(2 * row_cell + i, 2 * col_cell + j, 0.0);
        };
        for (int c = 0; c < cells; ++c) block(c, c);
        for (const auto& f : faces) {
            block(f.a, f.b);
            block(f.b, f.a);
        }
        jacobian.resize(n, n);
        jacobian.setFromTriplets(trip.begin(), trip.end());
        jacobian.makeCompressed();

        auto slot = [&](int row, int col) {
            const int begin = jacobian.outerIndexPtr()[col];
            const int end = jacobian.outerIndexPtr()[col + 1];
            const int* rows = jacobian.innerIndexPtr();
            const int* it = std::lower_bound(rows + begin, rows + end, row);
            return static_cast<int>(it - rows);
        };
        auto block_slots = [&](int row_cell, int col_cell) {
            BlockSlots s;
            s.at[0] = slot(2 * row_cell, 2 * col_cell);
            s.at[1] = slot(2 * row_cell, 2 * col_cell + 1);
            s.at[2] = slot(2 * row_cell + 1, 2 * col_cell);
            s.at[3] = slot(2 * row_cell + 1, 2 * col_cell + 1);
            return s;
        };
        diag_slots.resize(static_cast<std::size_t>(cells));
        for (int c = 0; c < cells; ++c) diag_slots[static_cast<std::size_t>(c)] = block_slots(c, c);
        face_ab.resize(faces.size());
        face_ba.resize(faces.size());
        for (std::size_t i = 0; i < faces.size(); ++i) {
            face_ab[i] = block_slots(faces[i].a, faces[i].b);
            face_ba[i] = block_slots(faces[i].b, faces[i].a);
        }
        residual.resize(n);
        update.resize(n);
    }

    // Fluid and rock functions of pressure in bar.
    [[nodiscard]] double b_water(double p) const {
        return std::exp(config.fluid.compress_water_per_bar * (p - config.fluid.reference_pressure_bar));
    }
    [[nodiscard]] double b_oil(double p) const {
        return std::exp(config.fluid.compress_oil_per_bar * (p - config.fluid.reference_pressure_bar));
    }
    [[nodiscard]] double rock_mult(double p) const {
        return std::exp(config.fluid.compress_rock_per_bar * (p - config.fluid.reference_pressure_bar));
    }

    [[nodiscard]] PhaseMobility mobility_water(double s) const {
        const auto& f = config.fluid;
        const double span = 1.0 - f.residual_water - f.residual_oil;
        const double se = (s - f.residual_water) / span;
        if (se <= 0.0) return {0.0, 0.0};
        if (se >= 1.0) return {f.krw_max / mu_w, 0.0};
        const double kr = f.krw_max * std::pow(se, f.corey_water);
        const double dkr = f.krw_max * f.corey_water * std::pow(se, f.corey_water - 1.0) / span;
        return {kr / mu_w, dkr / mu_w};
    }

    [[nodiscard]] PhaseMobility mobility_oil(double s) const {
        const auto& f = config.fluid;
        const double span = 1.0 - f.residual_water - f.residual_oil;
        const double so = 1.0 - (s - f.residual_water) / span;
        if (so <= 0.0) return {0.0, 0.0};
        if (so >= 1.0) return {f.kro_max / mu_o, 0.0};
        const double kr = f.kro_max * std::pow(so, f.corey_oil);
        const double dkr = -f.kro_max * f.corey_oil * std::pow(so, f.corey_oil - 1.0) / span;
        return {kr / mu_o, dkr / mu_o};
    }

    [[nodiscard]] double well_index(int cell) const {
        const auto c = static_cast<std::size_t>(cell);
        const double dx = grid.dx[static_cast<std::size_t>(cell_x[c])];
        const double dy = grid.dy[static_cast<std::size_t>(cell_y[c])];
        const double dz = grid.dz[static_cast<std::size_t>(cell_z[c])];
        const double r0 = 0.14 * std::sqrt(dx * dx + dy * dy);
        const double denom =
            std::log(r0 / config.wells.wellbore_radius_m) + config.wells.skin;
        return 2.0 * std::numbers::pi * perm_h_si[c] * dz / std::max(denom, 1e-3);
    }

    struct ActiveWell {
        WellKind kind = WellKind::producer;
        double bhp = 0.0;           // bar, producers
        double rate = 0.0;          // m^3/day, injectors
        std::vector<int> cells;
        std::vector<double> index;  // WI per completion, m^3
        std::vector<double> share;  // injection split
    };

    std::vector<ActiveWell> prepare_wells(std::span<const WellSpec> wells, double mult) const {
        std::vector<ActiveWell> out;
        out.reserve(wells.size());
        const double p0 = config.initial_pressure_bar;
        for (const auto& w : wells) {
            if (!grid.contains(w.x, w.y))
                throw ContractError("well at (" + std::to_string(w.x) + "," + std::to_string(w.y) +
                                    ") is outside the grid");
            ActiveWell a;
            a.kind = w.kind;
            if (w.kind == WellKind::producer)
                a.bhp = p0 - mult * (p0 - w.control);
            else
                a.rate = mult * w.control;
            double total = 0.0;
            for (int z : w.completion_layers) {
                if (z < 0 || z >= grid.nz) throw ContractError("completion layer out of range");
                const int c = grid.index(w.x, w.y, z);
                a.cells.push_back(c);
                a.index.push_back(well_index(c));
                total += a.index.back();
            }
            for (double wi : a.index) a.share.push_back(total > 0.0 ? wi / total : 0.0);
            out.push_back(std::move(a));
        }
        return out;
    }

    /// Producer completion flow (surface m^3/s) and derivatives w.r.t. (p bar, s).
    struct CompletionFlow {
        double qw = 0.0, qo = 0.0;
        double dqw_dp = 0.0, dqw_ds = 0.0, dqo_dp = 0.0, dqo_ds = 0.0;
    };

    [[nodiscard]] CompletionFlow producer_flow(double wi, double bhp, double p, double s) const {
        CompletionFlow f;
        const double dd = (p - bhp) * kBar;
        if (dd <= 0.0) return f;
        const auto lw = mobility_water(s);
        const auto lo = mobility_oil(s);
        const double bw = b_water(p);
        const double bo = b_oil(p);
        const double cw = config.fluid.compress_water_per_bar;
        const double co = config.fluid.compress_oil_per_bar;
        f.qw = wi * lw.value * bw * dd;
        f.qo = wi * lo.value * bo * dd;
        f.dqw_dp = wi * lw.value * bw * (cw * dd + kBar);
        f.dqo_dp = wi * lo.value * bo * (co * dd + kBar);
        f.dqw_ds = wi * lw.dsat * bw * dd;
        f.dqo_ds = wi * lo.dsat * bo * dd;
        return f;
    }

    struct Convergence {
        double cnv = 0.0;
        double mb = 0.0;
    };

    /// Assembles residual (surface m^3 per step) and Jacobian at (p, s).
    Convergence assemble(const std::vector<double>& p, const std::vector<double>& s,
                         const std::vector<double>& p_old, const std::vector<double>& s_old,
                         double dt_s, const std::vector<ActiveWell>& wells) {
        double* val = jacobian.valuePtr();
        std::fill(val, val + jacobian.nonZeros(), 0.0);
        residual.setZero();
        const double cw = config.fluid.compress_water_per_bar;
        const double co = config.fluid.compress_oil_per_bar;
        const double cr = config.fluid.compress_rock_per_bar;

        double in_place_w = 0.0;
        double in_place_o = 0.0;
        for (int c = 0; c < cells; ++c) {
            const auto uc = static_cast<std::size_t>(c);
            const double pv = pv_ref[uc] * rock_mult(p[uc]);
            const double pv_old = pv_ref[uc] * rock_mult(p_old[uc]);
            const double bw = b_water(p[uc]);
            const double bo = b_oil(p[uc]);
            const double acc_w = pv * bw * s[uc];
            const double acc_o = pv * bo * (1.0 - s[uc]);
            in_place_w += acc_w;
            in_place_o += acc_o;
            residual[2 * c] += acc_w - pv_old * b_water(p_old[uc]) * s_old[uc];
            residual[2 * c + 1] += acc_o - pv_old * b_oil(p_old[uc]) * (1.0 - s_old[uc]);
            const auto& d = diag_slots[uc].at;
            val[d[0]] += acc_w * (cr + cw);
            val[d[1]] += pv * bw;
            val[d[2]] += acc_o * (cr + co);
            val[d[3]] -= pv * bo;
        }

        for (std::size_t i = 0; i < faces.size(); ++i) {
            const auto& f = faces[i];
            const auto ua = static_cast<std::size_t>(f.a);
            const auto ub = static_cast<std::size_t>(f.b);
            const double dp = (p[ub] - p[ua]) * kBar;  // flow into a when positive
            const bool up_b = dp > 0.0;
            const auto uu = up_b ? ub : ua;
            const double pu = p[uu];
            const double su = s[uu];
            const auto lw = mobility_water(su);
            const auto lo = mobility_oil(su);
            const double bw = b_water(pu);
            const double bo = b_oil(pu);
            const double tw = f.trans * lw.value * bw;
            const double to = f.trans * lo.value * bo;
            const double fw = tw * dp;  // surface m^3/s into a
            const double fo = to * dp;

            // dF/d(p_a, s_a, p_b, s_b)
            double dfw[4] = {-tw * kBar, 0.0, tw * kBar, 0.0};
            double dfo[4] = {-to * kBar, 0.0, to * kBar, 0.0};
            const int pu_idx = up_b ? 2 : 0;
            dfw[pu_idx] += tw * cw * dp;
            dfo[pu_idx] += to * co * dp;
            dfw[pu_idx + 1] += f.trans * lw.dsat * bw * dp;
            dfo[pu_idx + 1] += f.trans * lo.dsat * bo * dp;

            residual[2 * f.a] -= dt_s * fw;
            residual[2 * f.a + 1] -= dt_s * fo;
            residual[2 * f.b] += dt_s * fw;
            residual[2 * f.b + 1] += dt_s * fo;

            const auto& daa = diag_slots[ua].at;
            const auto& dbb = diag_slots[ub].at;
            const auto& dab = face_ab[i].at;
            const auto& dba = face_ba[i].at;
            // rows of a: -dt * dF
            val[daa[0]] -= dt_s * dfw[0];
            val[daa[1]] -= dt_s * dfw[1];
            val[daa[2]] -= dt_s * dfo[0];
            val[daa[3]] -= dt_s * dfo[1];
            val[dab[0]] -= dt_s * dfw[2];
            val[dab[1]] -= dt_s * dfw[3];
            val[dab[2]] -= dt_s * dfo[2];
            val[dab[3]] -= dt_s * dfo[3];
            // rows of b: +dt * dF
            val[dbb[0]] += dt_s * dfw[2];
            val[dbb[1]] += dt_s * dfw[3];
            val[dbb[2]] += dt_s * dfo[2];
            val[dbb[3]] += dt_s * dfo[3];
            val[dba[0]] += dt_s * dfw[0];
            val[dba[1]] += dt_s * dfw[1];
            val[dba[2]] += dt_s * dfo[0];
            val[dba[3]] += dt_s * dfo[1];
        }

        for (const auto& w : wells) {
            for (std::size_t k = 0; k < w.cells.size(); ++k) {
                const int c = w.cells[k];
                const auto uc = static_cast<std::size_t>(c);
                if (w.kind == WellKind::injector) {
                    residual[2 * c] -= dt_s * w.rate * w.share[k] / kDay;
                    continue;
                }
                const auto q = producer_flow(w.index[k], w.bhp, p[uc], s[uc]);
                residual[2 * c] += dt_s * q.qw;
                residual[2 * c + 1] += dt_s * q.qo;
                const auto& d = diag_slots[uc].at;
                val[d[0]] += dt_s * q.dqw_dp;
                val[d[1]] += dt_s * q.dqw_ds;
                val[d[2]] += dt_s * q.dqo_dp;
                val[d[3]] += dt_s * q.dqo_ds;
            }
        }

        Convergence conv;
        double sum_w = 0.0;
        double sum_o = 0.0;
        for (int c = 0; c < cells; ++c) {
            const double pv = pv_ref[static_cast<std::size_t>(c)];
            conv.cnv = std::max(conv.cnv, std::max(std::abs(residual[2 * c]),
                                                   std::abs(residual[2 * c + 1])) / pv);
            sum_w += residual[2 * c];
            sum_o += residual[2 * c + 1];
        }
        conv.mb = std::max(std::abs(sum_w) / std::max(in_place_w, 1e-300),
                           std::abs(sum_o) / std::max(in_place_o, 1e-300));
        return conv;
    }

    struct SubstepOutcome {
        bool converged = false;
        int iterations = 0;
        double residual = 0.0;
    };

    void refactor() {
        if (!lu_analyzed) {
            lu.analyzePattern(jacobian);
            lu_analyzed = true;
        }
        lu.factorize(jacobian);
        lu_valid = lu.info() == Eigen::Success;
    }

    /// BiCGSTAB preconditioned by the most recent LU factors; refactors when they go stale.
    bool solve_linear() {
        krylov.preconditioner().lu = &lu;
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (!lu_valid || attempt > 0) {
                refactor();
                if (!lu_valid) return false;
            }
            krylov.setTolerance(1e-8);
            krylov.setMaxIterations(kMaxKrylov);
            krylov.compute(jacobian);
            update = krylov.solve(-residual);
            if (krylov.info() == Eigen::Success && update.allFinite()) {
                if (krylov.iterations() > kRefactorAfter) lu_valid = false;
                return true;
            }
        }
        return false;
    }

    SubstepOutcome newton(std::vector<double>& p, std::vector<double>& s,
                          const std::vector<double>& p_old, const std::vector<double>& s_old,
                          double dt_s, const std::vector<ActiveWell>& wells) {
        SubstepOutcome out;
        for (int it = 0;; ++it) {
            const auto conv = assemble(p, s, p_old, s_old, dt_s, wells);
            out.iterations = it;
            out.residual = conv.cnv;
            if (!std::isfinite(conv.cnv) || !std::isfinite(conv.mb)) return out;
            if (conv.cnv <= config.newton_tol && conv.mb <= config.mb_tol) {
                out.converged = true;
                return out;
            }
            if (it >= config.newton_max_iter) return out;

            const double* val = jacobian.valuePtr();
            for (Eigen::Index k = 0; k < jacobian.nonZeros(); ++k)
                if (!std::isfinite(val[k]))
                    throw NumericError("non-finite Jacobian entry during Newton solve");

            if (!solve_linear()) return out;

            for (int c = 0; c < cells; ++c) {
                const auto uc = static_cast<std::size_t>(c);
                const double dp = std::clamp(update[2 * c], -config.max_pressure_change_bar,
                                             config.max_pressure_change_bar);
                const double ds = std::clamp(update[2 * c + 1], -config.max_sat_change,
                                             config.max_sat_change);
                p[uc] += dp;
                s[uc] = std::clamp(s[uc] + ds, 0.0, 1.0);
                if (!(p[uc] > 0.0) || !std::isfinite(p[uc])) return out;
            }
        }
    }

    /// Accumulates well volumes (surface m^3) at the converged state of a sub-step.
    void accumulate_well_volumes(const std::vector<double>& p, const std::vector<double>& s,
                                 double dt_s, const std::vector<ActiveWell>& wells,
                                 std::vector<WellFlow>& volumes) const {
        for (std::size_t i = 0; i < wells.size(); ++i) {
            const auto& w = wells[i];
            for (std::size_t k = 0; k < w.cells.size(); ++k) {
                if (w.kind == WellKind::injector) {
                    volumes[i].water += dt_s * w.rate * w.share[k] / kDay;
                    continue;
                }
                const auto uc = static_cast<std::size_t>(w.cells[k]);
                const auto q = producer_flow(w.index[k], w.bhp, p[uc], s[uc]);
                volumes[i].water += dt_s * q.qw;
                volumes[i].oil += dt_s * q.qo;
            }
        }
    }

    void advance(std::vector<double>& p, std::vector<double>& s, double dt_s, int depth,
                 const std::vector<ActiveWell>& wells, std::vector<WellFlow>& volumes,
                 StepResult& stats) {
        auto p_new = p;
        auto s_new = s;
        const auto outcome = newton(p_new, s_new, p, s, dt_s, wells);
        stats.newton_iterations += outcome.iterations;
        stats.residual = outcome.residual;
        if (outcome.converged) {
            accumulate_well_volumes(p_new, s_new, dt_s, wells, volumes);
            p.swap(p_new);
            s.swap(s_new);
            return;
        }
        if (depth >= config.max_dt_chops)
            throw SolverError("Newton solve failed after " + std::to_string(depth) +
                                  " time-step chops (residual " +
                                  std::to_string(outcome.residual) + ")",
                              outcome.residual);
        stats.substeps += 1;
        advance(p, s, 0.5 * dt_s, depth + 1, wells, volumes, stats);
        advance(p, s, 0.5 * dt_s, depth + 1, wells, volumes, stats);
    }
};

void SimulatorConfig::validate() const {
    if (!(newton_tol > 0.0) || !(mb_tol > 0.0)) throw ConfigError("solver tolerances must be > 0");
    if (newton_max_iter < 1) throw ConfigError("newton_max_iter must be >= 1");
    if (max_dt_chops < 0) throw ConfigError("max_dt_chops must be >= 0");
    if (gravity) throw ConfigError("gravity is not supported");
    if (!(initial_pressure_bar > 0.0)) throw ConfigError("initial pressure must be positive");
    if (initial_sat_w < 0.0 || initial_sat_w > 1.0)
        throw ConfigError("initial water saturation must be in [0,1]");
    if (control_candidates.empty()) throw ConfigError("control candidate set is empty");
    if (!(control_cost >= 0.0)) throw ConfigError("control cost must be >= 0");
    if (fluid.residual_water + fluid.residual_oil >= 1.0)
        throw ConfigError("residual saturations leave no mobile range");
    if (wells.completion_depth < 1) throw ConfigError("completion depth must be >= 1");
}

std::vector<int> completion_layers(WellKind kind, const GridSpec& grid, int depth) {
    const int n = std::min(depth, grid.nz);
    std::vector<int> layers;
    layers.reserve(static_cast<std::size_t>(n));
    if (kind == WellKind::producer)
        for (int z = 0; z < n; ++z) layers.push_back(z);
    else
        for (int z = grid.nz - n; z < grid.nz; ++z) layers.push_back(z);
    return layers;
}

WellSpec make_well(const scenario::Action& action, const GridSpec& grid,
                   const WellDefaults& defaults, int open_step) {
    if (!action.drills()) throw ContractError("cannot build a well from a do-nothing action");
    if (!grid.contains(action.x, action.y))
        throw ContractError("action " + scenario::to_token(action) + " is outside the grid");
    WellSpec w;
    w.kind = action.kind == scenario::ActionKind::producer ? WellKind::producer : WellKind::injector;
    w.x = action.x;
    w.y = action.y;
    w.completion_layers = completion_layers(w.kind, grid, defaults.completion_depth);
    w.control = w.kind == WellKind::producer ? defaults.producer_bhp_bar : defaults.injector_rate;
    w.open_step = open_step;
    return w;
}

Simulator::Simulator(const Realization& realization, const GridSpec& grid, SimulatorConfig config)
    : impl_(std::make_unique<Impl>(realization, grid, std::move(config))) {}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

const GridSpec& Simulator::grid() const noexcept { return impl_->grid; }
const SimulatorConfig& Simulator::config() const noexcept { return impl_->config; }

ReservoirState Simulator::initial_state() const {
    ReservoirState s;
    s.pressure.assign(static_cast<std::size_t>(impl_->cells), impl_->config.initial_pressure_bar);
    s.sat_w.assign(static_cast<std::size_t>(impl_->cells), impl_->config.initial_sat_w);
    return s;
}

PhaseVolumes Simulator::in_place(const ReservoirState& state) const {
    PhaseVolumes v;
    for (int c = 0; c < impl_->cells; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        const double pv = impl_->pv_ref[uc] * impl_->rock_mult(state.pressure[uc]);
        v.water += pv * impl_->b_water(state.pressure[uc]) * state.sat_w[uc];
        v.oil += pv * impl_->b_oil(state.pressure[uc]) * (1.0 - state.sat_w[uc]);
    }
    return v;
}

StepResult Simulator::step(const ReservoirState& state, std::span<const WellSpec> wells,
                           double control_multiplier) {
    auto& im = *impl_;
    if (state.pressure.size() != static_cast<std::size_t>(im.cells) ||
        state.sat_w.size() != static_cast<std::size_t>(im.cells))
        throw ContractError("reservoir state does not match grid");
    const auto active = im.prepare_wells(wells, control_multiplier);

    StepResult result;
    result.substeps = 1;
    std::vector<WellFlow> volumes(wells.size());
    auto p = state.pressure;
    auto s = state.sat_w;
    const double dt_s = im.grid.dt_days * kDay;
    im.advance(p, s, dt_s, 0, active, volumes, result);

    result.state.pressure = std::move(p);
    result.state.sat_w = std::move(s);
    result.state.step = state.step + 1;
    result.flows.resize(wells.size());
    result.rates.well_opr.assign(scenario::kWellSlots, 0.0);
    std::size_t producer_rank = 0;
    for (std::size_t i = 0; i < wells.size(); ++i) {
        auto& f = result.flows[i];
        f.oil = volumes[i].oil / im.grid.dt_days;
        f.water = volumes[i].water / im.grid.dt_days;
        if (wells[i].kind == WellKind::producer) {
            result.rates.fopr += f.oil;
            result.rates.fwpr += f.water;
            if (producer_rank < scenario::kWellSlots) result.rates.well_opr[producer_rank] = f.oil;
            ++producer_rank;
        } else {
            result.rates.fwir += f.water;
        }
    }
    return result;
}

StepResult solve_timestep(const ReservoirState& state, std::span<const WellSpec> wells,
                          const Realization& realization, const GridSpec& grid,
                          const SimulatorConfig& config) {
    Simulator sim(realization, grid, config);
    return sim.step(state, wells);
}

ControlChoice optimize_well_controls(Simulator& simulator, const ReservoirState& state,
                                     std::span<const WellSpec> wells,
                                     std::span<const double> candidates) {
    ControlChoice choice;
    const bool has_producer = std::any_of(wells.begin(), wells.end(), [](const WellSpec& w) {
        return w.kind == WellKind::producer;
    });
    if (!has_producer || candidates.empty()) return choice;

    const double cost = simulator.config().control_cost;
    struct Trial {
        double m;
        StepResult step;
    };
    std::vector<Trial> trials;
    double last_residual = 0.0;
    for (double m : candidates) {
        ++choice.solves;
        try {
            trials.push_back({m, simulator.step(state, wells, m)});
        } catch (const SolverError& e) {
            last_residual = e.last_residual();
        }
    }
    if (trials.empty())
        throw SolverError("every control candidate failed to converge", last_residual);

    auto score = [cost](const Trial& t) { return t.step.rates.fopr - cost * t.m; };
    const Trial* best = &trials.front();
    for (const auto& t : trials) {
        const double diff = score(t) - score(*best);
        const double tol = 1e-9 * std::max(1.0, std::abs(score(*best)));
        if (diff > tol || (std::abs(diff) <= tol && std::abs(t.m - 1.0) < std::abs(best->m - 1.0)))
            best = &t;
    }
    choice.multiplier = best->m;
    choice.chosen_step = best->step;
    return choice;
}

scenario::SimulationRecord run_wells(const Realization& realization,
                                     const std::vector<WellSpec>& wells,
                                     const std::vector<int>& producer_slot, const GridSpec& grid,
                                     const SimulatorConfig& config, int horizon) {
    if (horizon < 1) throw ContractError("horizon must be >= 1");
    if (producer_slot.size() != wells.size())
        throw ContractError("producer slot map does not match well list");
    Simulator sim(realization, grid, config);
    auto state = sim.initial_state();

    scenario::SimulationRecord rec;
    rec.realization_id = realization.id;
    rec.rates = Matrix(static_cast<std::size_t>(horizon), scenario::kRatesWithWells);
    rec.control_mode = config.control_mode;
    rec.seed = realization.seed;
    rec.simulator_version = kSimulatorVersion;

    bool decided = config.control_mode == scenario::ControlMode::fixed;
    double multiplier = 1.0;
    std::vector<WellSpec> active;
    std::vector<int> active_slot;
    for (int t = 0; t < horizon; ++t) {
        active.clear();
        active_slot.clear();
        for (std::size_t i = 0; i < wells.size(); ++i)
            if (wells[i].open_step <= t) {
                active.push_back(wells[i]);
                active_slot.push_back(producer_slot[i]);
            }
        StepResult result;
        try {
            if (!decided) {
                auto choice = optimize_well_controls(sim, state, active, config.control_candidates);
                if (choice.chosen_step) {
                    decided = true;
                    multiplier = choice.multiplier;
                    result = std::move(*choice.chosen_step);
                } else {
                    result = sim.step(state, active, multiplier);
                }
            } else {
                result = sim.step(state, active, multiplier);
            }
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " at step " + std::to_string(t),
                              e.last_residual(), t);
        }
        auto row = rec.rates.row(static_cast<std::size_t>(t));
        row[0] = result.rates.fopr;
        row[1] = result.rates.fwpr;
        row[2] = result.rates.fwir;
        for (std::size_t i = 0; i < active.size(); ++i) {
            const int slot = active_slot[i];
            if (active[i].kind == WellKind::producer && slot >= 0 &&
                static_cast<std::size_t>(slot) < scenario::kWellSlots)
                row[scenario::kFieldRates + static_cast<std::size_t>(slot)] += result.flows[i].oil;
        }
        state = std::move(result.state);
    }
    rec.control_multiplier = multiplier;
    return rec;
}

scenario::SimulationRecord run_simulation(const Realization& realization,
                                          const scenario::ActionSequence& actions,
                                          const GridSpec& grid, const SimulatorConfig& config,
                                          int horizon) {
    if (auto bad = scenario::first_out_of_bounds(actions, grid.nx, grid.ny))
        throw ContractError("action " + scenario::to_token(actions[*bad]) +
                            " is outside the grid");
    std::vector<WellSpec> wells;
    std::vector<int> slots;
    int producers = 0;
    for (std::size_t t = 0; t < actions.size(); ++t) {
        if (!actions[t].drills()) continue;
        wells.push_back(make_well(actions[t], grid, config.wells, static_cast<int>(t)));
        slots.push_back(wells.back().kind == WellKind::producer ? producers++ : -1);
    }
    auto rec = run_wells(realization, wells, slots, grid, config, horizon);
    rec.actions = actions;
    return rec;
}

}  // namespace resproxy::sim
