#include "resproxy/baselines/baselines.hpp"

#include "resproxy/common/errors.hpp"

#include <string>
#include <vector>

namespace resproxy::baselines {

const char* to_string(FixedKind k) noexcept { return k == FixedKind::mean ? "mean" : "tsm"; }

FixedKind parse_fixed_kind(std::string_view text) {
    if (text == "mean") return FixedKind::mean;
    if (text == "tsm") return FixedKind::tsm;
    throw ConfigError("unknown fixed baseline '" + std::string(text) + "'");
}

Matrix FixedPredictor::predict(int horizon) const {
    if (horizon < 1) throw ContractError("horizon must be >= 1");
    if (table.rows() == 0) throw ContractError("predictor is not fitted");
    const auto T = static_cast<std::size_t>(horizon);
    Matrix out(T, table.cols());
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t src = kind == FixedKind::mean ? 0 : std::min(t, table.rows() - 1);
        for (std::size_t k = 0; k < table.cols(); ++k) out(t, k) = table(src, k);
    }
    return out;
}

FixedPredictor fit_fixed(std::span<const scenario::SimulationRecord* const> train, FixedKind kind,
                         int dims, int horizon) {
    if (train.empty()) throw ContractError("cannot fit a baseline on an empty partition");
    const std::size_t D = dims > 0 ? static_cast<std::size_t>(dims) : train.front()->dims();
    const std::size_t T = horizon > 0 ? static_cast<std::size_t>(horizon) : train.front()->horizon();
    for (const auto* r : train)
        if (r->dims() < D || r->horizon() < T)
            throw ContractError("record " + std::to_string(r->id) + " is smaller than the fit window");

    FixedPredictor p;
    p.kind = kind;
    if (kind == FixedKind::mean) {
        p.table = Matrix(1, D);
        for (const auto* r : train)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < D; ++k) p.table(0, k) += r->rates(t, k);
        const double n = static_cast<double>(train.size() * T);
        for (auto& v : p.table.values()) v /= n;
    } else {
        p.table = Matrix(T, D);
        for (const auto* r : train)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < D; ++k) p.table(t, k) += r->rates(t, k);
        const double n = static_cast<double>(train.size());
        for (auto& v : p.table.values()) v /= n;
    }
    return p;
}

scenario::SimulationRecord upscaled_predict(const sim::CoarseModel& coarse,
                                            const scenario::ActionSequence& actions,
                                            const sim::SimulatorConfig& config, int horizon) {
    const auto mapped = sim::coarsen_actions(actions, coarse.factor);
    std::vector<sim::WellSpec> wells;
    std::vector<int> slots;
    std::vector<std::pair<int, int>> producer_cells;
    int producers = 0;
    for (std::size_t t = 0; t < mapped.size(); ++t) {
        const auto& a = mapped[t];
        if (!a.drills()) continue;
        if (a.kind == scenario::ActionKind::producer) {
            const int slot = producers++;
            bool taken = false;
            for (const auto& [x, y] : producer_cells) taken = taken || (x == a.x && y == a.y);
            if (taken) continue;
            producer_cells.emplace_back(a.x, a.y);
            wells.push_back(sim::make_well(a, coarse.grid, config.wells, static_cast<int>(t)));
            slots.push_back(slot);
        } else {
            wells.push_back(sim::make_well(a, coarse.grid, config.wells, static_cast<int>(t)));
            slots.push_back(-1);
        }
    }
    auto rec = sim::run_wells(coarse.realization, wells, slots, coarse.grid, config, horizon);
    rec.actions = actions;
    return rec;
}

scenario::SimulationRecord upscaled_predict(const sim::Realization& fine,
                                            const scenario::ActionSequence& actions, int factor,
                                            const sim::GridSpec& grid,
                                            const sim::SimulatorConfig& config, int horizon) {
    return upscaled_predict(sim::upscale(fine, grid, factor), actions, config, horizon);
}

}  // namespace resproxy::baselines
