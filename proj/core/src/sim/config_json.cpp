#include "resproxy/sim/config_json.hpp"

namespace resproxy::sim {

namespace {

void read_widths(const Json& j, const char* key, int n, std::vector<double>& out) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (out.size() != static_cast<std::size_t>(n) && !out.empty())
            out.assign(static_cast<std::size_t>(n), out.front());
        return;
    }
    if (it->is_number())
        out.assign(static_cast<std::size_t>(n), it->template get<double>());
    else
        read_optional(j, key, out, "grid");
}

}  // namespace

Json to_json(const GridSpec& g) {
    return Json{{"nx", g.nx},         {"ny", g.ny}, {"nz", g.nz},
                {"dx", g.dx},         {"dy", g.dy}, {"dz", g.dz},
                {"dt_days", g.dt_days}, {"horizon", g.horizon}};
}

void from_json(const Json& j, GridSpec& g) {
    require_keys(j, {"preset", "nx", "ny", "nz", "dx", "dy", "dz", "dt_days", "horizon"}, "grid");
    if (auto it = j.find("preset"); it != j.end()) g = GridSpec::preset(it->get<std::string>());
    read_optional(j, "nx", g.nx, "grid");
    read_optional(j, "ny", g.ny, "grid");
    read_optional(j, "nz", g.nz, "grid");
    read_widths(j, "dx", g.nx, g.dx);
    read_widths(j, "dy", g.ny, g.dy);
    read_widths(j, "dz", g.nz, g.dz);
    read_optional(j, "dt_days", g.dt_days, "grid");
    read_optional(j, "horizon", g.horizon, "grid");
    g.validate();
}

Json to_json(const GeoParams& p) {
    return Json{{"smoothing_radius", p.smoothing_radius},
                {"porosity_mean", p.porosity_mean},
                {"porosity_std", p.porosity_std},
                {"ln_perm_mean", p.ln_perm_mean},
                {"ln_perm_std", p.ln_perm_std},
                {"porosity_perm_corr", p.porosity_perm_corr},
                {"shale_fraction", p.shale_fraction},
                {"shale_multiplier", p.shale_multiplier},
                {"vertical_ratio", p.vertical_ratio}};
}

void from_json(const Json& j, GeoParams& p) {
    require_keys(j,
                 {"smoothing_radius", "porosity_mean", "porosity_std", "ln_perm_mean",
                  "ln_perm_std", "porosity_perm_corr", "shale_fraction", "shale_multiplier",
                  "vertical_ratio"},
                 "geology");
    read_optional(j, "smoothing_radius", p.smoothing_radius, "geology");
    read_optional(j, "porosity_mean", p.porosity_mean, "geology");
    read_optional(j, "porosity_std", p.porosity_std, "geology");
    read_optional(j, "ln_perm_mean", p.ln_perm_mean, "geology");
    read_optional(j, "ln_perm_std", p.ln_perm_std, "geology");
    read_optional(j, "porosity_perm_corr", p.porosity_perm_corr, "geology");
    read_optional(j, "shale_fraction", p.shale_fraction, "geology");
    read_optional(j, "shale_multiplier", p.shale_multiplier, "geology");
    read_optional(j, "vertical_ratio", p.vertical_ratio, "geology");
    p.validate();
}

Json to_json(const SimulatorConfig& c) {
    const auto& f = c.fluid;
    const auto& w = c.wells;
    return Json{
        {"newton_tol", c.newton_tol},
        {"mb_tol", c.mb_tol},
        {"newton_max_iter", c.newton_max_iter},
        {"max_dt_chops", c.max_dt_chops},
        {"max_sat_change", c.max_sat_change},
        {"max_pressure_change_bar", c.max_pressure_change_bar},
        {"control_mode", scenario::to_string(c.control_mode)},
        {"control_candidates", c.control_candidates},
        {"control_cost", c.control_cost},
        {"gravity", c.gravity},
        {"initial_pressure_bar", c.initial_pressure_bar},
        {"initial_sat_w", c.initial_sat_w},
        {"fluid",
         {{"viscosity_water_cp", f.viscosity_water_cp},
          {"viscosity_oil_cp", f.viscosity_oil_cp},
          {"compress_water_per_bar", f.compress_water_per_bar},
          {"compress_oil_per_bar", f.compress_oil_per_bar},
          {"compress_rock_per_bar", f.compress_rock_per_bar},
          {"reference_pressure_bar", f.reference_pressure_bar},
          {"residual_water", f.residual_water},
          {"residual_oil", f.residual_oil},
          {"corey_water", f.corey_water},
          {"corey_oil", f.corey_oil},
          {"krw_max", f.krw_max},
          {"kro_max", f.kro_max}}},
        {"wells",
         {{"producer_bhp_bar", w.producer_bhp_bar},
          {"injector_rate", w.injector_rate},
          {"wellbore_radius_m", w.wellbore_radius_m},
          {"skin", w.skin},
          {"completion_depth", w.completion_depth}}}};
}

void from_json(const Json& j, SimulatorConfig& c) {
    require_keys(j,
                 {"newton_tol", "mb_tol", "newton_max_iter", "max_dt_chops", "max_sat_change",
                  "max_pressure_change_bar", "control_mode", "control_candidates", "control_cost",
                  "gravity", "initial_pressure_bar", "initial_sat_w", "fluid", "wells"},
                 "simulator");
    read_optional(j, "newton_tol", c.newton_tol, "simulator");
    read_optional(j, "mb_tol", c.mb_tol, "simulator");
    read_optional(j, "newton_max_iter", c.newton_max_iter, "simulator");
    read_optional(j, "max_dt_chops", c.max_dt_chops, "simulator");
    read_optional(j, "max_sat_change", c.max_sat_change, "simulator");
    read_optional(j, "max_pressure_change_bar", c.max_pressure_change_bar, "simulator");
    if (auto it = j.find("control_mode"); it != j.end())
        c.control_mode = scenario::parse_control_mode(it->get<std::string>());
    read_optional(j, "control_candidates", c.control_candidates, "simulator");
    read_optional(j, "control_cost", c.control_cost, "simulator");
    read_optional(j, "gravity", c.gravity, "simulator");
    read_optional(j, "initial_pressure_bar", c.initial_pressure_bar, "simulator");
    read_optional(j, "initial_sat_w", c.initial_sat_w, "simulator");
    if (auto it = j.find("fluid"); it != j.end()) {
        const auto& fj = *it;
        auto& f = c.fluid;
        require_keys(fj,
                     {"viscosity_water_cp", "viscosity_oil_cp", "compress_water_per_bar",
                      "compress_oil_per_bar", "compress_rock_per_bar", "reference_pressure_bar",
                      "residual_water", "residual_oil", "corey_water", "corey_oil", "krw_max",
                      "kro_max"},
                     "simulator.fluid");
        read_optional(fj, "viscosity_water_cp", f.viscosity_water_cp, "fluid");
        read_optional(fj, "viscosity_oil_cp", f.viscosity_oil_cp, "fluid");
        read_optional(fj, "compress_water_per_bar", f.compress_water_per_bar, "fluid");
        read_optional(fj, "compress_oil_per_bar", f.compress_oil_per_bar, "fluid");
        read_optional(fj, "compress_rock_per_bar", f.compress_rock_per_bar, "fluid");
        read_optional(fj, "reference_pressure_bar", f.reference_pressure_bar, "fluid");
        read_optional(fj, "residual_water", f.residual_water, "fluid");
        read_optional(fj, "residual_oil", f.residual_oil, "fluid");
        read_optional(fj, "corey_water", f.corey_water, "fluid");
        read_optional(fj, "corey_oil", f.corey_oil, "fluid");
        read_optional(fj, "krw_max", f.krw_max, "fluid");
        read_optional(fj, "kro_max", f.kro_max, "fluid");
    }
    if (auto it = j.find("wells"); it != j.end()) {
        const auto& wj = *it;
        auto& w = c.wells;
        require_keys(wj,
                     {"producer_bhp_bar", "injector_rate", "wellbore_radius_m", "skin",
                      "completion_depth"},
                     "simulator.wells");
        read_optional(wj, "producer_bhp_bar", w.producer_bhp_bar, "wells");
        read_optional(wj, "injector_rate", w.injector_rate, "wells");
        read_optional(wj, "wellbore_radius_m", w.wellbore_radius_m, "wells");
        read_optional(wj, "skin", w.skin, "wells");
        read_optional(wj, "completion_depth", w.completion_depth, "wells");
    }
    c.validate();
}

}  // namespace resproxy::sim

namespace resproxy::scenario {

Json to_json(const SamplingPolicy& p) {
    return Json{{"length", p.length},
                {"drill_prob", p.drill_prob},
                {"producer_weight", p.producer_weight},
                {"injector_weight", p.injector_weight},
                {"exclusion", p.exclusion}};
}

void from_json(const Json& j, SamplingPolicy& p) {
    require_keys(j, {"length", "drill_prob", "producer_weight", "injector_weight", "exclusion"},
                 "policy");
    read_optional(j, "length", p.length, "policy");
    read_optional(j, "drill_prob", p.drill_prob, "policy");
    read_optional(j, "producer_weight", p.producer_weight, "policy");
    read_optional(j, "injector_weight", p.injector_weight, "policy");
    read_optional(j, "exclusion", p.exclusion, "policy");
    p.validate();
}

}  // namespace resproxy::scenario
