#include "resproxy/service/service.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/sim/simulator.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <regex>
#include <semaphore>

namespace resproxy::service {

namespace {

struct HttpError {
    int status;
    std::string message;
    Json detail;
};

[[noreturn]] void fail(int status, std::string message, Json detail = Json::object()) {
    throw HttpError{status, std::move(message), std::move(detail)};
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t t = 0; t < m.rows(); ++t) {
        Json row = Json::array();
        for (double v : m.row(t)) row.push_back(v);
        rows.push_back(std::move(row));
    }
    return rows;
}

Json column_names(std::size_t dims) {
    Json c = Json::array({"FOPR", "FWPR", "FWIR"});
    for (std::size_t k = 3; k < dims; ++k) c.push_back("WOPR" + std::to_string(k - 2));
    return c;
}

Json parse_body(const std::string& body) {
    try {
        auto j = Json::parse(body.empty() ? std::string("{}") : body);
        if (!j.is_object()) fail(400, "request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::exception& e) {
        fail(400, std::string("malformed JSON: ") + e.what());
    }
}

int get_int(const Json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) fail(400, std::string("'") + key + "' must be an integer");
    return j.at(key).get<int>();
}

struct Plan {
    int realization = 0;
    scenario::ActionSequence actions;
};

}  // namespace

void ServiceConfig::validate() const {
    if (port < 0 || port > 65535) throw ConfigError("port must be in [0, 65535]");
    if (dataset_dir.empty()) throw ConfigError("service needs a dataset directory");
    if (max_batch < 1) throw ConfigError("max batch must be >= 1");
    if (simulator_workers < 1 || http_threads < 1)
        throw ConfigError("worker counts must be >= 1");
}

struct ProxyService::Impl {
    const scenario::DatasetManifest* manifest = nullptr;
    const ServiceConfig* config = nullptr;
    std::vector<sim::Realization> ensemble;
    std::map<std::string, std::shared_ptr<const proxy::ProxyModel<float>>> models;
    mutable std::counting_semaphore<1024> sim_slots{1};
    httplib::Server server;

    explicit Impl(int workers) : sim_slots(std::min(workers, 1024)) {}

    Plan parse_plan(const Json& j) const {
        Plan p;
        if (!j.contains("realization") || !j.at("realization").is_number_integer())
            fail(400, "'realization' must be an integer");
        p.realization = j.at("realization").get<int>();
        if (p.realization < 0 || p.realization >= static_cast<int>(ensemble.size()))
            fail(404, "unknown realization " + std::to_string(p.realization));
        if (!j.contains("actions")) fail(400, "'actions' is required");
        std::vector<std::string> tokens;
        const auto& a = j.at("actions");
        if (a.is_string()) {
            const auto text = a.get<std::string>();
            std::size_t start = 0;
            while (start <= text.size()) {
                const auto dash = text.find('-', start);
                tokens.push_back(text.substr(start, dash == std::string::npos ? std::string::npos : dash - start));
                if (dash == std::string::npos) break;
                start = dash + 1;
            }
        } else if (a.is_array()) {
            for (const auto& t : a) {
                if (!t.is_string()) fail(400, "action tokens must be strings");
                tokens.push_back(t.get<std::string>());
            }
        } else {
            fail(400, "'actions' must be a token list or a dash-joined string");
        }
        if (tokens.empty() || (tokens.size() == 1 && tokens[0].empty()))
            fail(400, "action sequence is empty");
        for (const auto& t : tokens) {
            try {
                p.actions.push_back(scenario::parse_token(t));
            } catch (const ContractError& e) {
                fail(400, e.what(), Json{{"token", t}});
            }
        }
        const auto& g = manifest->grid;
        if (auto bad = scenario::first_out_of_bounds(p.actions, g.nx, g.ny))
            fail(400, "action " + tokens[*bad] + " is outside the " + std::to_string(g.nx) + "x" +
                          std::to_string(g.ny) + " grid",
                 Json{{"token", tokens[*bad]}, {"index", *bad}});
        if (auto bad = scenario::first_exclusion_violation(p.actions, manifest->policy.exclusion))
            fail(422, "action " + tokens[*bad] + " is within " +
                          std::to_string(manifest->policy.exclusion) + " cells of an earlier well",
                 Json{{"token", tokens[*bad]}, {"index", *bad}});
        return p;
    }

    const proxy::ProxyModel<float>& model_for(const Json& j, std::string* name) const {
        if (models.empty()) fail(404, "no models are loaded");
        std::string n = models.begin()->first;
        if (j.contains("model")) {
            if (!j.at("model").is_string()) fail(400, "'model' must be a string");
            n = j.at("model").get<std::string>();
        }
        auto it = models.find(n);
        if (it == models.end()) fail(404, "unknown model '" + n + "'");
        if (name) *name = n;
        return *it->second;
    }

    proxy::DecodeMode mode_of(const Json& j) const {
        const int k = get_int(j, "k", 0);
        if (k < 0) fail(400, "'k' must be >= 0");
        std::string text = "prop";
        if (j.contains("mode")) {
            if (!j.at("mode").is_string()) fail(400, "'mode' must be a string");
            text = j.at("mode").get<std::string>();
        }
        try {
            return proxy::parse_decode_mode(text, k);
        } catch (const Error& e) {
            fail(400, e.what());
        }
    }

    int horizon_of(const Json& j, int fallback) const {
        const int h = get_int(j, "horizon", fallback);
        const int limit = 10 * std::max(manifest->horizon, 1);
        if (h < 1 || h > limit)
            fail(400, "'horizon' must be in [1, " + std::to_string(limit) + "]");
        return h;
    }

    scenario::SimulationRecord simulate(const Plan& p, int horizon) const {
        sim_slots.acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{sim_slots};
        try {
            return sim::run_simulation(ensemble[static_cast<std::size_t>(p.realization)], p.actions,
                                       manifest->grid, manifest->simulator, horizon);
        } catch (const SolverError& e) {
            fail(503, std::string("simulator failed: ") + e.what(),
                 Json{{"step", e.step()}, {"residual", e.last_residual()}});
        }
    }

    Json rates_json(const Matrix& rates) const {
        const Matrix cum = metrics::cumulative(rates);
        return Json{{"columns", column_names(rates.cols())},
                    {"rates", matrix_json(rates)},
                    {"cumulative", matrix_json(cum)},
                    {"npv", metrics::npv(cum, config->npv)}};
    }

    /// One prediction object; `truth` is consulted only for modes that feed ground truth.
    Json predict_one(const proxy::ProxyModel<float>& model, const Plan& p, proxy::DecodeMode mode,
                     int horizon, const scenario::SimulationRecord* full_truth, double* sim_ms) const {
        const int steps = proxy::simulated_steps(mode, horizon);
        Matrix truth;
        double simulated_ms = 0.0;
        if (steps > 0) {
            if (full_truth) {
                truth = full_truth->rates;
            } else {
                const auto t0 = std::chrono::steady_clock::now();
                truth = simulate(p, steps).rates;
                simulated_ms = ms_since(t0);
            }
        }
        if (model.config().realizations <= p.realization)
            fail(404, "realization " + std::to_string(p.realization) + " is outside the model vocabulary");
        const auto t0 = std::chrono::steady_clock::now();
        const proxy::ProxyInput input{p.realization, p.actions};
        std::vector<Matrix> fed;
        if (steps > 0) fed.push_back(truth);
        auto pred = model.predict(std::span(&input, 1), mode, horizon, fed).front();
        const double proxy_ms = ms_since(t0);
        Matrix rates = proxy::clip_nonnegative(pred.rates);
        if (steps > 0) proxy::substitute_truth(rates, truth, mode);
        for (std::size_t t = 0; t < pred.mask.rows(); ++t) {
            double s = 0.0;
            for (double v : pred.mask.row(t)) s += v;
            if (std::abs(s - 1.0) > 1e-6) fail(500, "attention mask row " + std::to_string(t) + " sums to " + std::to_string(s));
        }
        Json out = rates_json(rates);
        out["mode"] = mode.label();
        out["horizon"] = horizon;
        out["mask"] = matrix_json(pred.mask);
        out["proxy_ms"] = proxy_ms;
        out["simulated_steps"] = steps;
        out["simulator_ms"] = simulated_ms;
        if (sim_ms) *sim_ms = simulated_ms;
        return out;
    }

    Json predict(const Json& j) const {
        std::string name;
        const auto& model = model_for(j, &name);
        const auto mode = mode_of(j);
        const int horizon = horizon_of(j, model.config().horizon);
        if (j.contains("batch")) {
            const auto& b = j.at("batch");
            if (!b.is_array() || b.empty()) fail(400, "'batch' must be a nonempty array");
            if (b.size() > config->max_batch)
                fail(400, "batch of " + std::to_string(b.size()) + " exceeds the limit of " +
                              std::to_string(config->max_batch));
            std::vector<Plan> plans;
            for (const auto& item : b) {
                if (!item.is_object()) fail(400, "batch entries must be objects");
                plans.push_back(parse_plan(item));
            }
            Json results = Json::array();
            if (proxy::simulated_steps(mode, horizon) == 0 && !plans.empty()) {
                // One batched forward pass for the whole request.
                std::vector<proxy::ProxyInput> inputs;
                for (const auto& p : plans) {
                    if (model.config().realizations <= p.realization)
                        fail(404, "realization " + std::to_string(p.realization) + " is outside the model vocabulary");
                    inputs.push_back({p.realization, p.actions});
                }
                const std::size_t K = inputs.front().actions.size();
                bool uniform = true;
                for (const auto& in : inputs) uniform = uniform && in.actions.size() == K;
                if (uniform) {
                    const auto t0 = std::chrono::steady_clock::now();
                    const auto preds = model.predict(inputs, mode, horizon);
                    const double ms = ms_since(t0) / static_cast<double>(inputs.size());
                    for (const auto& pr : preds) {
                        Json r = rates_json(proxy::clip_nonnegative(pr.rates));
                        r["mode"] = mode.label();
                        r["horizon"] = horizon;
                        r["mask"] = matrix_json(pr.mask);
                        r["proxy_ms"] = ms;
                        r["simulated_steps"] = 0;
                        r["simulator_ms"] = 0.0;
                        results.push_back(std::move(r));
                    }
                    return Json{{"api", kApiVersion}, {"model", name}, {"results", results}};
                }
            }
            for (const auto& p : plans) results.push_back(predict_one(model, p, mode, horizon, nullptr, nullptr));
            return Json{{"api", kApiVersion}, {"model", name}, {"results", results}};
        }
        const Plan p = parse_plan(j);
        Json out = predict_one(model, p, mode, horizon, nullptr, nullptr);
        out["api"] = kApiVersion;
        out["model"] = name;
        out["realization"] = p.realization;
        out["actions"] = scenario::to_tokens(p.actions);
        return out;
    }

    Json simulate_json(const Json& j) const {
        const Plan p = parse_plan(j);
        const int horizon = horizon_of(j, manifest->horizon);
        const auto t0 = std::chrono::steady_clock::now();
        const auto rec = simulate(p, horizon);
        Json out = rates_json(rec.rates);
        out["api"] = kApiVersion;
        out["realization"] = p.realization;
        out["actions"] = scenario::to_tokens(p.actions);
        out["horizon"] = horizon;
        out["control_multiplier"] = rec.control_multiplier;
        out["simulator_ms"] = ms_since(t0);
        return out;
    }

    Json compare(const Json& j) const {
        std::string name;
        const auto& model = model_for(j, &name);
        const auto mode = mode_of(j);
        const Plan p = parse_plan(j);
        const int horizon = horizon_of(j, model.config().horizon);
        const auto t0 = std::chrono::steady_clock::now();
        const auto rec = simulate(p, horizon);
        const double sim_ms = ms_since(t0);
        Json proxy_out = predict_one(model, p, mode, horizon, &rec, nullptr);

        const auto D = static_cast<std::size_t>(model.config().output_dim);
        const Matrix truth = rec.rates.block(rec.rates.rows(), 0, D);
        Matrix pred(truth.rows(), D);
        const auto& rows = proxy_out.at("rates");
        for (std::size_t t = 0; t < pred.rows(); ++t)
            for (std::size_t k = 0; k < D; ++k) pred(t, k) = rows[t][k].get<double>();
        Json error;
        try {
            const auto report = metrics::evaluate(std::span(&pred, 1), std::span(&truth, 1));
            error = Json::object();
            for (const auto& g : report.groups) error[g.name] = g.errors.front();
        } catch (const NumericError&) {
            error = nullptr;  // all-zero ground truth
        }
        Json sim_out = rates_json(truth);
        sim_out["control_multiplier"] = rec.control_multiplier;
        return Json{{"api", kApiVersion},
                    {"model", name},
                    {"realization", p.realization},
                    {"actions", scenario::to_tokens(p.actions)},
                    {"horizon", horizon},
                    {"proxy", proxy_out},
                    {"simulator", sim_out},
                    {"error", error},
                    {"proxy_ms", proxy_out.at("proxy_ms")},
                    {"simulator_ms", sim_ms}};
    }

    Json realizations() const {
        Json ids = Json::array();
        for (const auto& r : ensemble) ids.push_back(r.id);
        const auto& g = manifest->grid;
        return Json{{"api", kApiVersion},
                    {"count", ensemble.size()},
                    {"grid", Json{{"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz}}},
                    {"exclusion", manifest->policy.exclusion},
                    {"ids", ids}};
    }

    Json surface(int id) const {
        if (id < 0 || id >= static_cast<int>(ensemble.size()))
            fail(404, "unknown realization " + std::to_string(id));
        const auto& r = ensemble[static_cast<std::size_t>(id)];
        const auto& g = manifest->grid;
        Json poro = Json::array(), perm = Json::array(), shale = Json::array();
        for (int y = 0; y < g.ny; ++y) {
            Json pr = Json::array(), kr = Json::array(), sr = Json::array();
            for (int x = 0; x < g.nx; ++x) {
                double sp = 0.0, sk = 0.0, ss = 0.0;
                for (int z = 0; z < g.nz; ++z) {
                    const auto c = static_cast<std::size_t>(g.index(x, y, z));
                    sp += r.porosity[c];
                    sk += std::log(r.perm_h[c]);
                    ss += r.rock_type[c] == sim::RockType::shale ? 1.0 : 0.0;
                }
                pr.push_back(sp / g.nz);
                kr.push_back(sk / g.nz);
                sr.push_back(ss / g.nz);
            }
            poro.push_back(std::move(pr));
            perm.push_back(std::move(kr));
            shale.push_back(std::move(sr));
        }
        return Json{{"api", kApiVersion}, {"id", id},        {"nx", g.nx},
                    {"ny", g.ny},         {"porosity", poro}, {"ln_perm_h", perm},
                    {"shale_fraction", shale}};
    }

    Json model_list() const {
        Json list = Json::array();
        for (const auto& [name, m] : models) {
            const auto& c = m->config();
            list.push_back(Json{{"name", name},
                                {"preset", c.preset_name()},
                                {"output_dim", c.output_dim},
                                {"horizon", c.horizon},
                                {"sequence_length", c.sequence_length},
                                {"attention", proxy::to_string(c.attention)},
                                {"encoding", proxy::to_string(c.encoding)},
                                {"schedule", m->training.schedule},
                                {"best_valid_loss", m->training.best_valid_loss}});
        }
        return Json{{"api", kApiVersion}, {"models", list}};
    }
};

ProxyService::ProxyService(const ServiceConfig& config)
    : config_(config), impl_(std::make_unique<Impl>(config.simulator_workers)) {
    config_.validate();
    manifest_ = scenario::load_dataset(config_.dataset_dir).manifest;
    impl_->manifest = &manifest_;
    impl_->config = &config_;
    impl_->ensemble = scenario::generate_ensemble(manifest_.realizations, manifest_.geology_seed,
                                                  manifest_.grid, manifest_.geology);
    for (const auto& [name, path] : config_.models) {
        auto m = std::make_shared<const proxy::ProxyModel<float>>(proxy::load_checkpoint<float>(path));
        if (m->config().nx != manifest_.grid.nx || m->config().ny != manifest_.grid.ny)
            throw ConfigError("model '" + name + "' was trained on a different grid");
        impl_->models.emplace(name, std::move(m));
    }
}

ProxyService::ProxyService(const ServiceConfig& config, scenario::DatasetManifest manifest,
                           std::map<std::string, std::shared_ptr<const proxy::ProxyModel<float>>> models)
    : config_(config), manifest_(std::move(manifest)),
      impl_(std::make_unique<Impl>(config.simulator_workers)) {
    impl_->manifest = &manifest_;
    impl_->config = &config_;
    impl_->ensemble = scenario::generate_ensemble(manifest_.realizations, manifest_.geology_seed,
                                                  manifest_.grid, manifest_.geology);
    impl_->models = std::move(models);
}

ProxyService::~ProxyService() = default;

Response ProxyService::handle(const std::string& method, const std::string& path,
                              const std::string& body) const {
    static const std::regex surface_re(R"(/api/realizations/(-?[0-9]+)/surface)");
    try {
        std::smatch m;
        if (method == "GET" && path == "/api/realizations") return {200, impl_->realizations()};
        if (method == "GET" && std::regex_match(path, m, surface_re)) {
            int id = -1;
            try {
                id = std::stoi(m[1].str());
            } catch (const std::exception&) {
                fail(404, "unknown realization " + m[1].str());
            }
            return {200, impl_->surface(id)};
        }
        if (method == "GET" && path == "/api/models") return {200, impl_->model_list()};
        if (method == "POST" && path == "/api/predict") return {200, impl_->predict(parse_body(body))};
        if (method == "POST" && path == "/api/simulate") return {200, impl_->simulate_json(parse_body(body))};
        if (method == "POST" && path == "/api/compare") return {200, impl_->compare(parse_body(body))};
        if (path.starts_with("/api/")) {
            const bool known = path == "/api/realizations" || path == "/api/models" ||
                               path == "/api/predict" || path == "/api/simulate" ||
                               path == "/api/compare" || std::regex_match(path, m, surface_re);
            if (known) fail(405, "method " + method + " not allowed on " + path);
        }
        fail(404, "no route for " + method + " " + path);
    } catch (const HttpError& e) {
        Json body_out{{"api", kApiVersion}, {"status", e.status}, {"error", e.message}};
        for (auto it = e.detail.begin(); it != e.detail.end(); ++it) body_out[it.key()] = it.value();
        return {e.status, body_out};
    } catch (const ContractError& e) {
        return {400, Json{{"api", kApiVersion}, {"status", 400}, {"error", e.what()}}};
    } catch (const SolverError& e) {
        return {503, Json{{"api", kApiVersion}, {"status", 503}, {"error", e.what()}}};
    } catch (const std::exception& e) {
        return {500, Json{{"api", kApiVersion}, {"status", 500}, {"error", e.what()}}};
    }
}

void ProxyService::serve(const std::function<void(int)>& on_ready) {
    auto& svr = impl_->server;
    const int threads = config_.http_threads;
    svr.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    svr.Get(R"(/api/.*)", route);
    svr.Post(R"(/api/.*)", route);
    svr.Put(R"(/api/.*)", route);
    svr.Delete(R"(/api/.*)", route);
    int port = config_.port;
    if (port == 0) {
        port = svr.bind_to_any_port(config_.host);
        if (port < 0) throw ConfigError("cannot bind " + config_.host);
    } else if (!svr.bind_to_port(config_.host, port)) {
        throw ConfigError("cannot bind " + config_.host + ":" + std::to_string(port));
    }
    if (on_ready) on_ready(port);
    svr.listen_after_bind();
}

void ProxyService::stop() { impl_->server.stop(); }

}  // namespace resproxy::service
