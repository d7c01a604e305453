#include "fixtures.hpp"

#include "resproxy/experiments/experiments.hpp"
#include "resproxy/proxy/train.hpp"
#include "resproxy/service/service.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

#include <future>
#include <thread>

using namespace resproxy;
using namespace resproxy::service;

namespace {

std::shared_ptr<const proxy::ProxyModel<float>> toy_model() {
    const auto& data = fixtures::toy_dataset();
    proxy::ModelConfig c = proxy::ModelConfig::preset("64x1");
    c.hidden = 12;
    c.horizon = data.manifest.horizon;
    c = proxy::fit_to_dataset(c, data);
    proxy::TrainConfig t;
    t.epochs = 3;
    t.batch_size = 20;
    return std::make_shared<const proxy::ProxyModel<float>>(proxy::train_proxy(data, c, t));
}

class ServiceTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        model_ = toy_model();
        ServiceConfig cfg;
        cfg.dataset_dir = "unused";
        cfg.max_batch = 4;
        service_ = std::make_unique<ProxyService>(cfg, fixtures::toy_dataset().manifest,
                                                  std::map<std::string, std::shared_ptr<const proxy::ProxyModel<float>>>{
                                                      {"toy", model_}});
    }
    static void TearDownTestSuite() {
        service_.reset();
        model_.reset();
    }

    static Response post(const std::string& path, const Json& body) {
        return service_->handle("POST", path, body.dump());
    }

    static inline std::shared_ptr<const proxy::ProxyModel<float>> model_;
    static inline std::unique_ptr<ProxyService> service_;
};

Matrix rates_of(const Json& j) {
    const auto& rows = j.at("rates");
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t k = 0; k < m.cols(); ++k) m(t, k) = rows[t][k].get<double>();
    return m;
}

}  // namespace

TEST_F(ServiceTest, RealizationsAndSurface) {
    const auto r = service_->handle("GET", "/api/realizations", "");
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body.at("api"), kApiVersion);
    EXPECT_EQ(r.body.at("count"), 3);
    EXPECT_EQ(r.body.at("grid").at("nx"), 6);
    EXPECT_EQ(r.body.at("exclusion"), 2);

    const auto s = service_->handle("GET", "/api/realizations/1/surface", "");
    ASSERT_EQ(s.status, 200);
    ASSERT_EQ(s.body.at("porosity").size(), 6u);
    ASSERT_EQ(s.body.at("porosity")[0].size(), 6u);
    for (const auto& row : s.body.at("shale_fraction"))
        for (const auto& v : row) {
            EXPECT_GE(v.get<double>(), 0.0);
            EXPECT_LE(v.get<double>(), 1.0);
        }
    EXPECT_EQ(service_->handle("GET", "/api/realizations/3/surface", "").status, 404);
    EXPECT_EQ(service_->handle("GET", "/api/realizations/-1/surface", "").status, 404);
}

TEST_F(ServiceTest, ModelList) {
    const auto r = service_->handle("GET", "/api/models", "");
    ASSERT_EQ(r.status, 200);
    ASSERT_EQ(r.body.at("models").size(), 1u);
    const auto& m = r.body.at("models")[0];
    EXPECT_EQ(m.at("name"), "toy");
    EXPECT_EQ(m.at("output_dim"), 3);
    EXPECT_EQ(m.at("horizon"), 6);
    EXPECT_EQ(m.at("sequence_length"), 4);
}

TEST_F(ServiceTest, PredictMatchesLibraryPredictions) {
    const auto& data = fixtures::toy_dataset();
    const auto test = data.indices(scenario::Partition::test);
    for (const char* mode : {"prop", "gt"}) {
        const auto lib = experiments::proxy_predictions(*model_, data, test, proxy::parse_decode_mode(mode, 0), 6);
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto& rec = data.records[test[i]];
            const auto r = post("/api/predict", Json{{"model", "toy"},
                                                     {"mode", mode},
                                                     {"realization", rec.realization_id},
                                                     {"actions", scenario::to_tokens(rec.actions)}});
            ASSERT_EQ(r.status, 200) << r.body.dump();
            EXPECT_EQ(rates_of(r.body), lib[i]) << mode;
            // gt feeds the previous step's truth, so the last row is never needed.
            EXPECT_EQ(r.body.at("simulated_steps"), std::string(mode) == "gt" ? 5 : 0);
            for (const auto& row : r.body.at("mask")) {
                double s = 0.0;
                for (const auto& v : row) s += v.get<double>();
                EXPECT_NEAR(s, 1.0, 1e-6);
            }
        }
    }
}

TEST_F(ServiceTest, HybridPredictTakesLeadingRowsFromSimulator) {
    const auto& rec = fixtures::toy_dataset().records[0];
    const auto r = post("/api/predict", Json{{"mode", "hybrid"},
                                             {"k", 2},
                                             {"realization", rec.realization_id},
                                             {"actions", scenario::to_string(rec.actions)}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    const auto m = rates_of(r.body);
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(m(t, k), rec.rates(t, k));
    EXPECT_EQ(r.body.at("simulated_steps"), 2);
    EXPECT_EQ(r.body.at("mode"), proxy::DecodeMode::hybrid(2).label());
}

TEST_F(ServiceTest, BatchPredictEqualsSingleRequests) {
    const auto& data = fixtures::toy_dataset();
    Json batch = Json::array();
    std::vector<Matrix> singles;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& rec = data.records[i];
        Json item{{"realization", rec.realization_id}, {"actions", scenario::to_tokens(rec.actions)}};
        singles.push_back(rates_of(post("/api/predict", item).body));
        batch.push_back(item);
    }
    const auto r = post("/api/predict", Json{{"batch", batch}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    ASSERT_EQ(r.body.at("results").size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(rates_of(r.body.at("results")[i]), singles[i]);

    batch.push_back(batch[0]);
    const auto over = post("/api/predict", Json{{"batch", batch}});
    EXPECT_EQ(over.status, 400);
    EXPECT_NE(over.body.at("error").get<std::string>().find("limit"), std::string::npos);
}

TEST_F(ServiceTest, SimulateMatchesStoredRecord) {
    const auto& rec = fixtures::toy_dataset().records[5];
    const auto r = post("/api/simulate", Json{{"realization", rec.realization_id},
                                              {"actions", scenario::to_tokens(rec.actions)}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    EXPECT_EQ(rates_of(r.body), rec.rates);
    EXPECT_EQ(r.body.at("columns").size(), scenario::kRatesWithWells);
    EXPECT_EQ(r.body.at("columns")[3], "WOPR1");
    const auto& cum = r.body.at("cumulative");
    EXPECT_NEAR(cum[5][0].get<double>(), metrics::cumulative(rec.rates)(5, 0), 1e-9);
}

TEST_F(ServiceTest, CompareErrorMatchesMetrics) {
    const auto& rec = fixtures::toy_dataset().records[9];
    const auto r = post("/api/compare", Json{{"realization", rec.realization_id},
                                             {"actions", scenario::to_tokens(rec.actions)}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    const Matrix pred = rates_of(r.body.at("proxy"));
    const Matrix truth = rates_of(r.body.at("simulator"));
    EXPECT_EQ(truth, rec.rates.block(6, 0, 3));
    if (!r.body.at("error").is_null()) {
        EXPECT_NEAR(r.body.at("error").at("total").get<double>(),
                    metrics::relative_sequence_error(std::span(&pred, 1), std::span(&truth, 1), 0, 3)[0], 1e-12);
    }
}

TEST_F(ServiceTest, ErrorStatuses) {
    // Malformed token
    auto r = post("/api/predict", Json{{"realization", 0}, {"actions", {"P(1,1)", "Q(2,2)"}}});
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(r.body.at("token"), "Q(2,2)");
    // Off the grid
    r = post("/api/predict", Json{{"realization", 0}, {"actions", "P(99,0)-x-x-x"}});
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(r.body.at("token"), "P(99,0)");
    EXPECT_EQ(r.body.at("index"), 0);
    // Exclusion zone
    r = post("/api/simulate", Json{{"realization", 0}, {"actions", "P(1,1)-I(2,2)-x-x"}});
    EXPECT_EQ(r.status, 422);
    EXPECT_EQ(r.body.at("index"), 1);
    EXPECT_EQ(r.body.at("status"), 422);
    // Unknown things
    EXPECT_EQ(post("/api/predict", Json{{"realization", 7}, {"actions", "x"}}).status, 404);
    EXPECT_EQ(post("/api/predict", Json{{"model", "nope"}, {"realization", 0}, {"actions", "x"}}).status, 404);
    EXPECT_EQ(service_->handle("GET", "/api/nothing", "").status, 404);
    // Wrong method on a known route
    EXPECT_EQ(service_->handle("GET", "/api/predict", "").status, 405);
    EXPECT_EQ(service_->handle("DELETE", "/api/models", "").status, 405);
    // Bad bodies
    EXPECT_EQ(service_->handle("POST", "/api/predict", "{not json").status, 400);
    EXPECT_EQ(service_->handle("POST", "/api/predict", "[1,2]").status, 400);
    EXPECT_EQ(post("/api/predict", Json{{"realization", 0}}).status, 400);
    EXPECT_EQ(post("/api/predict", Json{{"realization", 0}, {"actions", "x"}, {"mode", "sideways"}}).status, 400);
    EXPECT_EQ(post("/api/predict", Json{{"realization", 0}, {"actions", "x"}, {"horizon", 0}}).status, 400);
}

TEST(Service, SolverFailureIs503) {
    auto manifest = fixtures::toy_dataset().manifest;
    manifest.simulator.newton_max_iter = 1;
    manifest.simulator.max_dt_chops = 0;
    manifest.simulator.newton_tol = 1e-14;
    ServiceConfig cfg;
    cfg.dataset_dir = "unused";
    const ProxyService svc(cfg, manifest, {});
    const auto r = svc.handle("POST", "/api/simulate", Json{{"realization", 0}, {"actions", "P(1,1)-I(4,4)"}}.dump());
    EXPECT_EQ(r.status, 503) << r.body.dump();
    EXPECT_TRUE(r.body.contains("step"));
    EXPECT_EQ(svc.handle("POST", "/api/predict", Json{{"realization", 0}, {"actions", "x"}}.dump()).status, 404);
}

TEST(Service, ConfigValidation) {
    ServiceConfig c;
    EXPECT_THROW(c.validate(), ConfigError);
    c.dataset_dir = "d";
    EXPECT_NO_THROW(c.validate());
    c.port = 70000;
    EXPECT_THROW(c.validate(), ConfigError);
    c.port = 0;
    c.max_batch = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.dataset_dir = "/nonexistent/dataset";
    c.max_batch = 1;
    EXPECT_THROW(ProxyService{c}, DataError);
}

TEST_F(ServiceTest, ConcurrentRequestsMatchSerialOnes) {
    const auto& data = fixtures::toy_dataset();
    std::vector<std::string> bodies;
    for (std::size_t i = 0; i < 16; ++i) {
        const auto& rec = data.records[i];
        const char* path_mode = i % 2 ? "gt" : "prop";
        bodies.push_back(Json{{"mode", path_mode},
                              {"realization", rec.realization_id},
                              {"actions", scenario::to_tokens(rec.actions)}}
                             .dump());
    }
    std::vector<Json> serial;
    for (const auto& b : bodies) serial.push_back(service_->handle("POST", "/api/predict", b).body);
    std::vector<std::future<Response>> futures;
    for (const auto& b : bodies)
        futures.push_back(std::async(std::launch::async, [&b] { return service_->handle("POST", "/api/predict", b); }));
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        auto r = futures[i].get();
        ASSERT_EQ(r.status, 200);
        EXPECT_EQ(r.body.at("rates"), serial[i].at("rates"));
        EXPECT_EQ(r.body.at("mask"), serial[i].at("mask"));
    }
}

TEST_F(ServiceTest, ServesOverHttp) {
    ServiceConfig cfg;
    cfg.dataset_dir = "unused";
    cfg.port = 0;
    ProxyService svc(cfg, fixtures::toy_dataset().manifest, {{"toy", model_}});
    std::promise<int> ready;
    std::thread server([&] { svc.serve([&](int port) { ready.set_value(port); }); });
    const int port = ready.get_future().get();
    httplib::Client client("127.0.0.1", port);
    // listen_after_bind may not have started accepting yet.
    httplib::Result res;
    for (int i = 0; i < 50 && !(res = client.Get("/api/models")); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(Json::parse(res->body).at("models")[0].at("name"), "toy");

    const auto& rec = fixtures::toy_dataset().records[2];
    const Json body{{"realization", rec.realization_id}, {"actions", scenario::to_tokens(rec.actions)}};
    auto p = client.Post("/api/predict", body.dump(), "application/json");
    ASSERT_TRUE(p);
    EXPECT_EQ(p->status, 200);
    EXPECT_EQ(Json::parse(p->body).at("rates"), svc.handle("POST", "/api/predict", body.dump()).body.at("rates"));
    auto bad = client.Post("/api/simulate", R"x({"realization": 0, "actions": "P(1,1)-P(1,2)"})x", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 422);
    auto m = client.Put("/api/predict", "{}", "application/json");
    ASSERT_TRUE(m);
    EXPECT_EQ(m->status, 405);
    svc.stop();
    server.join();
}
