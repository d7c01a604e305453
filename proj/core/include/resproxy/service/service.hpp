#pragma once

#include "resproxy/common/json_util.hpp"
#include "resproxy/metrics/metrics.hpp"
#include "resproxy/proxy/proxy.hpp"
#include "resproxy/scenario/dataset.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace resproxy::service {

inline constexpr const char* kApiVersion = "resproxy.api/1";

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;                   // 0 picks a free port
    std::string dataset_dir;           // manifest supplies grid, geology and simulator settings
    std::map<std::string, std::string> models;  // name -> checkpoint path
    std::size_t max_batch = 1000;
    int simulator_workers = 2;
    int http_threads = 8;
    metrics::NpvParams npv;

    void validate() const;
};

struct Response {
    int status = 200;
    Json body;
};

/// Request handling for the HTTP API, independent of the transport.
///
/// All state is read-only after construction, so handle() may run concurrently.
class ProxyService {
public:
    /// Loads the manifest, regenerates the realization ensemble and loads every checkpoint.
    explicit ProxyService(const ServiceConfig& config);
    /// Pre-built state, mainly for tests.
    ProxyService(const ServiceConfig& config, scenario::DatasetManifest manifest,
                 std::map<std::string, std::shared_ptr<const proxy::ProxyModel<float>>> models);
    ~ProxyService();

    Response handle(const std::string& method, const std::string& path, const std::string& body) const;

    /// Blocks serving HTTP until stop(). Calls `on_ready(port)` once listening.
    void serve(const std::function<void(int)>& on_ready = {});
    void stop();

    [[nodiscard]] const scenario::DatasetManifest& manifest() const noexcept { return manifest_; }

private:
    struct Impl;
    ServiceConfig config_;
    scenario::DatasetManifest manifest_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace resproxy::service
