#include "resproxy/common/errors.hpp"
#include "resproxy/experiments/experiments.hpp"
#include "resproxy/metrics/metrics.hpp"
#include "resproxy/proxy/train.hpp"
#include "resproxy/scenario/dataset.hpp"
#include "resproxy/service/service.hpp"
#include "resproxy/sim/upscale.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

using namespace resproxy;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::data: return 3;
        case ErrorCategory::solver: return 4;
        case ErrorCategory::numeric: return 5;
        case ErrorCategory::contract: return 6;
    }
    return 1;
}

/// Relative paths resolve against RESPROXY_DATA_ROOT when it is set.
std::string resolve(const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    if (const char* root = std::getenv("RESPROXY_DATA_ROOT"); root && *root)
        return (fs::path(root) / path).string();
    return path;
}

void log_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

void print_epoch(const proxy::EpochLog& e) {
    std::fprintf(stderr, "[%s] epoch %3d  train %.5f  valid %.5f  (%.2fs)\n", e.phase.c_str(),
                 e.epoch, e.train_loss, e.valid_loss, e.seconds);
}

scenario::Partition parse_partition(const std::string& p) {
    if (p == "train") return scenario::Partition::train;
    if (p == "valid") return scenario::Partition::valid;
    if (p == "test") return scenario::Partition::test;
    throw ConfigError("unknown partition '" + p + "'");
}

void write_report(const std::string& path, const Json& j) {
    if (path.empty()) return;
    write_text_file(resolve(path), j.dump(2) + "\n");
}

struct ModelOptions {
    std::string preset = "64x1";
    int horizon = 0;  // 0: dataset horizon
    int dims = 3;
    std::string attention = "all_layers";
    std::string encoding = "factored";
    bool no_geology = false;
    std::uint64_t seed = 1;

    void add(CLI::App* app) {
        app->add_option("--model", preset, "Model preset (64x1, 128x5, 1024x2)");
        app->add_option("--horizon", horizon, "Training horizon T (default: dataset horizon)");
        app->add_option("--dims", dims, "Output dimension D (3 field rates or 23 with wells)");
        app->add_option("--attention", attention, "none, top_layer or all_layers");
        app->add_option("--encoding", encoding, "factored or joint");
        app->add_flag("--no-geology", no_geology, "Drop the geology features");
        app->add_option("--seed", seed, "Initialization and shuffling seed");
    }
    proxy::ModelConfig config(const scenario::Dataset& data, const Json* base) const {
        proxy::ModelConfig c = base ? proxy::model_config_from_json(*base) : proxy::ModelConfig::preset(preset);
        if (!base) {
            c.attention = proxy::parse_attention(attention);
            c.encoding = proxy::parse_encoding(encoding);
            c.geology = !no_geology;
            c.output_dim = dims;
            c.seed = seed;
        }
        c.horizon = horizon > 0 ? horizon : data.manifest.horizon;
        return proxy::fit_to_dataset(c, data);
    }
};

struct TrainOptions {
    std::string schedule = "gt_pretrain_then_prop";
    int k = 1;
    int epochs = 200;
    int patience = 20;
    int batch = 100;
    double lr = 1e-3;
    double finetune_lr = 2e-4;

    void add(CLI::App* app) {
        app->add_option("--schedule", schedule,
                        "gt_only, prop_only, gt_pretrain_then_prop or hybridprop");
        app->add_option("--k", k, "Leading ground-truth steps for hybridprop");
        app->add_option("--epochs", epochs, "Epochs per phase");
        app->add_option("--patience", patience, "Early-stopping patience (0 disables)");
        app->add_option("--batch", batch, "Batch size");
        app->add_option("--lr", lr, "Learning rate");
        app->add_option("--finetune-lr", finetune_lr, "Learning rate of the prop phase");
    }
    proxy::TrainConfig config(std::uint64_t seed, const Json* base) const {
        proxy::TrainConfig t;
        if (base) return proxy::train_config_from_json(*base);
        t.schedule = proxy::parse_schedule(schedule);
        t.hybrid_k = k;
        t.epochs = epochs;
        t.patience = patience;
        t.batch_size = batch;
        t.lr = lr;
        t.finetune_lr = finetune_lr;
        t.seed = seed;
        t.validate();
        return t;
    }
};

proxy::DecodeMode decode_mode(const std::string& mode, int k) { return proxy::parse_decode_mode(mode, k); }

service::ProxyService* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned reservoir simulation proxy: data generation, training, evaluation and serving"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Simulate a dataset of drilling plans");
    std::string gen_config, gen_out, gen_from, gen_name, gen_preset, gen_control;
    int gen_n = 0, gen_r = 0, gen_t = 0, gen_k = 0, gen_workers = 0;
    std::uint64_t gen_seed = 0, gen_geo_seed = 0, gen_split_seed = 0;
    gen->add_option("--config", gen_config, "Dataset JSON document");
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--truncate-from", gen_from, "Derive from an existing dataset by truncating its horizon");
    gen->add_option("--name", gen_name, "Dataset name");
    gen->add_option("--n-sims", gen_n, "Number of simulations");
    gen->add_option("--realizations", gen_r, "Realization count R");
    gen->add_option("--horizon", gen_t, "Time steps T");
    gen->add_option("--length", gen_k, "Action sequence length K");
    gen->add_option("--grid-preset", gen_preset, "spe9-full or desk");
    gen->add_option("--control-mode", gen_control, "fixed or optimized");
    gen->add_option("--seed", gen_seed, "Record sampling seed");
    gen->add_option("--geology-seed", gen_geo_seed, "Realization ensemble seed");
    gen->add_option("--split-seed", gen_split_seed, "Partition seed");
    gen->add_option("--workers", gen_workers, "Simulation threads");

    // train
    auto* train = app.add_subcommand("train", "Train a proxy model");
    std::string tr_data, tr_out, tr_config, tr_log;
    ModelOptions tr_model;
    TrainOptions tr_opts;
    train->add_option("--data", tr_data, "Dataset directory")->required();
    train->add_option("--out", tr_out, "Checkpoint path")->required();
    train->add_option("--config", tr_config, "JSON with optional \"model\" and \"train\" objects");
    train->add_option("--log", tr_log, "Training log (JSON lines)");
    tr_model.add(train);
    tr_opts.add(train);

    // eval
    auto* eval = app.add_subcommand("eval", "Score checkpoints and baselines on a partition");
    std::string ev_data, ev_mode = "prop", ev_partition = "test", ev_report, ev_csv, ev_baselines;
    std::vector<std::string> ev_ckpts;
    int ev_k = 0, ev_horizon = 0, ev_dims = 0;
    eval->add_option("--data", ev_data, "Dataset directory")->required();
    eval->add_option("--checkpoint", ev_ckpts, "Checkpoint path (repeatable)");
    eval->add_option("--mode", ev_mode, "gt, prop or hybrid");
    eval->add_option("--k", ev_k, "Leading ground-truth steps for hybrid");
    eval->add_option("--horizon", ev_horizon, "Evaluation horizon (default: model horizon)");
    eval->add_option("--dims", ev_dims, "Output columns for baselines (default: first checkpoint's, else 3)");
    eval->add_option("--partition", ev_partition, "train, valid or test");
    eval->add_option("--baselines", ev_baselines, "Comma list of mean,tsm,up2,up3");
    eval->add_option("--report", ev_report, "JSON report path");
    eval->add_option("--csv", ev_csv, "Per-step error CSV of the first checkpoint");

    // bench
    auto* bench = app.add_subcommand("bench", "Time simulator, upscaled and proxy runs");
    std::string bn_data, bn_ckpt, bn_report;
    int bn_runs = 100, bn_horizon = 0;
    bench->add_option("--data", bn_data, "Dataset directory")->required();
    bench->add_option("--checkpoint", bn_ckpt, "Checkpoint path")->required();
    bench->add_option("--n-runs", bn_runs, "Timed runs per runner");
    bench->add_option("--horizon", bn_horizon, "Simulated steps (default: model horizon)");
    bench->add_option("--report", bn_report, "JSON report path");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a multi-model experiment");
    exp->require_subcommand(1);
    auto* lc = exp->add_subcommand("learning-curve", "Error vs TRAIN size (repeated halving)");
    auto* ex = exp->add_subcommand("extrapolate", "Train at T, evaluate at the dataset horizon");
    auto* hy = exp->add_subcommand("hybrid", "Prop vs hybridprop(k) on an optimized-control dataset");
    std::string ex_data, ex_report, ex_ckpt;
    ModelOptions ex_model;
    TrainOptions ex_train;
    std::size_t lc_min = 100;
    std::vector<int> hy_ks{1};
    for (auto* sub : {lc, ex, hy}) {
        sub->add_option("--data", ex_data, "Dataset directory")->required();
        sub->add_option("--report", ex_report, "JSON report path");
        ex_model.add(sub);
        ex_train.add(sub);
    }
    lc->add_option("--min-size", lc_min, "Smallest TRAIN size");
    ex->add_option("--checkpoint", ex_ckpt, "Use this model instead of training one");
    hy->add_option("--ks", hy_ks, "k values")->delimiter(',');

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP API for the planner UI");
    service::ServiceConfig sv;
    std::vector<std::string> sv_models;
    serve->add_option("--data", sv.dataset_dir, "Dataset directory (grid, geology, simulator)")->required();
    serve->add_option("--checkpoint", sv_models, "name=path (repeatable)");
    serve->add_option("--host", sv.host, "Bind address");
    serve->add_option("--port", sv.port, "Port (0 picks one)");
    serve->add_option("--max-batch", sv.max_batch, "Largest /api/predict batch");
    serve->add_option("--workers", sv.simulator_workers, "Concurrent simulator runs");
    serve->add_option("--threads", sv.http_threads, "HTTP worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            const auto out = resolve(gen_out);
            scenario::DatasetManifest m;
            if (!gen_from.empty()) {
                if (gen_t < 1) throw ConfigError("--truncate-from needs --horizon");
                const auto src = scenario::load_dataset(resolve(gen_from));
                m = scenario::truncate_dataset(src, gen_t, out,
                                               gen_name.empty() ? src.manifest.name + "-t" + std::to_string(gen_t) : gen_name);
            } else {
                scenario::DatasetSpec spec;
                if (!gen_config.empty()) spec = scenario::dataset_spec_from_json(read_json_file(resolve(gen_config)));
                if (!gen_name.empty()) spec.name = gen_name;
                if (gen_n) spec.n_sims = gen_n;
                if (gen_r) spec.realizations = gen_r;
                if (gen_t) spec.horizon = gen_t;
                if (gen_k) spec.policy.length = gen_k;
                if (!gen_preset.empty()) spec.grid = sim::GridSpec::preset(gen_preset);
                if (!gen_control.empty()) spec.simulator.control_mode = scenario::parse_control_mode(gen_control);
                if (gen->count("--seed")) spec.seed = gen_seed;
                if (gen->count("--geology-seed")) spec.geology_seed = gen_geo_seed;
                if (gen->count("--split-seed")) spec.split_seed = gen_split_seed;
                if (gen_workers) spec.workers = gen_workers;
                spec.validate();
                m = scenario::generate_dataset(spec, out, log_line);
            }
            std::printf("%s: %lld records (train %lld / valid %lld / test %lld), K=%d T=%d, %zu failed attempts\n",
                        m.name.c_str(), static_cast<long long>(m.n_records),
                        static_cast<long long>(m.counts[0]), static_cast<long long>(m.counts[1]),
                        static_cast<long long>(m.counts[2]), m.sequence_length, m.horizon,
                        m.failures.size());
            return 0;
        }

        if (*train) {
            const auto data = scenario::load_dataset(resolve(tr_data));
            Json doc;
            if (!tr_config.empty()) doc = read_json_file(resolve(tr_config));
            const Json* model_doc = doc.contains("model") ? &doc["model"] : nullptr;
            const Json* train_doc = doc.contains("train") ? &doc["train"] : nullptr;
            auto mc = tr_model.config(data, model_doc);
            auto tc = tr_opts.config(tr_model.seed, train_doc);
            if (!tr_log.empty()) tc.log_path = resolve(tr_log);
            const auto model = proxy::train_proxy(data, mc, tc, print_epoch);
            proxy::save_checkpoint(resolve(tr_out), model);
            std::printf("saved %s (%s, %s, best VALID loss %.5f at epoch %d)\n", tr_out.c_str(),
                        mc.preset_name().c_str(), model.training.schedule.c_str(),
                        model.training.best_valid_loss, model.training.best_epoch);
            return 0;
        }

        if (*eval) {
            const auto data = scenario::load_dataset(resolve(ev_data));
            const auto part = parse_partition(ev_partition);
            const auto mode = decode_mode(ev_mode, ev_k);
            std::vector<experiments::TableRow> rows;
            Json report{{"dataset", data.manifest.name}, {"partition", ev_partition}, {"mode", mode.label()}};
            Json entries = Json::array();
            int dims = ev_dims;
            int horizon = ev_horizon;
            auto add_row = [&](const std::string& name, const metrics::ErrorReport& r) {
                experiments::TableRow row{name, r.mean};
                for (const auto& g : r.groups) {
                    if (g.name == "field") row.field = g.mean;
                    if (g.name == "wells") row.wells = g.mean;
                }
                rows.push_back(row);
                Json e = to_json(r);
                e["configuration"] = name;
                entries.push_back(std::move(e));
            };
            for (std::size_t i = 0; i < ev_ckpts.size(); ++i) {
                const auto model = proxy::load_checkpoint<float>(resolve(ev_ckpts[i]));
                const int h = ev_horizon > 0 ? ev_horizon : model.config().horizon;
                if (dims == 0) dims = model.config().output_dim;
                if (horizon == 0) horizon = h;
                const auto r = experiments::evaluate_proxy(model, data, part, mode, h);
                add_row(fs::path(ev_ckpts[i]).stem().string() + " [" + model.config().preset_name() +
                            ", " + mode.label() + "]",
                        r);
                if (i == 0 && !ev_csv.empty()) write_text_file(resolve(ev_csv), metrics::per_step_csv(r));
            }
            if (dims == 0) dims = 3;
            if (horizon == 0) horizon = data.manifest.horizon;
            std::stringstream ss(ev_baselines);
            for (std::string b; std::getline(ss, b, ',');) {
                if (b.empty()) continue;
                if (b == "mean" || b == "tsm") {
                    add_row(b == "mean" ? "Mean" : "TSM",
                            experiments::evaluate_fixed(data, baselines::parse_fixed_kind(b), part, horizon, dims));
                } else if (b == "up2" || b == "up3") {
                    const auto r = experiments::evaluate_upscaled(data, b == "up2" ? 2 : 3, part, horizon, dims);
                    add_row(b == "up2" ? "UP2" : "UP3", r.report);
                } else {
                    throw ConfigError("unknown baseline '" + b + "'");
                }
            }
            if (rows.empty()) throw ConfigError("nothing to evaluate: pass --checkpoint and/or --baselines");
            std::printf("%s", experiments::format_table(rows).c_str());
            report["results"] = entries;
            write_report(ev_report, report);
            return 0;
        }

        if (*bench) {
            const auto data = scenario::load_dataset(resolve(bn_data));
            const auto model = proxy::load_checkpoint<float>(resolve(bn_ckpt));
            const int horizon = bn_horizon > 0 ? bn_horizon : model.config().horizon;
            const auto test = data.indices(scenario::Partition::test);
            const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(bn_runs), test.size());
            if (n == 0) throw DataError("TEST partition is empty");
            const std::vector<std::size_t> idx(test.begin(), test.begin() + static_cast<std::ptrdiff_t>(n));
            const auto& m = data.manifest;
            const auto ensemble = scenario::generate_ensemble(m.realizations, m.geology_seed, m.grid, m.geology);
            std::vector<sim::CoarseModel> up2;
            for (const auto& r : ensemble) up2.push_back(sim::upscale(r, m.grid, 2));
            const auto inputs = proxy::inputs_of(data, idx);

            std::vector<metrics::TimingReport> reports;
            reports.push_back(metrics::time_runner("simulator", [&](std::size_t i) {
                const auto& rec = data.records[idx[i % n]];
                (void)sim::run_simulation(ensemble[static_cast<std::size_t>(rec.realization_id)], rec.actions, m.grid, m.simulator, horizon);
            }, n));
            reports.push_back(metrics::time_runner("upscaled-2", [&](std::size_t i) {
                const auto& rec = data.records[idx[i % n]];
                (void)baselines::upscaled_predict(up2[static_cast<std::size_t>(rec.realization_id)], rec.actions, m.simulator, horizon);
            }, n));
            reports.push_back(metrics::time_runner("proxy", [&](std::size_t i) {
                (void)model.predict(std::span(&inputs[i % n], 1), proxy::DecodeMode::prop(), horizon);
            }, n));
            reports.push_back(metrics::time_runner("proxy", [&](std::size_t) {
                (void)model.predict(inputs, proxy::DecodeMode::prop(), horizon);
            }, n, n));
            Json out = Json::array();
            std::printf("%-12s %6s %10s %10s %10s %10s\n", "runner", "batch", "mean ms", "std ms", "min ms", "max ms");
            for (const auto& r : reports) {
                std::printf("%-12s %6zu %10.3f %10.3f %10.3f %10.3f\n", r.runner.c_str(), r.batch,
                            r.mean_ms, r.std_ms, r.min_ms, r.max_ms);
                out.push_back(to_json(r));
            }
            std::printf("speedup (simulator / proxy batch 1): %.0fx\n", reports[0].mean_ms / reports[2].mean_ms);
            write_report(bn_report, Json{{"dataset", m.name}, {"horizon", horizon}, {"runners", out}});
            return 0;
        }

        if (*exp) {
            const auto data = scenario::load_dataset(resolve(ex_data));
            Json report{{"dataset", data.manifest.name}};
            if (*lc) {
                const auto mc = ex_model.config(data, nullptr);
                const auto tc = ex_train.config(ex_model.seed, nullptr);
                const auto curve = experiments::learning_curve(data, mc, tc, lc_min, ex_model.seed, print_epoch);
                Json rows = Json::array();
                std::printf("%10s %10s\n", "train", "error");
                for (const auto& p : curve) {
                    std::printf("%10zu %9.2f%%\n", p.train_size, 100.0 * p.test_error);
                    rows.push_back(Json{{"train_size", p.train_size}, {"test_error", p.test_error},
                                        {"valid_loss", p.valid_loss}});
                }
                report["learning_curve"] = rows;
            } else if (*ex) {
                const int full = data.manifest.horizon;
                const int short_t = ex_model.horizon > 0 ? ex_model.horizon : full / 2;
                auto mopts = ex_model;
                mopts.horizon = short_t;
                const auto model = ex_ckpt.empty()
                                       ? proxy::train_proxy(data, mopts.config(data, nullptr),
                                                            ex_train.config(ex_model.seed, nullptr), print_epoch)
                                       : proxy::load_checkpoint<float>(resolve(ex_ckpt));
                const int d = model.config().output_dim;
                const auto at_train = experiments::evaluate_proxy(model, data, scenario::Partition::test,
                                                                  proxy::DecodeMode::prop(), model.config().horizon);
                const auto at_full = experiments::evaluate_proxy(model, data, scenario::Partition::test,
                                                                 proxy::DecodeMode::prop(), full);
                const auto tsm = experiments::evaluate_fixed(data, baselines::FixedKind::tsm,
                                                             scenario::Partition::test, full, d, model.config().horizon);
                std::printf("%s", experiments::format_table({
                    {"proxy T=" + std::to_string(model.config().horizon), at_train.mean},
                    {"proxy T=" + std::to_string(full), at_full.mean},
                    {"TSM T=" + std::to_string(full), tsm.mean}}).c_str());
                report["train_horizon"] = model.config().horizon;
                report["eval_horizon"] = full;
                report["proxy_train_horizon"] = to_json(at_train);
                report["proxy_eval_horizon"] = to_json(at_full);
                report["tsm_eval_horizon"] = to_json(tsm);
            } else if (*hy) {
                const auto mc = ex_model.config(data, nullptr);
                auto tc = ex_train.config(ex_model.seed, nullptr);
                std::vector<experiments::TableRow> rows;
                Json entries = Json::array();
                const auto prop_model = proxy::train_proxy(data, mc, tc, print_epoch);
                const auto prop = experiments::evaluate_proxy(prop_model, data, scenario::Partition::test,
                                                              proxy::DecodeMode::prop(), mc.horizon);
                rows.push_back({"Prop (" + prop_model.training.schedule + ")", prop.mean});
                entries.push_back(Json{{"mode", "prop"}, {"report", to_json(prop)}});
                for (int k : hy_ks) {
                    tc.schedule = proxy::Schedule::hybridprop;
                    tc.hybrid_k = k;
                    const auto model = proxy::train_proxy(data, mc, tc, print_epoch);
                    const auto mode = proxy::DecodeMode::hybrid(k);
                    const auto r = experiments::evaluate_proxy(model, data, scenario::Partition::test, mode, mc.horizon, true);
                    const auto raw = experiments::evaluate_proxy(model, data, scenario::Partition::test, mode, mc.horizon, false);
                    rows.push_back({"HybridProp k=" + std::to_string(k), r.mean});
                    rows.push_back({"HybridProp k=" + std::to_string(k) + " (decoder only)", raw.mean});
                    entries.push_back(Json{{"mode", mode.label()}, {"report", to_json(r)}, {"decoder_only", to_json(raw)}});
                }
                std::printf("%s", experiments::format_table(rows).c_str());
                report["results"] = entries;
            }
            write_report(ex_report, report);
            return 0;
        }

        if (*serve) {
            sv.dataset_dir = resolve(sv.dataset_dir);
            for (const auto& spec : sv_models) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos || eq == 0) throw ConfigError("--checkpoint expects name=path, got '" + spec + "'");
                const auto path = resolve(spec.substr(eq + 1));
                if (!fs::exists(path)) throw ConfigError("checkpoint '" + path + "' does not exist");
                sv.models[spec.substr(0, eq)] = path;
            }
            service::ProxyService svc(sv);
            g_service = &svc;
            std::signal(SIGINT, [](int) { if (g_service) g_service->stop(); });
            std::signal(SIGTERM, [](int) { if (g_service) g_service->stop(); });
            svc.serve([&](int port) {
                std::printf("listening on http://%s:%d (%zu models)\n", sv.host.c_str(), port, sv.models.size());
                std::fflush(stdout);
            });
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.category()), e.what());
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
