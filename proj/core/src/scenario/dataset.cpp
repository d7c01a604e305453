#include "resproxy/scenario/dataset.hpp"

#include "resproxy/common/errors.hpp"
#include "resproxy/common/random.hpp"
#include "resproxy/sim/config_json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

namespace resproxy::scenario {

namespace fs = std::filesystem;

const char* to_string(Partition p) noexcept {
    switch (p) {
        case Partition::train: return "train";
        case Partition::valid: return "valid";
        case Partition::test: return "test";
    }
    return "?";
}

void DatasetSpec::validate() const {
    if (n_sims < 1) throw ConfigError("n_sims must be >= 1");
    if (realizations < 1) throw ConfigError("realization count must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ConfigError("partition fractions must be >= 0");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("partition fractions must sum to 1");
    grid.validate();
    geology.validate();
    simulator.validate();
    policy.validate();
}

Json to_json(const DatasetSpec& s) {
    return Json{{"name", s.name},
                {"n_sims", s.n_sims},
                {"realizations", s.realizations},
                {"horizon", s.horizon},
                {"seed", s.seed},
                {"geology_seed", s.geology_seed},
                {"split_seed", s.split_seed},
                {"fractions", s.fractions},
                {"grid", sim::to_json(s.grid)},
                {"geology", sim::to_json(s.geology)},
                {"simulator", sim::to_json(s.simulator)},
                {"policy", to_json(s.policy)},
                {"workers", s.workers},
                {"max_attempts", s.max_attempts},
                {"max_failure_rate", s.max_failure_rate}};
}

DatasetSpec dataset_spec_from_json(const Json& j, DatasetSpec s) {
    require_keys(j,
                 {"name", "n_sims", "realizations", "horizon", "seed", "geology_seed", "split_seed",
                  "fractions", "grid", "geology", "simulator", "policy", "workers", "max_attempts",
                  "max_failure_rate"},
                 "dataset");
    read_optional(j, "name", s.name, "dataset");
    read_optional(j, "n_sims", s.n_sims, "dataset");
    read_optional(j, "realizations", s.realizations, "dataset");
    read_optional(j, "horizon", s.horizon, "dataset");
    read_optional(j, "seed", s.seed, "dataset");
    read_optional(j, "geology_seed", s.geology_seed, "dataset");
    read_optional(j, "split_seed", s.split_seed, "dataset");
    read_optional(j, "fractions", s.fractions, "dataset");
    if (auto it = j.find("grid"); it != j.end()) sim::from_json(*it, s.grid);
    if (auto it = j.find("geology"); it != j.end()) sim::from_json(*it, s.geology);
    if (auto it = j.find("simulator"); it != j.end()) sim::from_json(*it, s.simulator);
    if (auto it = j.find("policy"); it != j.end()) from_json(*it, s.policy);
    read_optional(j, "workers", s.workers, "dataset");
    read_optional(j, "max_attempts", s.max_attempts, "dataset");
    read_optional(j, "max_failure_rate", s.max_failure_rate, "dataset");
    s.validate();
    return s;
}

Json to_json(const DatasetManifest& m) {
    Json failures = Json::array();
    for (const auto& f : m.failures)
        failures.push_back({{"index", f.index}, {"attempt", f.attempt}, {"error", f.error}});
    return Json{{"schema", m.schema},
                {"record_schema", m.record_schema},
                {"name", m.name},
                {"records_file", kRecordsFile},
                {"n_records", m.n_records},
                {"realizations", m.realizations},
                {"K", m.sequence_length},
                {"T", m.horizon},
                {"D", m.dims},
                {"seed", m.seed},
                {"geology_seed", m.geology_seed},
                {"split_seed", m.split_seed},
                {"fractions", m.fractions},
                {"counts", {{"train", m.counts[0]}, {"valid", m.counts[1]}, {"test", m.counts[2]}}},
                {"grid", sim::to_json(m.grid)},
                {"geology", sim::to_json(m.geology)},
                {"simulator", sim::to_json(m.simulator)},
                {"policy", to_json(m.policy)},
                {"simulator_version", m.simulator_version},
                {"failures", failures},
                {"derived_from", m.derived_from}};
}

DatasetManifest manifest_from_json(const Json& j) {
    DatasetManifest m;
    try {
        m.schema = j.at("schema").get<std::string>();
        if (m.schema != kManifestSchema)
            throw DataError("unsupported manifest schema '" + m.schema + "'");
        m.record_schema = j.at("record_schema").get<std::string>();
        if (m.record_schema != kRecordSchema)
            throw DataError("unsupported record schema '" + m.record_schema + "'");
        m.name = j.at("name").get<std::string>();
        m.n_records = j.at("n_records").get<std::int64_t>();
        m.realizations = j.at("realizations").get<int>();
        m.sequence_length = j.at("K").get<int>();
        m.horizon = j.at("T").get<int>();
        m.dims = j.at("D").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.geology_seed = j.at("geology_seed").get<std::uint64_t>();
        m.split_seed = j.at("split_seed").get<std::uint64_t>();
        m.fractions = j.at("fractions").get<std::array<double, 3>>();
        const auto& c = j.at("counts");
        m.counts = {c.at("train").get<std::int64_t>(), c.at("valid").get<std::int64_t>(),
                    c.at("test").get<std::int64_t>()};
        sim::from_json(j.at("grid"), m.grid);
        sim::from_json(j.at("geology"), m.geology);
        sim::from_json(j.at("simulator"), m.simulator);
        from_json(j.at("policy"), m.policy);
        m.simulator_version = j.at("simulator_version").get<std::string>();
        for (const auto& f : j.at("failures"))
            m.failures.push_back({f.at("index").get<std::int64_t>(), f.at("attempt").get<int>(),
                                  f.at("error").get<std::string>()});
        m.derived_from = j.value("derived_from", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

std::string record_to_line(const SimulationRecord& r) {
    Json j{{"id", r.id},
           {"realization", r.realization_id},
           {"actions", to_tokens(r.actions)},
           {"control", to_string(r.control_mode)},
           {"multiplier", r.control_multiplier},
           {"seed", r.seed},
           {"simulator", r.simulator_version},
           {"T", r.rates.rows()},
           {"D", r.rates.cols()},
           {"rates", r.rates.values()}};
    return j.dump();
}

SimulationRecord record_from_line(std::string_view line) {
    SimulationRecord r;
    try {
        const auto j = Json::parse(line);
        r.id = j.at("id").get<std::int64_t>();
        r.realization_id = j.at("realization").get<int>();
        r.actions = parse_tokens(j.at("actions").get<std::vector<std::string>>());
        r.control_mode = parse_control_mode(j.at("control").get<std::string>());
        r.control_multiplier = j.at("multiplier").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.simulator_version = j.at("simulator").get<std::string>();
        const auto t = j.at("T").get<std::size_t>();
        const auto d = j.at("D").get<std::size_t>();
        auto values = j.at("rates").get<std::vector<double>>();
        if (values.size() != t * d)
            throw DataError("record " + std::to_string(r.id) + ": rate matrix has " +
                            std::to_string(values.size()) + " values, expected T*D = " +
                            std::to_string(t * d));
        r.rates = Matrix(t, d);
        r.rates.values() = std::move(values);
        for (double v : r.rates.values())
            if (!std::isfinite(v))
                throw DataError("record " + std::to_string(r.id) + " holds a non-finite rate");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed record line: ") + e.what());
    } catch (const ContractError& e) {
        throw DataError(std::string("malformed record line: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed record line: ") + e.what());
    }
    return r;
}

void write_records(const std::string& path, const std::vector<SimulationRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    for (const auto& r : records) out << record_to_line(r) << '\n';
    if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<SimulationRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<SimulationRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_line(line));
    }
    return out;
}

std::vector<Partition> partition_dataset(std::size_t n, const std::array<double, 3>& fractions,
                                         std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ConfigError("partition fractions must be >= 0");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("partition fractions must sum to 1");

    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = fractions[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) sizes[order[k % 3]] += 1;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed({seed, 0x5350u}));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    std::vector<Partition> out(n);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t k = 0; k < sizes[p]; ++k) out[perm[pos++]] = static_cast<Partition>(p);
    return out;
}

std::vector<sim::Realization> generate_ensemble(int realizations, std::uint64_t geology_seed,
                                                const sim::GridSpec& grid,
                                                const sim::GeoParams& geology) {
    std::vector<sim::Realization> out;
    out.reserve(static_cast<std::size_t>(realizations));
    for (int id = 0; id < realizations; ++id)
        out.push_back(sim::generate_realization(id, geology_seed, grid, geology));
    return out;
}

SimulationRecord simulate_index(const DatasetSpec& spec,
                                const std::vector<sim::Realization>& ensemble,
                                std::int64_t index, std::vector<FailedAttempt>* failures) {
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
        const auto seed = derive_seed({spec.seed, static_cast<std::uint64_t>(index),
                                       static_cast<std::uint64_t>(attempt)});
        Rng rng(seed);
        const auto rid = static_cast<std::size_t>(rng.below(ensemble.size()));
        const auto actions = sample_action_sequence(rng, spec.grid.nx, spec.grid.ny, spec.policy);
        try {
            auto rec = sim::run_simulation(ensemble[rid], actions, spec.grid, spec.simulator,
                                           spec.horizon);
            rec.id = index;
            rec.seed = seed;
            return rec;
        } catch (const SolverError& e) {
            if (failures) failures->push_back({index, attempt, e.what()});
        }
    }
    throw DataError("record " + std::to_string(index) + " failed " +
                    std::to_string(spec.max_attempts) + " resampled attempts");
}

DatasetManifest generate_dataset(const DatasetSpec& spec, const std::string& out_dir,
                                 const LogFn& log) {
    spec.validate();
    fs::create_directories(out_dir);
    const auto ensemble =
        generate_ensemble(spec.realizations, spec.geology_seed, spec.grid, spec.geology);

    const auto n = static_cast<std::size_t>(spec.n_sims);
    struct Slot {
        std::optional<SimulationRecord> record;
        std::vector<FailedAttempt> failures;
        std::string error;
        bool done = false;
    };
    std::vector<Slot> slots(n);
    std::mutex mutex;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || stop.load()) return;
            Slot local;
            try {
                local.record = simulate_index(spec, ensemble, static_cast<std::int64_t>(i),
                                              &local.failures);
            } catch (const std::exception& e) {
                local.error = e.what();
            }
            local.done = true;
            {
                std::lock_guard lock(mutex);
                slots[i] = std::move(local);
            }
            ready.notify_all();
        }
    };

    const std::string records_path = (fs::path(out_dir) / kRecordsFile).string();
    std::ofstream out(records_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + records_path + "' for writing");

    DatasetManifest m;
    m.name = spec.name;
    m.realizations = spec.realizations;
    m.sequence_length = spec.policy.length;
    m.horizon = spec.horizon;
    m.seed = spec.seed;
    m.geology_seed = spec.geology_seed;
    m.split_seed = spec.split_seed;
    m.fractions = spec.fractions;
    m.grid = spec.grid;
    m.geology = spec.geology;
    m.simulator = spec.simulator;
    m.policy = spec.policy;

    std::string fatal;
    {
        std::vector<std::jthread> pool;
        const auto workers = std::min<std::size_t>(static_cast<std::size_t>(spec.workers), n);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);

        // The calling thread is the single writer: records leave in index order.
        const auto limit = static_cast<std::size_t>(spec.max_failure_rate * static_cast<double>(n));
        for (std::size_t i = 0; i < n && fatal.empty(); ++i) {
            Slot slot;
            {
                std::unique_lock lock(mutex);
                ready.wait(lock, [&] { return slots[i].done; });
                slot = std::move(slots[i]);
            }
            for (auto& f : slot.failures) {
                if (log)
                    log("record " + std::to_string(f.index) + " attempt " +
                        std::to_string(f.attempt) + " failed, resampling: " + f.error);
                m.failures.push_back(std::move(f));
            }
            if (!slot.error.empty()) fatal = slot.error;
            else if (m.failures.size() > limit)
                fatal = std::to_string(m.failures.size()) + " failed simulations exceed " +
                        std::to_string(spec.max_failure_rate * 100.0) + "% of " +
                        std::to_string(n) + " records";
            if (!fatal.empty()) break;
            out << record_to_line(*slot.record) << '\n';
            if (log && (i + 1) % 100 == 0)
                log(spec.name + ": " + std::to_string(i + 1) + "/" + std::to_string(n) +
                    " records");
        }
        if (!fatal.empty()) stop = true;
    }
    out.close();
    if (!fatal.empty()) throw DataError("dataset generation aborted: " + fatal);
    if (!out) throw DataError("failed writing '" + records_path + "'");

    m.n_records = static_cast<std::int64_t>(n);
    const auto parts = partition_dataset(n, spec.fractions, spec.split_seed);
    for (auto p : parts) m.counts[static_cast<std::size_t>(p)] += 1;
    write_text_file((fs::path(out_dir) / kManifestFile).string(), to_json(m).dump(2) + "\n");
    return m;
}

std::vector<std::size_t> Dataset::indices(Partition p) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < partition.size(); ++i)
        if (partition[i] == p) out.push_back(i);
    return out;
}

DatasetSpec Dataset::spec() const {
    DatasetSpec s;
    s.name = manifest.name;
    s.n_sims = static_cast<int>(manifest.n_records);
    s.realizations = manifest.realizations;
    s.horizon = manifest.horizon;
    s.seed = manifest.seed;
    s.geology_seed = manifest.geology_seed;
    s.split_seed = manifest.split_seed;
    s.fractions = manifest.fractions;
    s.grid = manifest.grid;
    s.geology = manifest.geology;
    s.simulator = manifest.simulator;
    s.policy = manifest.policy;
    return s;
}

Dataset load_dataset(const std::string& dir) {
    Dataset d;
    const auto manifest_path = (fs::path(dir) / kManifestFile).string();
    if (!fs::exists(manifest_path))
        throw DataError("'" + dir + "' has no manifest (incomplete or not a dataset)");
    d.manifest = manifest_from_json(read_json_file(manifest_path));
    d.records = read_records((fs::path(dir) / kRecordsFile).string());
    if (static_cast<std::int64_t>(d.records.size()) != d.manifest.n_records)
        throw DataError("'" + dir + "' holds " + std::to_string(d.records.size()) +
                        " records but the manifest declares " +
                        std::to_string(d.manifest.n_records));
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        const auto& r = d.records[i];
        if (r.id != static_cast<std::int64_t>(i))
            throw DataError("record " + std::to_string(i) + " carries id " + std::to_string(r.id));
        if (r.horizon() != static_cast<std::size_t>(d.manifest.horizon) ||
            r.dims() != static_cast<std::size_t>(d.manifest.dims))
            throw DataError("record " + std::to_string(i) + " shape does not match the manifest");
        if (r.realization_id < 0 || r.realization_id >= d.manifest.realizations)
            throw DataError("record " + std::to_string(i) + " has realization out of range");
    }
    d.partition = partition_dataset(d.records.size(), d.manifest.fractions, d.manifest.split_seed);
    return d;
}

DatasetManifest truncate_dataset(const Dataset& source, int horizon, const std::string& out_dir,
                                 const std::string& name) {
    if (horizon < 1 || horizon > source.manifest.horizon)
        throw ContractError("truncation horizon must be in [1, " +
                            std::to_string(source.manifest.horizon) + "]");
    fs::create_directories(out_dir);
    std::vector<SimulationRecord> records = source.records;
    for (auto& r : records)
        r.rates = r.rates.block(static_cast<std::size_t>(horizon), 0, r.rates.cols());
    write_records((fs::path(out_dir) / kRecordsFile).string(), records);
    DatasetManifest m = source.manifest;
    m.name = name;
    m.horizon = horizon;
    m.derived_from = source.manifest.name;
    write_text_file((fs::path(out_dir) / kManifestFile).string(), to_json(m).dump(2) + "\n");
    return m;
}

}  // namespace resproxy::scenario
