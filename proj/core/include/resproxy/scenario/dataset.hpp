#pragma once

#include "resproxy/common/json_util.hpp"
#include "resproxy/scenario/record.hpp"
#include "resproxy/scenario/sampler.hpp"
#include "resproxy/sim/grid.hpp"
#include "resproxy/sim/realization.hpp"
#include "resproxy/sim/simulator.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace resproxy::scenario {

inline constexpr const char* kManifestSchema = "resproxy.manifest/1";
inline constexpr const char* kRecordSchema = "resproxy.records/1";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRecordsFile = "records.jsonl";

enum class Partition : std::uint8_t { train = 0, valid = 1, test = 2 };
const char* to_string(Partition p) noexcept;

/// Everything needed to (re)generate a dataset.
struct DatasetSpec {
    std::string name = "dataset";
    int n_sims = 2000;
    int realizations = 100;           // R
    int horizon = 12;                 // T
    std::uint64_t seed = 1;           // record sampling
    std::uint64_t geology_seed = 42;  // realization ensemble
    std::uint64_t split_seed = 7;
    std::array<double, 3> fractions{0.8, 0.1, 0.1};
    sim::GridSpec grid = sim::GridSpec::preset("desk");
    sim::GeoParams geology;
    sim::SimulatorConfig simulator;
    SamplingPolicy policy;
    int workers = 1;
    int max_attempts = 20;            // per record before giving up
    double max_failure_rate = 0.01;

    void validate() const;
};

Json to_json(const DatasetSpec& s);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
DatasetSpec dataset_spec_from_json(const Json& j, DatasetSpec base = {});

struct FailedAttempt {
    std::int64_t index = 0;
    int attempt = 0;
    std::string error;
};

struct DatasetManifest {
    std::string schema = kManifestSchema;
    std::string record_schema = kRecordSchema;
    std::string name;
    std::int64_t n_records = 0;
    int realizations = 0;
    int sequence_length = 0;  // K
    int horizon = 0;          // T
    int dims = static_cast<int>(kRatesWithWells);
    std::uint64_t seed = 0;
    std::uint64_t geology_seed = 0;
    std::uint64_t split_seed = 0;
    std::array<double, 3> fractions{0.8, 0.1, 0.1};
    std::array<std::int64_t, 3> counts{0, 0, 0};
    sim::GridSpec grid;
    sim::GeoParams geology;
    sim::SimulatorConfig simulator;
    SamplingPolicy policy;
    std::string simulator_version = sim::kSimulatorVersion;
    std::vector<FailedAttempt> failures;
    std::string derived_from;  // set when produced by truncate_dataset
};

Json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const Json& j);

/// One JSON object per line: id, realization, actions (tokens), control, multiplier, seed,
/// simulator, T, D and the row-major rate matrix.
std::string record_to_line(const SimulationRecord& r);
SimulationRecord record_from_line(std::string_view line);

void write_records(const std::string& path, const std::vector<SimulationRecord>& records);
std::vector<SimulationRecord> read_records(const std::string& path);

/// Deterministic shuffled split. Sizes follow largest-remainder rounding of n * fractions.
std::vector<Partition> partition_dataset(std::size_t n, const std::array<double, 3>& fractions,
                                         std::uint64_t seed);

/// Realizations 0..R-1 of one geology seed.
std::vector<sim::Realization> generate_ensemble(int realizations, std::uint64_t geology_seed,
                                                const sim::GridSpec& grid,
                                                const sim::GeoParams& geology);

using LogFn = std::function<void(const std::string&)>;

/// Simulates spec.n_sims records on spec.workers threads and writes records.jsonl followed by
/// manifest.json into out_dir. Output bytes do not depend on the worker count.
DatasetManifest generate_dataset(const DatasetSpec& spec, const std::string& out_dir,
                                 const LogFn& log = {});

struct Dataset {
    DatasetManifest manifest;
    std::vector<SimulationRecord> records;
    std::vector<Partition> partition;  // aligned with records

    [[nodiscard]] std::vector<std::size_t> indices(Partition p) const;
    [[nodiscard]] DatasetSpec spec() const;
};

Dataset load_dataset(const std::string& dir);

/// Writes a copy of `source` whose records keep only the first `horizon` steps.
/// Fixed-control simulations are causal, so this equals regenerating with the shorter horizon.
DatasetManifest truncate_dataset(const Dataset& source, int horizon, const std::string& out_dir,
                                 const std::string& name);

/// Simulates one record exactly as generate_dataset would for that index.
SimulationRecord simulate_index(const DatasetSpec& spec,
                                const std::vector<sim::Realization>& ensemble,
                                std::int64_t index, std::vector<FailedAttempt>* failures = nullptr);

}  // namespace resproxy::scenario
