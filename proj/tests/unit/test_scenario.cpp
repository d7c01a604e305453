#include "fixtures.hpp"

#include "resproxy/scenario/action.hpp"
#include "resproxy/scenario/dataset.hpp"
#include "resproxy/scenario/sampler.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

using namespace resproxy;
using namespace resproxy::scenario;
namespace fs = std::filesystem;

TEST(Action, TokenGrammarRoundTrip) {
    const auto seq = parse_sequence("x-P(0,15)-I(2,5)");
    ASSERT_EQ(seq.size(), 3u);
    EXPECT_EQ(seq[0], Action::nothing());
    EXPECT_EQ(seq[1], Action::producer(0, 15));
    EXPECT_EQ(seq[2], Action::injector(2, 5));
    EXPECT_EQ(to_string(seq), "x-P(0,15)-I(2,5)");
    EXPECT_EQ(parse_tokens(to_tokens(seq)), seq);
    EXPECT_EQ(parse_token("X"), Action::nothing());
}

TEST(Action, MalformedTokensNameTheToken) {
    for (const char* bad : {"P(1)", "Q(1,2)", "P(1,2", "P(a,2)", "P(1,2)x", "", "P(,)"}) {
        try {
            parse_token(bad);
            ADD_FAILURE() << "accepted '" << bad << "'";
        } catch (const ContractError& e) {
            EXPECT_NE(std::string(e.what()).find(std::string("'") + bad + "'"), std::string::npos);
        }
    }
    EXPECT_THROW(parse_sequence("x-P(1,1)-bogus"), ContractError);
}

TEST(Action, BoundsAndExclusionChecks) {
    const auto seq = parse_sequence("P(0,0)-x-I(3,0)-P(2,2)-P(99,0)");
    EXPECT_EQ(first_out_of_bounds(seq, 24, 25), std::optional<std::size_t>(4));
    EXPECT_EQ(first_out_of_bounds(seq, 100, 25), std::nullopt);
    EXPECT_EQ(first_exclusion_violation(seq, 2), std::optional<std::size_t>(3));
    EXPECT_EQ(first_exclusion_violation(seq, 1), std::nullopt);
    EXPECT_EQ(chebyshev(Action::producer(0, 0), Action::injector(3, -1)), 3);
}

TEST(Sampler, ZeroDrillProbabilityGivesAllX) {
    Rng rng(1);
    SamplingPolicy p;
    p.drill_prob = 0.0;
    const auto seq = sample_action_sequence(rng, 12, 12, p);
    EXPECT_EQ(seq.size(), 20u);
    for (const auto& a : seq) EXPECT_FALSE(a.drills());
}

TEST(Sampler, MonteCarloFrequencies) {
    Rng rng(2024);
    SamplingPolicy p;
    p.length = 1;
    std::size_t drills = 0, producers = 0, total = 0;
    for (int i = 0; i < 10000; ++i) {
        for (const auto& a : sample_action_sequence(rng, 24, 25, p)) {
            ++total;
            if (!a.drills()) continue;
            ++drills;
            producers += a.kind == ActionKind::producer;
        }
    }
    EXPECT_NEAR(static_cast<double>(drills) / total, 0.99, 0.005);
    EXPECT_NEAR(static_cast<double>(producers) / drills, 5.0 / 6.0, 0.01);
}

TEST(Sampler, LocationsAreUniformOverTheSurface) {
    Rng rng(7);
    SamplingPolicy p;
    p.length = 1;
    p.drill_prob = 1.0;
    std::vector<int> hist(36, 0);
    const int n = 36000;
    for (int i = 0; i < n; ++i) {
        const auto a = sample_action_sequence(rng, 6, 6, p)[0];
        ++hist[static_cast<std::size_t>(a.x + 6 * a.y)];
    }
    double chi2 = 0.0;
    for (int h : hist) chi2 += (h - 1000.0) * (h - 1000.0) / 1000.0;
    EXPECT_LT(chi2, 66.6);  // 0.999 quantile, 35 dof
}

TEST(Sampler, ExclusionInvariantHolds) {
    Rng rng(3);
    SamplingPolicy p;
    for (int i = 0; i < 2000; ++i) {
        const auto seq = sample_action_sequence(rng, 12, 12, p);
        for (std::size_t a = 0; a < seq.size(); ++a)
            for (std::size_t b = a + 1; b < seq.size(); ++b)
                if (seq[a].drills() && seq[b].drills()) ASSERT_GT(chebyshev(seq[a], seq[b]), 2);
        ASSERT_EQ(first_exclusion_violation(seq, 2), std::nullopt);
        ASSERT_EQ(first_out_of_bounds(seq, 12, 12), std::nullopt);
    }
}

TEST(Sampler, ExhaustedSurfaceGivesX) {
    Rng rng(4);
    SamplingPolicy p;
    p.drill_prob = 1.0;
    p.length = 5;
    const auto seq = sample_action_sequence(rng, 3, 3, p);
    EXPECT_TRUE(seq[0].drills());
    for (std::size_t k = 1; k < seq.size(); ++k) EXPECT_FALSE(seq[k].drills());
}

TEST(Partition, SizesFollowFractions) {
    auto count = [](const std::vector<Partition>& ps, Partition p) {
        return std::count(ps.begin(), ps.end(), p);
    };
    const auto small = partition_dataset(10, {0.8, 0.1, 0.1}, 7);
    EXPECT_EQ(count(small, Partition::train), 8);
    EXPECT_EQ(count(small, Partition::valid), 1);
    EXPECT_EQ(count(small, Partition::test), 1);
    const auto big = partition_dataset(22000, {0.8, 0.1, 0.1}, 7);
    EXPECT_EQ(count(big, Partition::train), 17600);
    EXPECT_EQ(count(big, Partition::valid), 2200);
    EXPECT_EQ(count(big, Partition::test), 2200);
    EXPECT_EQ(partition_dataset(2000, {0.8, 0.1, 0.1}, 7), partition_dataset(2000, {0.8, 0.1, 0.1}, 7));
    EXPECT_NE(partition_dataset(2000, {0.8, 0.1, 0.1}, 7), partition_dataset(2000, {0.8, 0.1, 0.1}, 8));
}

TEST(Record, LineRoundTrip) {
    SimulationRecord r;
    r.id = 12;
    r.realization_id = 3;
    r.actions = parse_sequence("P(1,2)-x-I(4,4)");
    r.rates = Matrix(2, 3);
    r.rates(0, 0) = 0.1;
    r.rates(1, 2) = 1.0 / 3.0;
    r.control_mode = ControlMode::optimized;
    r.control_multiplier = 1.5;
    r.seed = 0xfeedfacecafebeefULL;
    r.simulator_version = "v";
    const auto line = record_to_line(r);
    const auto back = record_from_line(line);
    EXPECT_EQ(back.id, r.id);
    EXPECT_EQ(back.actions, r.actions);
    EXPECT_EQ(back.rates, r.rates);
    EXPECT_EQ(back.seed, r.seed);
    EXPECT_EQ(back.control_mode, r.control_mode);
    EXPECT_EQ(back.control_multiplier, 1.5);
    EXPECT_EQ(record_to_line(back), line);
    EXPECT_THROW(record_from_line("{\"id\": 1}"), DataError);
    EXPECT_THROW(record_from_line("not json"), DataError);
}

TEST(DatasetSpec, JsonRoundTripAndStrictKeys) {
    auto s = fixtures::toy_spec(7);
    s.simulator.control_mode = ControlMode::optimized;
    const auto back = dataset_spec_from_json(to_json(s));
    EXPECT_EQ(to_json(back), to_json(s));
    EXPECT_EQ(back.grid, s.grid);
    EXPECT_EQ(back.simulator, s.simulator);
    EXPECT_THROW(dataset_spec_from_json(Json{{"n_simz", 3}}), ConfigError);
    EXPECT_THROW(dataset_spec_from_json(Json{{"fractions", {0.5, 0.5, 0.5}}}), ConfigError);
}

TEST(Dataset, WorkerCountDoesNotChangeBytes) {
    const auto dir = fixtures::temp_dir("workers");
    auto spec = fixtures::toy_spec(4);
    spec.workers = 1;
    generate_dataset(spec, (dir / "w1").string());
    spec.workers = 4;
    generate_dataset(spec, (dir / "w4").string());
    EXPECT_EQ(fixtures::slurp(dir / "w1" / kRecordsFile), fixtures::slurp(dir / "w4" / kRecordsFile));
    EXPECT_EQ(fixtures::slurp(dir / "w1" / kManifestFile), fixtures::slurp(dir / "w4" / kManifestFile));
    fs::remove_all(dir);
}

TEST(Dataset, ToyDatasetIsConsistent) {
    const auto& d = fixtures::toy_dataset();
    EXPECT_EQ(d.records.size(), 50u);
    EXPECT_EQ(d.manifest.n_records, 50);
    EXPECT_EQ(d.manifest.counts[0], 40);
    EXPECT_EQ(d.manifest.horizon, 6);
    EXPECT_EQ(d.manifest.sequence_length, 4);
    EXPECT_EQ(d.indices(Partition::train).size(), 40u);
    for (const auto& r : d.records) {
        EXPECT_EQ(r.horizon(), 6u);
        EXPECT_EQ(r.dims(), kRatesWithWells);
        EXPECT_EQ(r.actions.size(), 4u);
        EXPECT_LT(r.realization_id, 3);
        for (double v : r.rates.values()) {
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_GE(v, 0.0);
        }
        EXPECT_EQ(first_exclusion_violation(r.actions, 2), std::nullopt);
    }
    // Disjoint partitions covering every record.
    std::vector<std::size_t> all;
    for (auto p : {Partition::train, Partition::valid, Partition::test}) {
        const auto idx = d.indices(p);
        all.insert(all.end(), idx.begin(), idx.end());
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
    EXPECT_EQ(to_json(d.spec()), to_json(fixtures::toy_spec()));
}

TEST(Dataset, SimulateIndexMatchesGeneratedRecord) {
    const auto& d = fixtures::toy_dataset();
    const auto spec = d.spec();
    const auto ensemble = generate_ensemble(spec.realizations, spec.geology_seed, spec.grid, spec.geology);
    for (std::int64_t i : {0, 17, 49}) {
        const auto r = simulate_index(spec, ensemble, i);
        EXPECT_EQ(record_to_line(r), record_to_line(d.records[static_cast<std::size_t>(i)]));
    }
}

TEST(Dataset, TruncationEqualsDirectGeneration) {
    const auto dir = fixtures::temp_dir("trunc");
    const auto& d = fixtures::toy_dataset();
    truncate_dataset(d, 3, (dir / "cut").string(), "toy-t3");
    auto spec = fixtures::toy_spec();
    spec.horizon = 3;
    generate_dataset(spec, (dir / "direct").string());
    EXPECT_EQ(fixtures::slurp(dir / "cut" / kRecordsFile), fixtures::slurp(dir / "direct" / kRecordsFile));
    const auto cut = load_dataset((dir / "cut").string());
    EXPECT_EQ(cut.manifest.horizon, 3);
    EXPECT_EQ(cut.manifest.derived_from, "toy");
    EXPECT_EQ(cut.partition, d.partition);
    EXPECT_THROW(truncate_dataset(d, 7, (dir / "long").string(), "x"), ContractError);
    fs::remove_all(dir);
}

TEST(Dataset, LoadRejectsCorruptFiles) {
    const auto dir = fixtures::temp_dir("corrupt");
    EXPECT_THROW(load_dataset((dir / "missing").string()), DataError);
    generate_dataset(fixtures::toy_spec(3), dir.string());
    {
        std::ofstream out(dir / kRecordsFile, std::ios::app);
        out << "{\"broken\": true}\n";
    }
    EXPECT_THROW(load_dataset(dir.string()), DataError);
    fs::remove_all(dir);
}
