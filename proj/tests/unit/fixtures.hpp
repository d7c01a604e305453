#pragma once

#include "resproxy/common/random.hpp"
#include "resproxy/scenario/dataset.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace resproxy::fixtures {

/// Fresh directory under the system temp dir, unique per process and tag.
inline std::filesystem::path temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("resproxy-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Small fixed-control dataset: 6x6x4 grid, 3 realizations, K = 4, T = 6.
inline scenario::DatasetSpec toy_spec(int n_sims = 50) {
    scenario::DatasetSpec s;
    s.name = "toy";
    s.n_sims = n_sims;
    s.realizations = 3;
    s.horizon = 6;
    s.grid = sim::GridSpec::uniform(6, 6, 4, 50.0, 50.0, 4.0, 30.0, 6);
    s.simulator.wells.completion_depth = 2;
    s.policy.length = 4;
    return s;
}

/// Generated once per test process.
inline const scenario::Dataset& toy_dataset() {
    static const scenario::Dataset data = [] {
        const auto dir = temp_dir("toy");
        scenario::generate_dataset(toy_spec(), dir.string());
        return scenario::load_dataset(dir.string());
    }();
    return data;
}

}  // namespace resproxy::fixtures
