#pragma once

#include "resproxy/common/random.hpp"
#include "resproxy/scenario/action.hpp"

namespace resproxy::scenario {

struct SamplingPolicy {
    int length = 20;             // K
    double drill_prob = 0.99;
    double producer_weight = 5.0;
    double injector_weight = 1.0;
    int exclusion = 2;           // Chebyshev radius around earlier wells

    void validate() const;
    friend bool operator==(const SamplingPolicy&, const SamplingPolicy&) = default;
};

/// Draws one K-slot drilling plan. A drill with no legal location left becomes X.
ActionSequence sample_action_sequence(Rng& rng, int nx, int ny, const SamplingPolicy& policy);

}  // namespace resproxy::scenario
