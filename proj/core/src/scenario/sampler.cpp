#include "resproxy/scenario/sampler.hpp"

#include "resproxy/common/errors.hpp"

#include <algorithm>
#include <cstdlib>

namespace resproxy::scenario {

void SamplingPolicy::validate() const {
    if (length < 1) throw ConfigError("sequence length must be >= 1");
    if (drill_prob < 0.0 || drill_prob > 1.0) throw ConfigError("drill probability must be in [0,1]");
    if (producer_weight < 0.0 || injector_weight < 0.0 || producer_weight + injector_weight <= 0.0)
        throw ConfigError("well kind weights must be >= 0 with a positive sum");
    if (exclusion < 0) throw ConfigError("exclusion radius must be >= 0");
}

ActionSequence sample_action_sequence(Rng& rng, int nx, int ny, const SamplingPolicy& policy) {
    policy.validate();
    if (nx < 1 || ny < 1) throw ContractError("grid surface must be non-empty");
    const double p_producer = policy.producer_weight / (policy.producer_weight + policy.injector_weight);

    // Legal surface cells, kept in row-major order so draws are reproducible.
    std::vector<int> legal(static_cast<std::size_t>(nx * ny));
    for (int i = 0; i < nx * ny; ++i) legal[static_cast<std::size_t>(i)] = i;

    ActionSequence out;
    out.reserve(static_cast<std::size_t>(policy.length));
    for (int k = 0; k < policy.length; ++k) {
        // Both draws happen for every slot so later slots do not shift with earlier outcomes.
        const bool drill = rng.bernoulli(policy.drill_prob);
        const bool producer = rng.bernoulli(p_producer);
        if (!drill || legal.empty()) {
            out.push_back(Action::nothing());
            continue;
        }
        const int cell = legal[static_cast<std::size_t>(rng.below(legal.size()))];
        const int x = cell % nx;
        const int y = cell / nx;
        out.push_back(producer ? Action::producer(x, y) : Action::injector(x, y));
        std::erase_if(legal, [&](int c) {
            return std::max(std::abs(c % nx - x), std::abs(c / nx - y)) <= policy.exclusion;
        });
    }
    return out;
}

}  // namespace resproxy::scenario
