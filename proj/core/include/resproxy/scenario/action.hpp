#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace resproxy::scenario {

enum class ActionKind : int { producer = 0, injector = 1, none = 2 };

/// One drilling decision. Coordinates are meaningful only when kind != none.
struct Action {
    ActionKind kind = ActionKind::none;
    int x = 0;
    int y = 0;

    [[nodiscard]] bool drills() const noexcept { return kind != ActionKind::none; }

    static Action producer(int x, int y) { return {ActionKind::producer, x, y}; }
    static Action injector(int x, int y) { return {ActionKind::injector, x, y}; }
    static Action nothing() { return {}; }

    friend bool operator==(const Action&, const Action&) = default;
};

using ActionSequence = std::vector<Action>;

/// "P(0,15)", "I(2,5)" or "x".
std::string to_token(const Action& action);

/// Parses a single token. Throws ContractError naming the token on malformed input.
Action parse_token(std::string_view token);

/// Tokens joined with '-', e.g. "x-P(0,15)-I(2,5)".
std::string to_string(const ActionSequence& actions);
std::vector<std::string> to_tokens(const ActionSequence& actions);

/// Accepts the dash-joined form.
ActionSequence parse_sequence(std::string_view text);
ActionSequence parse_tokens(const std::vector<std::string>& tokens);

/// Chebyshev distance between surface locations.
int chebyshev(const Action& a, const Action& b) noexcept;

/// First action index that is out of [0,nx)x[0,ny), if any.
std::optional<std::size_t> first_out_of_bounds(const ActionSequence& actions, int nx, int ny);

/// First drilled action within `exclusion` (Chebyshev) of an earlier drilled one, if any.
std::optional<std::size_t> first_exclusion_violation(const ActionSequence& actions, int exclusion);

}  // namespace resproxy::scenario
