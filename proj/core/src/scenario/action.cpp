#include "resproxy/scenario/action.hpp"

#include "resproxy/common/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

namespace resproxy::scenario {

namespace {

bool parse_int(std::string_view text, int& out) {
    if (text.empty()) return false;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

std::string to_token(const Action& action) {
    switch (action.kind) {
        case ActionKind::producer:
            return "P(" + std::to_string(action.x) + "," + std::to_string(action.y) + ")";
        case ActionKind::injector:
            return "I(" + std::to_string(action.x) + "," + std::to_string(action.y) + ")";
        case ActionKind::none: return "x";
    }
    return "x";
}

Action parse_token(std::string_view token) {
    if (token == "x" || token == "X") return Action::nothing();
    auto fail = [&]() -> Action {
        throw ContractError("malformed action token '" + std::string(token) + "'");
    };
    if (token.size() < 6) return fail();
    ActionKind kind;
    if (token[0] == 'P')
        kind = ActionKind::producer;
    else if (token[0] == 'I')
        kind = ActionKind::injector;
    else
        return fail();
    if (token[1] != '(' || token.back() != ')') return fail();
    const auto body = token.substr(2, token.size() - 3);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) return fail();
    int x = 0;
    int y = 0;
    if (!parse_int(body.substr(0, comma), x) || !parse_int(body.substr(comma + 1), y)) return fail();
    return {kind, x, y};
}

std::vector<std::string> to_tokens(const ActionSequence& actions) {
    std::vector<std::string> out;
    out.reserve(actions.size());
    for (const auto& a : actions) out.push_back(to_token(a));
    return out;
}

std::string to_string(const ActionSequence& actions) {
    std::string out;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) out += '-';
        out += to_token(actions[i]);
    }
    return out;
}

ActionSequence parse_sequence(std::string_view text) {
    ActionSequence out;
    if (text.empty()) return out;
    // '-' also appears in negative coordinates, which are rejected downstream anyway;
    // split only on dashes outside parentheses.
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || (text[i] == '-' && depth == 0)) {
            out.push_back(parse_token(text.substr(start, i - start)));
            start = i + 1;
        } else if (text[i] == '(') {
            ++depth;
        } else if (text[i] == ')') {
            --depth;
        }
    }
    return out;
}

ActionSequence parse_tokens(const std::vector<std::string>& tokens) {
    ActionSequence out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(parse_token(t));
    return out;
}

int chebyshev(const Action& a, const Action& b) noexcept {
    return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

std::optional<std::size_t> first_out_of_bounds(const ActionSequence& actions, int nx, int ny) {
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto& a = actions[i];
        if (a.drills() && (a.x < 0 || a.x >= nx || a.y < 0 || a.y >= ny)) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> first_exclusion_violation(const ActionSequence& actions, int exclusion) {
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (!actions[i].drills()) continue;
        for (std::size_t j = 0; j < i; ++j)
            if (actions[j].drills() && chebyshev(actions[i], actions[j]) <= exclusion) return i;
    }
    return std::nullopt;
}

}  // namespace resproxy::scenario
