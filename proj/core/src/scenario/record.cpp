#include "resproxy/scenario/record.hpp"

#include "resproxy/common/errors.hpp"

namespace resproxy::scenario {

const char* to_string(ControlMode mode) noexcept {
    return mode == ControlMode::fixed ? "fixed" : "optimized";
}

ControlMode parse_control_mode(const std::string& text) {
    if (text == "fixed") return ControlMode::fixed;
    if (text == "optimized") return ControlMode::optimized;
    throw ConfigError("unknown control mode '" + text + "'");
}

}  // namespace resproxy::scenario
