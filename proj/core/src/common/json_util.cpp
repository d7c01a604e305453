#include "resproxy/common/json_util.hpp"

#include <fstream>
#include <sstream>

namespace resproxy {

void require_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view context) {
    if (!j.is_object()) throw ConfigError(std::string(context) + ": expected an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto k : allowed) known = known || item.key() == k;
        if (!known) throw ConfigError(std::string(context) + ": unknown key '" + item.key() + "'");
    }
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace resproxy
