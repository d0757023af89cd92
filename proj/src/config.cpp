#include "gapgrad/config.hpp"

#include <fstream>
#include <sstream>
#include <string>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "gapgrad/error.hpp"

namespace gapgrad {

namespace {

using nlohmann::json;

json to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(to_json(v));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw InputError("config: dates and times are not supported values");
}

}  // namespace

nlohmann::json parse_toml(std::string_view text) {
  try {
    return to_json(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config line " << e.source().begin.line << ": " << e.description();
    throw InputError(os.str());
  }
}

nlohmann::json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (path.extension() == ".json" || (first != std::string::npos && text[first] == '{')) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("invalid JSON config: ") + e.what());
    }
  }
  return parse_toml(text);
}

}  // namespace gapgrad
