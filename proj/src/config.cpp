#include "mbias/config.hpp"

#include <algorithm>
#include <stdexcept>

#include "mbias/errors.hpp"
#include "mbias/io.hpp"

namespace mbias {

ParamSet& ParamSet::declare(std::string key, std::string default_value, std::string help) {
  if (has(key)) throw std::logic_error("parameter declared twice: " + key);
  entries_.push_back(Entry{std::move(key), std::move(default_value), std::move(help)});
  return *this;
}

bool ParamSet::has(std::string_view key) const {
  for (const Entry& e : entries_)
    if (e.key == key) return true;
  return false;
}

const ParamSet::Entry& ParamSet::find(std::string_view key) const {
  for (const Entry& e : entries_)
    if (e.key == key) return e;
  throw ConfigError("unknown parameter '" + std::string(key) + "'");
}

void ParamSet::set(std::string_view key, std::string value) {
  for (Entry& e : entries_) {
    if (e.key == key) {
      e.value = std::move(value);
      return;
    }
  }
  throw ConfigError("unknown parameter '" + std::string(key) + "'");
}

void ParamSet::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), std::string(trim(assignment.substr(eq + 1))));
}

void ParamSet::load_text(std::string_view text) {
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      if (line.find('=') == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      set_assignment(line);
    }
    if (end == text.size()) break;
    start = end + 1;
  }
}

void ParamSet::load_file(const std::filesystem::path& path) { load_text(read_text_file(path)); }

const std::string& ParamSet::str(std::string_view key) const { return find(key).value; }

double ParamSet::real(std::string_view key) const {
  try {
    return parse_double(str(key));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

long long ParamSet::integer(std::string_view key) const {
  try {
    return parse_int(str(key));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

bool ParamSet::flag(std::string_view key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected a boolean, got '" + v + "'");
}

std::vector<int> ParamSet::int_list(std::string_view key) const {
  std::vector<int> out;
  const std::string& v = str(key);
  if (trim(v).empty()) return out;
  for (const std::string& part : split(v, ',')) {
    try {
      out.push_back(static_cast<int>(parse_int(part)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::json ParamSet::to_json() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const Entry& e : entries_) doc[e.key] = e.value;
  return doc;
}

}  // namespace mbias
