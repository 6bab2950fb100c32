#pragma once

// Flat key-value parameters for experiments. Every key must be declared with
// a default; setting an undeclared key is a ConfigError. Files hold one
// `key = value` per line, `#` starts a comment.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mbias {

class ParamSet {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::string help;
  };

  ParamSet& declare(std::string key, std::string default_value, std::string help);

  bool has(std::string_view key) const;
  void set(std::string_view key, std::string value);
  /// Applies `key=value` (the form used on the command line).
  void set_assignment(std::string_view assignment);
  void load_text(std::string_view text);
  void load_file(const std::filesystem::path& path);

  const std::string& str(std::string_view key) const;
  double real(std::string_view key) const;
  long long integer(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<int> int_list(std::string_view key) const;

  const std::vector<Entry>& entries() const { return entries_; }
  nlohmann::json to_json() const;

 private:
  const Entry& find(std::string_view key) const;
  std::vector<Entry> entries_;
};

}  // namespace mbias
