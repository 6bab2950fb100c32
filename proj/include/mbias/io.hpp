#pragma once

// Text formats shared by the library and the CLI. Doubles are written in
// shortest round-trip form (std::to_chars), so every CSV/JSON emitted here
// reads back bit-exactly.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mbias/surfaces.hpp"

namespace mbias {

std::string format_double(double v);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// Header `# origin=<a,b> spacing=<a,b> shape=<n,m>` followed by one line per
/// row (last axis varies along the line).
void write_grid_csv(std::ostream& os, const ScalarFieldGrid& grid);
ScalarFieldGrid read_grid_csv(std::istream& is);

nlohmann::json gmm_to_json(const GaussianMixture& gmm);
GaussianMixture gmm_from_json(const nlohmann::json& doc);

/// Minimal CSV table: first non-comment line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  ///< throws ConfigError if absent
};
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mbias
