#include "mbias/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mbias/errors.hpp"

namespace mbias {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("not an integer: '" + std::string(text) + "'");
  return v;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

namespace {

template <typename T, typename Fmt>
std::string join(const std::vector<T>& items, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

}  // namespace

void write_grid_csv(std::ostream& os, const ScalarFieldGrid& grid) {
  const GridSpec& spec = grid.spec();
  os << "# origin=" << join(spec.origin, format_double)
     << " spacing=" << join(spec.spacing, format_double)
     << " shape=" << join(spec.shape, [](std::size_t n) { return std::to_string(n); }) << '\n';
  const std::size_t row = spec.shape.back();
  const Vec& v = grid.values();
  for (std::size_t start = 0; start < v.size(); start += row) {
    for (std::size_t k = 0; k < row; ++k) {
      if (k) os << ',';
      os << format_double(v[start + k]);
    }
    os << '\n';
  }
}

ScalarFieldGrid read_grid_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ConfigError("grid CSV: missing header");
  GridSpec spec;
  bool have_origin = false, have_spacing = false, have_shape = false;
  for (const std::string& field : split(std::string_view(line).substr(2), ' ')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("grid CSV: malformed header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const auto parts = split(std::string_view(field).substr(eq + 1), ',');
    if (key == "origin") {
      for (const auto& p : parts) spec.origin.push_back(parse_double(p));
      have_origin = true;
    } else if (key == "spacing") {
      for (const auto& p : parts) spec.spacing.push_back(parse_double(p));
      have_spacing = true;
    } else if (key == "shape") {
      for (const auto& p : parts) spec.shape.push_back(static_cast<std::size_t>(parse_int(p)));
      have_shape = true;
    } else {
      throw ConfigError("grid CSV: unknown header key '" + key + "'");
    }
  }
  if (!have_origin || !have_spacing || !have_shape) throw ConfigError("grid CSV: incomplete header");
  Vec values;
  values.reserve(spec.count());
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    for (const auto& cell : split(line, ',')) values.push_back(parse_double(cell));
  }
  try {
    return ScalarFieldGrid(std::move(spec), std::move(values));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("grid CSV: ") + e.what());
  }
}

nlohmann::json gmm_to_json(const GaussianMixture& gmm) {
  return nlohmann::json{{"means", gmm.means()}, {"variances", gmm.variances()}, {"weights", gmm.weights()}};
}

GaussianMixture gmm_from_json(const nlohmann::json& doc) {
  try {
    return GaussianMixture(doc.at("means").get<std::vector<Vec>>(),
                           doc.at("variances").get<std::vector<Vec>>(),
                           doc.at("weights").get<Vec>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mixture JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mixture JSON: ") + e.what());
  }
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("CSV: missing column '" + std::string(name) + "'");
}

CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cells = split(t, ',');
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ConfigError("CSV: row has " + std::to_string(cells.size()) + " fields, header has " +
                        std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ConfigError("CSV: empty file");
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_csv(in);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mbias
