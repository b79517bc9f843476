#include "coneflow/io.hpp"

#include "json.hpp"  // vendored nlohmann/json

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coneflow {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("Config: missing '=' on line " + std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("Config: empty key on line " + std::to_string(lineno));
    cfg.kv_[key] = val;
  }
  return cfg;
}

std::string Config::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::runtime_error("Config: missing key '" + key + "'");
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get(key);
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("Config: key '" + key + "' is not a number: " + v);
  }
  if (pos != v.size()) throw std::runtime_error("Config: trailing junk in number for '" + key + "'");
  return d;
}

double Config::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::size_t Config::get_size(const std::string& key) const {
  const double d = get_double(key);
  const std::size_t n = std::size_t(d);
  if (double(n) != d) throw std::runtime_error("Config: key '" + key + "' is not an integer");
  return n;
}

std::size_t Config::get_size_or(const std::string& key, std::size_t fallback) const {
  return has(key) ? get_size(key) : fallback;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  const std::string v = get(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    out.push_back(std::stod(t));
  }
  if (out.empty()) throw std::runtime_error("Config: empty list for '" + key + "'");
  return out;
}

std::optional<double> Config::get_double_opt(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_double(key);
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) {  // std::map: already sorted
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string run_id_of(const Config& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)fnv1a(cfg.canonical()));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("CsvTable: cannot open " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i)
    std::fprintf(f, "%s%s", header[i].c_str(), i + 1 < header.size() ? "," : "\r\n");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      std::fprintf(f, "%.17g%s", row[i], i + 1 < row.size() ? "," : "\r\n");
  }
  std::fclose(f);
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("CsvTable: cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (first) {
      while (std::getline(ss, cell, ',')) t.header.push_back(cell);
      first = false;
    } else {
      std::vector<double> row;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      if (row.size() != t.header.size())
        throw std::runtime_error("CsvTable: ragged row in " + path.string());
      t.rows.push_back(std::move(row));
    }
  }
  if (t.header.empty()) throw std::runtime_error("CsvTable: missing header in " + path.string());
  return t;
}

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::json j;
  nlohmann::json cfg;
  for (const auto& [k, v] : config_echo.entries()) cfg[k] = v;
  j["config"] = cfg;
  j["artifact_version"] = artifact_version;
  j["run_id"] = run_id;
  j["created_utc"] = created_utc;
  j["wall_seconds"] = wall_seconds;
  j["outputs"] = output_paths;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("RunManifest: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

std::string utc_timestamp_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace coneflow
