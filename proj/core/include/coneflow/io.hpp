#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coneflow {

/// Flat key=value configuration with dotted section names.
/// Lines: `key = value`, `#` comments, blank lines ignored.
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key) const;
  std::size_t get_size_or(const std::string& key, std::size_t fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;  // comma separated
  std::optional<double> get_double_opt(const std::string& key) const;

  /// Canonical serialization: sorted keys, floating point at 17 significant
  /// digits; the run id is the FNV-1a hash of this form.
  std::string canonical() const;
  const std::map<std::string, std::string>& entries() const { return kv_; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

 private:
  std::map<std::string, std::string> kv_;
};

/// 64-bit FNV-1a, used for content-hash run ids.
std::uint64_t fnv1a(const std::string& data);
std::string run_id_of(const Config& cfg);

/// Minimal RFC-4180 CSV: header row mandatory, CRLF line ends,
/// floating point written with 17 significant digits.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  void write(const std::filesystem::path& path) const;
  static CsvTable read(const std::filesystem::path& path);
};

std::string format_double(double v);  // %.17g

/// Run manifest written next to every run folder. Timestamps and wall time
/// are volatile and live only here; every other output file is part of the
/// deterministic record contract.
struct RunManifest {
  Config config_echo;
  std::string artifact_version;
  std::string run_id;
  std::string created_utc;
  double wall_seconds = 0.0;
  std::vector<std::string> output_paths;
  void write(const std::filesystem::path& path) const;
};

std::string utc_timestamp_now();

}  // namespace coneflow
