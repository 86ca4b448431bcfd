#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pdl::cfg {

// Sectioned key-value config:
//
//   [family]
//   kind = convex_qp
//   n = 50
//
// Keys address as "family.kind". Values are raw trimmed strings; '#' starts
// a comment. Serialization is deterministic (sorted keys), so a snapshot
// reparses to an equal config.
class KvConfig {
 public:
  static KvConfig parse_file(const std::filesystem::path& path);
  static KvConfig parse_string(const std::string& text,
                               const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string str(const std::string& key) const;
  std::string str_or(const std::string& key, const std::string& fallback) const;
  double num(const std::string& key) const;
  double num_or(const std::string& key, double fallback) const;
  std::uint64_t u64(const std::string& key) const;
  std::uint64_t u64_or(const std::string& key, std::uint64_t fallback) const;
  bool flag_or(const std::string& key, bool fallback) const;
  std::vector<std::string> list_or(const std::string& key) const;  // whitespace split

  // fills keys missing here from base (preset layering)
  void merge_under(const KvConfig& base);

  std::string serialize() const;

  bool operator==(const KvConfig&) const = default;

 private:
  std::map<std::string, std::string> values_;
};

// Built-in experiment presets; throws config_error for unknown names.
// Available: qp-default, nonconvex-default, qcqp-default (paper-scale
// settings) and qp-desk, nonconvex-desk, qcqp-desk (reduced sizes).
KvConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace pdl::cfg
