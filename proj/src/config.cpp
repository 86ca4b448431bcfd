#include "pdl/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pdl/common.hpp"

namespace pdl::cfg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path.string());
}

KvConfig KvConfig::parse_string(const std::string& text,
                                const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    cfg.set(section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

bool KvConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string KvConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw config_error("missing config key '" + key + "'");
  }
  return it->second;
}

std::string KvConfig::str_or(const std::string& key,
                             const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KvConfig::num(const std::string& key) const {
  const std::string v = str(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "' is not a number: '" + v + "'");
  }
}

double KvConfig::num_or(const std::string& key, double fallback) const {
  return has(key) ? num(key) : fallback;
}

std::uint64_t KvConfig::u64(const std::string& key) const {
  const std::string v = str(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw config_error("config key '" + key + "' is not an unsigned integer: '" +
                       v + "'");
  }
  return out;
}

std::uint64_t KvConfig::u64_or(const std::string& key,
                               std::uint64_t fallback) const {
  return has(key) ? u64(key) : fallback;
}

bool KvConfig::flag_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> KvConfig::list_or(const std::string& key) const {
  std::vector<std::string> out;
  if (!has(key)) return out;
  std::istringstream in(str(key));
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

void KvConfig::merge_under(const KvConfig& base) {
  for (const auto& [k, v] : base.values_) {
    values_.emplace(k, v);  // keeps existing entries
  }
}

std::string KvConfig::serialize() const {
  // grouped by section, sorted; std::map already iterates sorted
  std::ostringstream out;
  std::string section;
  for (const auto& [k, v] : values_) {
    const std::size_t dot = k.rfind('.');
    const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? k : k.substr(dot + 1);
    if (sec != section) {
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << leaf << " = " << v << '\n';
  }
  return out.str();
}

namespace {

KvConfig qp_common(const char* kind) {
  KvConfig c;
  c.set("family.kind", kind);
  c.set("family.seed", "7");
  c.set("dataset.ratio", "10:1:1");
  c.set("dataset.seed", "13");
  c.set("dataset.sidecar", "alm");
  c.set("dataset.sidecar_splits", "train valid test");
  c.set("scheme.name", "pdl");
  c.set("scheme.batch", "200");
  c.set("scheme.lr", "1e-4");
  c.set("scheme.outer", "10");
  c.set("scheme.rho", "0.5");
  c.set("scheme.alpha", "10");
  c.set("scheme.tau", "0.8");
  c.set("scheme.rho_max", "5000");
  c.set("scheme.dual_norm", "l1");
  c.set("scheme.rho_g", "5");
  c.set("scheme.rho_h", "5");
  c.set("scheme.ld_step", "1e-3");
  c.set("scheme.ld_period", "50");
  c.set("train.seed", "1");
  c.set("alm.alpha", "10");
  c.set("alm.rho", "1");
  c.set("alm.tau", "0.5");
  c.set("alm.outer", "20");
  c.set("alm.eps", "1e-4");
  c.set("alm.inner_tol", "1e-4");
  c.set("alm.rho_max", "1e8");
  c.set("alm.multistart", "1");
  return c;
}

KvConfig qcqp_common() {
  KvConfig c;
  c.set("family.kind", "qcqp");
  c.set("family.seed", "7");
  c.set("dataset.ratio", "10:1:1");
  c.set("dataset.seed", "13");
  c.set("dataset.sidecar", "bruteforce");
  c.set("dataset.sidecar_splits", "test");
  c.set("scheme.name", "pdl");
  c.set("scheme.batch", "200");
  c.set("scheme.lr", "1e-4");
  c.set("scheme.outer", "10");
  c.set("scheme.rho", "1");
  c.set("scheme.alpha", "1.5");
  c.set("scheme.tau", "0.8");
  c.set("scheme.rho_max", "10000");
  c.set("scheme.dual_norm", "l1");
  c.set("scheme.on_the_fly", "true");
  c.set("scheme.rho_g", "100");
  c.set("scheme.rho_h", "100");
  c.set("scheme.ld_step", "1");
  c.set("scheme.ld_period", "50");
  c.set("train.seed", "1");
  c.set("alm.alpha", "1.2");
  c.set("alm.rho", "0.1");
  c.set("alm.tau", "0.5");
  c.set("alm.outer", "50");
  c.set("alm.eps", "1e-4");
  c.set("alm.inner_tol", "1e-4");
  c.set("alm.rho_max", "1e8");
  c.set("alm.multistart", "50");
  return c;
}

}  // namespace

KvConfig preset(const std::string& name) {
  if (name == "qp-default" || name == "nonconvex-default") {
    KvConfig c = qp_common(name == "qp-default" ? "convex_qp" : "nonconvex_qp");
    c.set("family.n", "100");
    c.set("family.n_eq", "50");
    c.set("family.n_ineq", "50");
    c.set("dataset.count", "10000");
    c.set("scheme.hidden", "500 500");
    c.set("scheme.inner", "500");
    c.set("scheme.epochs", "10000");
    return c;
  }
  if (name == "qp-desk" || name == "nonconvex-desk") {
    KvConfig c = qp_common(name == "qp-desk" ? "convex_qp" : "nonconvex_qp");
    c.set("family.n", "50");
    c.set("family.n_eq", "25");
    c.set("family.n_ineq", "25");
    c.set("dataset.count", "1200");
    c.set("scheme.hidden", "256 256");
    c.set("scheme.inner", "200");
    c.set("scheme.epochs", "4000");
    return c;
  }
  if (name == "qcqp-default") {
    KvConfig c = qcqp_common();
    c.set("family.n", "50");
    c.set("family.n_aff", "75");
    c.set("dataset.count", "12000");
    c.set("scheme.hidden", "500 500");
    c.set("scheme.inner", "5000");
    c.set("scheme.valid_every", "500");
    c.set("scheme.epochs", "100000");
    return c;
  }
  if (name == "qcqp-desk") {
    KvConfig c = qcqp_common();
    c.set("family.n", "12");
    c.set("family.n_aff", "18");
    c.set("dataset.count", "1200");
    c.set("scheme.hidden", "128 128");
    c.set("scheme.inner", "1000");
    c.set("scheme.valid_every", "200");
    c.set("scheme.epochs", "20000");
    return c;
  }
  throw config_error("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"qp-default", "nonconvex-default", "qcqp-default",
          "qp-desk",    "nonconvex-desk",    "qcqp-desk"};
}

}  // namespace pdl::cfg
