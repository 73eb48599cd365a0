#pragma once

// Flat `key = value` configuration with a typed schema. Unknown keys are
// rejected. File paths in values are resolved against the config's directory.
//
//   delta = 0.1
//   kernel = exponential 0.99          # or: delayed_exponential A D,
//                                      #     rectangular B, tabulated grid.csv
//   mu_bar = 0.005,0.005               # or one value repeated p times
//   W = W.csv                          # or: zero, identity:0.75
//   feasible_set = l1:10               # box:wmax | l1:c | nuclear:c | support:mask.csv

#include <hawkes/common.hpp>
#include <hawkes/io.hpp>
#include <hawkes/kernels.hpp>
#include <hawkes/projections.hpp>
#include <hawkes/tracker.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace hawkes {

enum class Key { Real, Integer, Bool, Text };

using Schema = std::map<std::string, Key>;

class Config {
 public:
  Config() = default;
  Config(std::map<std::string, std::string> values, std::filesystem::path base = {})
      : values_(std::move(values)), base_(std::move(base)) {}

  static Config parse(std::istream& in, const Schema& schema, std::filesystem::path base = {}) {
    std::map<std::string, std::string> values;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find('#');
      const auto s = detail::trim(std::string_view(raw).substr(0, hash));
      if (s.empty()) continue;
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
      const std::string key(detail::trim(s.substr(0, eq)));
      const std::string value(detail::trim(s.substr(eq + 1)));
      const auto it = schema.find(key);
      if (it == schema.end()) throw ConfigError("config line " + std::to_string(line) + ": unknown key '" + key + "'");
      check_type(key, value, it->second, line);
      if (!values.emplace(key, value).second)
        throw ConfigError("config line " + std::to_string(line) + ": duplicate key '" + key + "'");
    }
    return Config(std::move(values), std::move(base));
  }

  static Config load(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse(in, schema, path.parent_path());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }
  std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }
  double real(const std::string& key) const { return *detail::parse_double(text(key)); }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }
  long long integer(const std::string& key) const { return *detail::parse_int(text(key)); }
  long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }
  bool boolean(const std::string& key, bool fallback = false) const {
    if (!has(key)) return fallback;
    const auto& v = text(key);
    return v == "true" || v == "1" || v == "yes";
  }
  std::filesystem::path path(const std::string& key) const { return resolve(text(key)); }
  std::filesystem::path resolve(const std::string& file) const {
    const std::filesystem::path p(file);
    return p.is_absolute() || base_.empty() ? p : base_ / p;
  }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static void check_type(const std::string& key, const std::string& value, Key type, std::size_t line) {
    bool ok = true;
    if (type == Key::Real) ok = detail::parse_double(value).has_value();
    else if (type == Key::Integer) ok = detail::parse_int(value).has_value();
    else if (type == Key::Bool) ok = value == "true" || value == "false" || value == "1" || value == "0" || value == "yes" || value == "no";
    if (!ok) throw ConfigError("config line " + std::to_string(line) + ": bad value '" + value + "' for '" + key + "'");
  }

  std::map<std::string, std::string> values_;
  std::filesystem::path base_;
};

inline Schema merge(std::initializer_list<Schema> parts) {
  Schema out;
  for (const auto& s : parts) out.insert(s.begin(), s.end());
  return out;
}

inline const Schema& model_schema() {
  static const Schema s{{"p", Key::Integer}, {"delta", Key::Real}, {"kernel", Key::Text}, {"mu_bar", Key::Text},
                        {"W", Key::Text}, {"lambda_min", Key::Real}, {"lambda_max", Key::Real}};
  return s;
}
inline const Schema& track_schema() {
  static const Schema s = merge({model_schema(), {{"eta0", Key::Real}, {"schedule", Key::Text},
                                                  {"moving_average_window", Key::Real}, {"trace_stride", Key::Integer}}});
  return s;
}
inline const Schema& learn_schema() {
  static const Schema s =
      merge({track_schema(), {{"rho0", Key::Real}, {"feasible_set", Key::Text}, {"l1_penalty", Key::Real},
                              {"learn_mu", Key::Bool}, {"snapshot_every", Key::Integer}, {"x_max", Key::Real},
                              {"method", Key::Text}}});
  return s;
}
inline const Schema& simulate_schema() {
  static const Schema s = merge({model_schema(), {{"horizon", Key::Real}, {"seed", Key::Integer},
                                                  {"x_max_guard", Key::Real}, {"max_events", Key::Integer},
                                                  {"network", Key::Text}}});
  return s;
}
inline const Schema& batch_schema() {
  static const Schema s = merge({model_schema(), {{"l1_penalty", Key::Real}, {"max_outer", Key::Integer},
                                                  {"max_line_search", Key::Integer}, {"tol", Key::Real}}});
  return s;
}
inline const Schema& forecast_schema() {
  static const Schema s = merge({learn_schema(), {{"mode", Key::Text}}});
  return s;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline double to_real(const std::string& s, const std::string& what) {
  const auto v = detail::parse_double(s);
  if (!v) throw ConfigError("bad number '" + s + "' in " + what);
  return *v;
}

inline Kernel parse_kernel(const Config& cfg) {
  const auto parts = split_ws(cfg.text("kernel"));
  require_config(!parts.empty(), "kernel: empty value");
  const auto& kind = parts[0];
  auto arg = [&](std::size_t i) {
    require_config(parts.size() > i, "kernel " + kind + ": missing parameter");
    return to_real(parts[i], "kernel");
  };
  if (kind == "exponential") return Kernel::exponential(arg(1));
  if (kind == "delayed_exponential") return Kernel::delayed_exponential(arg(1), arg(2));
  if (kind == "rectangular") return Kernel::rectangular(arg(1));
  if (kind == "tabulated") {
    require_config(parts.size() > 1, "kernel tabulated: missing grid file");
    const auto file = cfg.resolve(parts[1]);
    const Matrix m = read_matrix_csv(file);
    require_config(m.cols() == 2, "tabulated kernel file needs two columns: s,h");
    std::vector<double> grid(m.rows()), values(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) grid[i] = m(i, 0), values[i] = m(i, 1);
    return Kernel::tabulated(std::move(grid), std::move(values));
  }
  throw ConfigError("unknown kernel '" + kind + "'");
}

/// Comma-separated values, or a single value repeated p times.
inline Vector parse_vector(const std::string& text, std::optional<std::size_t> p, const std::string& what) {
  std::vector<double> v;
  std::stringstream in(text);
  for (std::string cell; std::getline(in, cell, ',');) v.push_back(to_real(std::string(detail::trim(cell)), what));
  require_config(!v.empty(), what + ": empty value");
  if (v.size() == 1 && p && *p > 1) return Vector::Constant(static_cast<Eigen::Index>(*p), v[0]);
  if (p) require_config(v.size() == *p, what + ": expected " + std::to_string(*p) + " values");
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::optional<std::size_t> config_p(const Config& cfg) {
  if (!cfg.has("p")) return std::nullopt;
  const auto p = cfg.integer("p");
  require_config(p > 0, "p must be positive");
  return static_cast<std::size_t>(p);
}

inline Vector parse_mu_bar(const Config& cfg, std::optional<std::size_t> p) {
  return parse_vector(cfg.text("mu_bar"), p ? p : config_p(cfg), "mu_bar");
}

/// `zero`, `identity:s`, or a dense p x p CSV file.
inline Matrix parse_network(const Config& cfg, std::size_t p, const std::string& key = "W") {
  const auto& v = cfg.text(key);
  const auto n = static_cast<Eigen::Index>(p);
  if (v == "zero") return Matrix::Zero(n, n);
  if (v.rfind("identity:", 0) == 0) return to_real(v.substr(9), key) * Matrix::Identity(n, n);
  Matrix w = read_matrix_csv(cfg.path(key));
  if (w.rows() != n || w.cols() != n)
    throw ConfigError(key + " file is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + ", expected " +
                      std::to_string(p) + "x" + std::to_string(p));
  return w;
}

/// The support file holds 1 where an entry may be nonzero and 0 where it is known to be zero.
inline FeasibleSet parse_feasible_set(const Config& cfg, std::size_t p) {
  const auto v = cfg.text("feasible_set", "box:inf");
  const auto colon = v.find(':');
  require_config(colon != std::string::npos, "feasible_set must look like kind:value");
  const auto kind = v.substr(0, colon);
  const auto arg = v.substr(colon + 1);
  if (kind == "box") return BoxSet{arg == "inf" ? std::numeric_limits<double>::infinity() : to_real(arg, "feasible_set")};
  if (kind == "l1") return L1BallSet{to_real(arg, "feasible_set")};
  if (kind == "nuclear") return NuclearBallSet{to_real(arg, "feasible_set")};
  if (kind == "support") {
    const auto file = cfg.resolve(arg);
    const Matrix m = read_matrix_csv(file);
    const auto n = static_cast<Eigen::Index>(p);
    require_config(m.rows() == n && m.cols() == n, "support mask must be p x p");
    return FixedSupportSet{(m.array() == 0.0), std::numeric_limits<double>::infinity()};
  }
  throw ConfigError("unknown feasible_set '" + kind + "'");
}

inline RateBounds parse_bounds(const Config& cfg) {
  RateBounds b;
  b.lo = cfg.real("lambda_min", b.lo);
  b.hi = cfg.real("lambda_max", b.hi);
  require_config(b.lo > 0.0 && b.lo <= b.hi, "need 0 < lambda_min <= lambda_max");
  return b;
}

inline StepSize parse_step(const Config& cfg, const std::string& key, double fallback, std::size_t bins) {
  StepSize s;
  s.base = cfg.real(key, fallback);
  s.horizon_bins = bins;
  const auto sched = cfg.text("schedule", "constant");
  if (sched == "constant") s.schedule = Schedule::Constant;
  else if (sched == "sqrt_t") s.schedule = Schedule::InverseSqrt;
  else throw ConfigError("schedule must be constant or sqrt_t");
  return s;
}

}  // namespace hawkes
