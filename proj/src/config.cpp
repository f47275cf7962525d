#include "critdual/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "critdual/errors.hpp"

namespace critdual {

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) throw ConfigError(key + ": not a number: '" + s + "'");
  return x;
}

long long parse_int(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not an integer: '" + s + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

struct Slot {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

struct Table {
  std::vector<std::string> keys;
  std::map<std::string, Slot> slots;

  template <class T>
  void add(const std::string& key, T RunConfig::*m) {
    Slot s;
    s.get = [m](const RunConfig& c) -> std::string {
      if constexpr (std::is_same_v<T, double>) return fmt_double(c.*m);
      else if constexpr (std::is_same_v<T, bool>) return c.*m ? "true" : "false";
      else if constexpr (std::is_same_v<T, std::string>) return c.*m;
      else return std::to_string(c.*m);
    };
    s.set = [m, key](RunConfig& c, const std::string& v) {
      if constexpr (std::is_same_v<T, double>) c.*m = parse_double(key, v);
      else if constexpr (std::is_same_v<T, bool>) c.*m = parse_bool(key, v);
      else if constexpr (std::is_same_v<T, std::string>) c.*m = v;
      else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (v.empty() || v[0] == '-') throw ConfigError(key + ": expected a nonnegative integer");
        errno = 0;
        char* end = nullptr;
        c.*m = std::strtoull(v.c_str(), &end, 10);
        if (*end != '\0' || errno == ERANGE) throw ConfigError(key + ": not an integer: '" + v + "'");
      } else {
        const long long x = parse_int(key, v);
        if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(key + ": out of range");
        c.*m = int(x);
      }
    };
    keys.push_back(key);
    slots.emplace(key, s);
  }
};

const Table& table() {
  static const Table t = [] {
    Table t;
    t.add("subcommand", &RunConfig::subcommand);
    t.add("p", &RunConfig::p);
    t.add("q", &RunConfig::q);
    t.add("N", &RunConfig::N);
    t.add("snap", &RunConfig::snap);
    t.add("mesh", &RunConfig::mesh);
    t.add("r0", &RunConfig::r0);
    t.add("R", &RunConfig::R);
    t.add("nr", &RunConfig::nr);
    t.add("ntheta", &RunConfig::ntheta);
    t.add("r_grading", &RunConfig::r_grading);
    t.add("theta_grading", &RunConfig::theta_grading);
    t.add("allow_coarse", &RunConfig::allow_coarse);
    t.add("restarts", &RunConfig::restarts);
    t.add("max_iter", &RunConfig::max_iter);
    t.add("tol", &RunConfig::tol);
    t.add("field_tol", &RunConfig::field_tol);
    t.add("damping", &RunConfig::damping);
    t.add("seed", &RunConfig::seed);
    t.add("jobs", &RunConfig::jobs);
    t.add("quantity", &RunConfig::quantity);
    t.add("family", &RunConfig::family);
    t.add("eps_hi", &RunConfig::eps_hi);
    t.add("eps_lo", &RunConfig::eps_lo);
    t.add("eps_n", &RunConfig::eps_n);
    t.add("pairs", &RunConfig::pairs);
    t.add("gap", &RunConfig::gap);
    t.add("noise", &RunConfig::noise);
    t.add("quick", &RunConfig::quick);
    t.add("out", &RunConfig::out);
    return t;
  }();
  return t;
}

const Slot& find(const std::string& key) {
  auto it = table().slots.find(key);
  if (it == table().slots.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<std::string>& config_keys() { return table().keys; }

std::string get_value(const RunConfig& c, const std::string& key) { return find(key).get(c); }

void set_value(RunConfig& c, const std::string& key, const std::string& value) { find(key).set(c, value); }

std::vector<std::pair<std::string, std::string>> to_pairs(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_keys()) out.emplace_back(k, get_value(c, k));
  return out;
}

std::string to_text(const RunConfig& c) {
  std::string s;
  for (const auto& [k, v] : to_pairs(c)) s += k + "=" + v + "\n";
  return s;
}

void apply_text(RunConfig& c, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    set_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

RunConfig read_config_file(const std::string& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  apply_text(base, ss.str());
  return base;
}

ExponentPack resolve_pack(const RunConfig& c) {
  if (c.p == 0 && c.q == 0) throw ConfigError("give p or q");
  if (c.q == 0) return pack_from_p(c.p, c.N);
  if (c.p == 0) return derived_constants(hyperbola_partner(c.q, c.N), c.q, c.N);
  if (!c.snap && std::abs(hyperbola_residual(c.p, c.q, c.N)) > 1e-15)
    throw ConfigError("(p, q) is off the critical hyperbola by " + fmt_double(hyperbola_residual(c.p, c.q, c.N)) +
                      " and snap is off");
  return derived_constants(c.p, c.q, c.N);
}

MeshParams mesh_params(const RunConfig& c) {
  MeshParams m;
  m.kind = mesh_kind_from_string(c.mesh);
  m.N = c.N;
  m.r0 = m.kind == MeshKind::RadialBall || m.kind == MeshKind::AxisymBall ? 0 : c.r0;
  m.R = c.R;
  m.nr = c.nr;
  m.ntheta = c.ntheta;
  m.r_grading = c.r_grading;
  m.theta_grading = c.theta_grading;
  m.allow_coarse = c.allow_coarse;
  return m;
}

DualOptions dual_options(const RunConfig& c) {
  DualOptions o;
  o.restarts = c.restarts;
  o.max_iter = c.max_iter;
  o.tol = c.tol;
  o.field_tol = c.field_tol;
  o.damping = c.damping;
  o.seed = c.seed;
  o.jobs = c.jobs;
  return o;
}

}  // namespace critdual
