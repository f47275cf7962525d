#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "critdual/dualsolve.hpp"
#include "critdual/exponents.hpp"
#include "critdual/mesh.hpp"

namespace critdual {

// Everything a run depends on. Serialized as key=value lines; doubles are
// written with 17 significant digits so a written file reads back bit-exactly.
struct RunConfig {
  std::string subcommand = "bubble";
  // pack: p or q plus N; with both given, snap decides whether a small
  // drift off the hyperbola is repaired or rejected
  double p = 0, q = 0;  // 0 = not given
  int N = 4;
  bool snap = true;
  // mesh
  std::string mesh = "radial-annulus";
  double r0 = 1, R = 2;
  int nr = 256, ntheta = 64;
  double r_grading = 0, theta_grading = 0;
  bool allow_coarse = false;
  // optimizer
  int restarts = 8, max_iter = 5000;
  double tol = 1e-10, field_tol = 1e-12;
  bool damping = true;
  std::uint64_t seed = 1;
  int jobs = 1;
  // sweeps; eps_hi = 0 picks a grid suited to the quantity
  std::string quantity = "U1";  // U1, V1, Up1, Vq1, boundary, normal, ratio
  std::string family = "boundary";
  double eps_hi = 0, eps_lo = 0;
  int eps_n = 7;
  // symmetry
  int pairs = 200;
  bool gap = true;
  bool noise = true;
  // verify
  bool quick = false;
  std::string out = "out";
};

// Keys in serialization order.
const std::vector<std::string>& config_keys();
std::string get_value(const RunConfig& c, const std::string& key);
// Throws ConfigError on unknown keys and unparsable values.
void set_value(RunConfig& c, const std::string& key, const std::string& value);

std::vector<std::pair<std::string, std::string>> to_pairs(const RunConfig& c);
std::string to_text(const RunConfig& c);
// Applies the key=value lines of text on top of c; '#' starts a comment.
void apply_text(RunConfig& c, const std::string& text);
RunConfig read_config_file(const std::string& path, RunConfig base = {});

ExponentPack resolve_pack(const RunConfig& c);
MeshParams mesh_params(const RunConfig& c);
DualOptions dual_options(const RunConfig& c);

}  // namespace critdual
