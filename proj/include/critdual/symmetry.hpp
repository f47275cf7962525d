#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "critdual/dualsolve.hpp"
#include "critdual/mesh.hpp"

namespace critdual {

// Radial step function on [r0, R]: values[k] on (edges[k], edges[k+1]).
// All operations below are exact on this class, so rearrangement commutes
// with the L^s norms up to rounding.
struct RadialProfile {
  int N = 4;
  double r0 = 0, R = 1;
  std::vector<double> edges, values;

  static RadialProfile from_mesh(const Mesh& radial_mesh, const Eigen::VectorXd& h);
  static RadialProfile from_volumes(int N, double r0, const std::vector<double>& vols, const std::vector<double>& vals);

  // s(r) = omega_N (r^N - r0^N), omega_N the unit-ball volume.
  double volume_coordinate(double r) const;
  double radius_of_volume(double s) const;
  std::vector<double> piece_volumes() const;
  // cumulative integral at the edges (size edges.size())
  std::vector<double> cumulative_I() const;
  double integral() const;
  double norm(double s) const;
  double value_at(double r) const;
  // cell averages on a radial mesh over the same interval
  Eigen::VectorXd project(const Mesh& radial_mesh) const;
};

// Cumulative integral I h at the mesh faces r0 = r_0 < ... < r_nr = R.
std::vector<double> cumulative_I(const Mesh& radial_mesh, const Eigen::VectorXd& h);

RadialProfile flip_F(const RadialProfile& h);
RadialProfile star_transform(const RadialProfile& h);
// Exact continuum int f K g for radial step functions with zero mean:
// int I_f I_g / (sigma_{N-1} r^{N-1}) dr.
double radial_pairing(const RadialProfile& f, const RadialProfile& g);
// Largest pointwise difference, sampled on the union of breakpoints.
double max_difference(const RadialProfile& a, const RadialProfile& b);

// Polarization in the axisymmetric reduction: reflection theta -> pi - theta,
// orientation +1 favours the north half (theta < pi/2), -1 the south half.
Eigen::VectorXd polarize(const Mesh& axisym_mesh, const Eigen::VectorXd& w, int orientation = +1);

struct FsDiagnostic {
  bool pass = false;
  int orientation = 0;     // +1: nonincreasing in theta, -1: nondecreasing
  double violation = 0;    // largest monotonicity violation, relative to ||u||_inf
  double violation_u = 0, violation_v = 0;
  double radial_spread = 0;  // max_r (max_theta u - min_theta u) / ||u||_inf
};
// Simultaneous theta-monotonicity of u and v for a common axis orientation.
FsDiagnostic fs_check(const Mesh& axisym_mesh, const Eigen::VectorXd& u, const Eigen::VectorXd& v, double tol = 1e-4);

struct SymmetryGap {
  double D = 0, D_rad = 0, gap = 0;
  double noise = 0;  // refinement noise estimate of the gap
  DualReport axi, rad;
};
struct GapOptions {
  int N = 6;
  double r0 = 1, R = 2;
  int nr = 64, ntheta = 48;
  bool allow_coarse = false;
  bool both_radial = false;
  bool estimate_noise = true;  // re-solve on a refined pair of meshes
  DualOptions dual;
};
SymmetryGap symmetry_gap(const ExponentPack& pack, const GapOptions& opt);

}  // namespace critdual
