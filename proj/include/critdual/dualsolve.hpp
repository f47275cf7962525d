#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "critdual/exponents.hpp"
#include "critdual/mesh.hpp"
#include "critdual/neumann.hpp"

namespace critdual {

struct DualOptions {
  int restarts = 8;
  int max_iter = 5000;
  double tol = 1e-10;        // relative quotient change, over 5 sweeps
  double field_tol = 1e-12;  // sup-norm change of the iterates relative to their size
  bool damping = true;
  std::uint64_t seed = 1;
  int jobs = 1;
  // Caller-supplied initial pairs (f, g), tried before the builtin menu.
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> inits;
  bool builtin_inits = true;
  double S = 0;  // Sobolev constant for the threshold; 0 leaves it unset
};

struct RestartResult {
  std::string init;
  double D = 0;
  int iterations = 0;
  bool converged = false;
  bool monotone = true;  // no accepted step decreased the quotient
  std::vector<double> quotient, damping;
  Eigen::VectorXd f, g;
};

struct DualReport {
  ExponentPack pack;
  MeshPtr mesh;
  std::string mesh_desc;
  double D = 0;
  Eigen::VectorXd f, g;  // unit dual norms, zero mean
  Eigen::VectorXd u, v;
  double residual_u = 0, residual_v = 0;          // sup |Delta u + |v|^{q-1}v| over interior cells
  double residual_u_rel = 0, residual_v_rel = 0;  // same divided by sup of the source term
  double energy = 0, c_pred = 0;
  double threshold = 0;  // 2^{2/N}/S when S is known
  double mean_f = 0, mean_g = 0;
  double compat_u = 0, compat_v = 0;  // int |u|^{p-1}u and int |v|^{q-1}v, relative to their L^1 size
  double el_residual = 0;             // ||K_p g - D |f|^{1/p-1} f||_{p+1} / D
  double el_residual_q = 0;
  double pointwise_u = 0, pointwise_v = 0;  // sup-norm error of u = D^{-(q+1)/(pq-1)} |f|^{1/p-1} f
  double constraint_value = 0;  // gamma1||f_c||^alpha + gamma2||g_c||^beta for the normal form pair
  std::vector<RestartResult> restarts;
  std::vector<int> near_best;  // restarts within 1e-8 (relative) of the best
  int best = -1;
  bool converged = false;
};

// int f K g / (||f||_alpha ||g||_beta).
double rayleigh_ratio(const NeumannSolver& K, const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ExponentPack& pack);
double rayleigh_ratio(const MeshPtr& mesh, const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ExponentPack& pack);

DualReport maximize_D(const MeshPtr& mesh, const ExponentPack& pack, const DualOptions& opt = {});
// Same algorithm; requires a radial mesh and reports D_rad.
DualReport maximize_D_radial(const MeshPtr& mesh, const ExponentPack& pack, const DualOptions& opt = {});

// Fills u, v, residuals, compatibility, energy and the EL diagnostics.
void recover_solution(DualReport& rep);

// int grad u . grad v - ||u||^{p+1}/(p+1) - ||v||^{q+1}/(q+1).
double energy(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v, const ExponentPack& pack);

// Top eigenvector of K by power iteration (first nonconstant Neumann mode).
Eigen::VectorXd first_eigenfunction(const NeumannSolver& K, int iters = 300);

// Smooth zero-mean random field built from a few low modes.
Eigen::VectorXd smooth_noise(const Mesh& m, std::uint64_t seed);

// Trace CSV: restart,init,iteration,quotient,damping.
void write_trace_csv(const std::string& path, const DualReport& rep);

}  // namespace critdual
