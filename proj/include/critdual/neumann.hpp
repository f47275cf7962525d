#pragma once

#include <Eigen/SparseLU>
#include <memory>

#include "critdual/mesh.hpp"

namespace critdual {

// K: zero-mean data -> zero-mean solution of -Delta u = h with zero Neumann
// flux. The singular system is bordered with the mean constraint and factored
// once; solve() is const and may be called concurrently.
class NeumannSolver {
 public:
  explicit NeumannSolver(MeshPtr mesh);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }

  // Rejects data whose mean exceeds 1e-8 of its L^1 norm.
  Eigen::VectorXd solve(const Eigen::VectorXd& h) const;
  // Same without the compatibility check; the mean of h is projected out.
  Eigen::VectorXd solve_projected(const Eigen::VectorXd& h) const;

  // <f, K g> in the weighted inner product.
  double pairing(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;

 private:
  MeshPtr mesh_;
  Eigen::SparseMatrix<double> A_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

// Solver cached per mesh instance.
std::shared_ptr<const NeumannSolver> neumann_solver(const MeshPtr& mesh);

struct KtShift {
  double t = 1;
  double kappa = 0;
  double residual = 0;  // int |w+kappa|^{t-1}(w+kappa)
  double scale = 0;     // int |w+kappa|^t, the natural size of the residual
  int iterations = 0;
};

// Root of kappa -> int |w+kappa|^{t-1}(w+kappa); bracket [-max w, -min w].
KtShift kappa_shift(const Mesh& m, const Eigen::VectorXd& w, double t);
// Same with explicit quadrature weights.
KtShift kappa_shift(const Eigen::VectorXd& weights, const Eigen::VectorXd& w, double t);

// |x|^{t-1} x with the tiny-argument floor used throughout.
inline double signed_pow(double x, double t) {
  const double a = std::abs(x);
  if (a < 1e-300) return 0.0;
  return std::copysign(std::pow(a, t), x);
}

Field solve_K(const Field& h);
Field solve_Kt(const Field& h, double t);
KtShift kappa_shift(const Field& w, double t);

}  // namespace critdual
