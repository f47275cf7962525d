#include "critdual/neumann.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "critdual/errors.hpp"

namespace critdual {

NeumannSolver::NeumannSolver(MeshPtr mesh) : mesh_(std::move(mesh)) {
  const int n = mesh_->size();
  const auto& L = mesh_->stiffness();
  const auto& w = mesh_->weights();
  // Scale the border so its entries are comparable to the stiffness diagonal.
  const double sc = L.diagonal().cwiseAbs().maxCoeff() / w.maxCoeff();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(L.nonZeros() + 2 * n);
  for (int k = 0; k < L.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < n; ++k) {
    trip.emplace_back(k, n, sc * w[k]);
    trip.emplace_back(n, k, sc * w[k]);
  }
  A_.resize(n + 1, n + 1);
  A_.setFromTriplets(trip.begin(), trip.end());
  A_.makeCompressed();
  lu_.analyzePattern(A_);
  lu_.factorize(A_);
  if (lu_.info() != Eigen::Success) throw ConvergenceError("Neumann factorization failed: " + lu_.lastErrorMessage());
}

Eigen::VectorXd NeumannSolver::solve_projected(const Eigen::VectorXd& h) const {
  const int n = mesh_->size();
  const auto& w = mesh_->weights();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = w.cwiseProduct(h);
  rhs[n] = 0;
  Eigen::VectorXd x = lu_.solve(rhs);
  // one round of iterative refinement
  Eigen::VectorXd r = rhs - A_ * x;
  x += lu_.solve(r);
  if (!x.allFinite()) throw ConvergenceError("Neumann solve produced non-finite values");
  Eigen::VectorXd u = x.head(n);
  u.array() -= u.dot(w) / w.sum();
  return u;
}

Eigen::VectorXd NeumannSolver::solve(const Eigen::VectorXd& h) const {
  const auto& w = mesh_->weights();
  const double mean = w.dot(h);
  const double l1 = w.dot(h.cwiseAbs());
  if (std::abs(mean) > 1e-8 * l1) {
    std::ostringstream os;
    os << "Neumann data has nonzero mean: integral " << mean << " vs L1 norm " << l1;
    throw ConfigError(os.str());
  }
  return solve_projected(h);
}

double NeumannSolver::pairing(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  return inner(*mesh_, f, solve_projected(g));
}

std::shared_ptr<const NeumannSolver> neumann_solver(const MeshPtr& mesh) {
  static std::mutex mu;
  static std::map<const Mesh*, std::weak_ptr<const NeumannSolver>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[mesh.get()];
  if (auto s = slot.lock(); s && s->mesh_ptr() == mesh) return s;
  auto s = std::make_shared<const NeumannSolver>(mesh);
  slot = s;
  return s;
}

KtShift kappa_shift(const Mesh& m, const Eigen::VectorXd& w, double t) { return kappa_shift(m.weights(), w, t); }

KtShift kappa_shift(const Eigen::VectorXd& wt, const Eigen::VectorXd& w, double t) {
  if (!(t > 0)) throw ConfigError("kappa_shift needs t > 0");
  KtShift out;
  out.t = t;
  const int n = int(w.size());
  auto eval = [&](double kap, double& phi, double& dphi, double& scale) {
    phi = dphi = scale = 0;
    for (int k = 0; k < n; ++k) {
      const double x = w[k] + kap;
      const double a = std::abs(x);
      if (a < 1e-300) continue;
      const double am = std::pow(a, t - 1);
      phi += wt[k] * std::copysign(am * a, x);
      dphi += wt[k] * am;
      scale += wt[k] * am * a;
    }
    dphi *= t;
  };
  if (t == 1) {
    out.kappa = -wt.dot(w) / wt.sum();
    double d;
    eval(out.kappa, out.residual, d, out.scale);
    return out;
  }
  double lo = -w.maxCoeff(), hi = -w.minCoeff();
  const double width0 = hi - lo;
  if (!(width0 > 0)) {
    out.kappa = lo;
    return out;
  }
  // phi(lo) <= 0 <= phi(hi); safeguarded Newton inside the shrinking bracket
  double kap = 0.5 * (lo + hi);
  if (kap < lo || kap > hi) kap = 0.5 * (lo + hi);
  double phi, dphi, scale;
  const double xtol = 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi));
  for (int it = 0; it < 200; ++it) {
    eval(kap, phi, dphi, scale);
    out.iterations = it + 1;
    if (std::abs(phi) <= 1e-15 * scale) break;
    if (phi < 0)
      lo = kap;
    else
      hi = kap;
    if (hi - lo <= xtol) break;
    double next = (dphi > 0) ? kap - phi / dphi : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    kap = next;
  }
  // two Newton polish steps, kept only if they reduce the residual
  for (int s = 0; s < 2; ++s) {
    if (!(dphi > 0)) break;
    const double cand = kap - phi / dphi;
    double p2, d2, s2;
    eval(cand, p2, d2, s2);
    if (std::abs(p2) >= std::abs(phi)) break;
    kap = cand;
    phi = p2;
    dphi = d2;
    scale = s2;
  }
  out.kappa = kap;
  out.residual = phi;
  out.scale = scale;
  return out;
}

Field solve_K(const Field& h) {
  auto s = neumann_solver(h.mesh_ptr());
  return Field(h.mesh_ptr(), s->solve(h.values()));
}

Field solve_Kt(const Field& h, double t) {
  Field u = solve_K(h);
  const KtShift k = kappa_shift(u.mesh(), u.values(), t);
  Eigen::VectorXd v = u.values().array() + k.kappa;
  return Field(h.mesh_ptr(), std::move(v));
}

KtShift kappa_shift(const Field& w, double t) { return kappa_shift(w.mesh(), w.values(), t); }

}  // namespace critdual
