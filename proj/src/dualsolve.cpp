#include "critdual/dualsolve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include "critdual/errors.hpp"
#include "critdual/symmetry.hpp"

namespace critdual {

namespace {

Eigen::VectorXd signed_pow_vec(const Eigen::VectorXd& x, double t) {
  Eigen::VectorXd y(x.size());
  for (int k = 0; k < x.size(); ++k) y[k] = signed_pow(x[k], t);
  return y;
}

// |K_t h|^{t-1} K_t h given K h, normalized to unit L^{(t+1)/t} norm.
Eigen::VectorXd dual_step(const Mesh& m, const Eigen::VectorXd& Kh, double t) {
  const KtShift ks = kappa_shift(m, Kh, t);
  Eigen::VectorXd a = Kh.array() + ks.kappa;
  Eigen::VectorXd f = signed_pow_vec(a, t);
  const double n = norm_Ls(m, f, (t + 1) / t);
  if (!(n > 0)) throw ConvergenceError("dual iterate collapsed to zero");
  return f / n;
}

// Q is quadratic in the field error, so it stalls near 1e-16 relative while the
// fields still move at 1e-8; decreases below this level are rounding, not ascent loss.
constexpr double kQuotientNoise = 1e-12;

struct Iterate {
  Eigen::VectorXd f, g, Kg;
  double Q = 0;
};

double sup_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, a.cwiseAbs().maxCoeff());
}

RestartResult run_restart(const NeumannSolver& K, const ExponentPack& pk, const DualOptions& opt, Eigen::VectorXd f0,
                          Eigen::VectorXd g0, const std::string& label) {
  const Mesh& m = K.mesh();
  const double al = pk.alpha, be = pk.beta;
  RestartResult rr;
  rr.init = label;
  auto zero_mean = [&](Eigen::VectorXd& x) { x.array() -= integrate(m, x) / m.weights().sum(); };
  zero_mean(f0);
  zero_mean(g0);
  Iterate it;
  it.f = f0 / norm_Ls(m, f0, al);
  it.g = g0 / norm_Ls(m, g0, be);
  it.Kg = K.solve_projected(it.g);
  it.Q = inner(m, it.f, it.Kg);
  // A bad sign pairing gives Q < 0; one block step fixes it, so no special case.
  double tau = 1;
  int streak = 0, calm = 0;
  rr.quotient.push_back(it.Q);
  rr.damping.push_back(tau);
  for (int n = 1; n <= opt.max_iter; ++n) {
    Eigen::VectorXd f1 = dual_step(m, it.Kg, pk.p);
    Eigen::VectorXd Kf1 = K.solve_projected(f1);
    Eigen::VectorXd g1 = dual_step(m, Kf1, pk.q);
    Eigen::VectorXd Kg1 = K.solve_projected(g1);
    double Q1 = inner(m, f1, Kg1);
    // measured on the undamped step: a damped step is short by construction
    const double df = std::max(sup_rel(f1, it.f), sup_rel(g1, it.g));
    bool accepted = true;
    if (opt.damping && Q1 < it.Q - kQuotientNoise * std::abs(it.Q)) {
      accepted = false;
      streak = 0;
      for (tau *= 0.5; tau >= 1e-6; tau *= 0.5) {
        Eigen::VectorXd fc = (1 - tau) * it.f + tau * f1, gc = (1 - tau) * it.g + tau * g1;
        fc /= norm_Ls(m, fc, al);
        gc /= norm_Ls(m, gc, be);
        Eigen::VectorXd Kgc = K.solve_projected(gc);
        const double Qc = inner(m, fc, Kgc);
        if (Qc >= it.Q) {
          f1 = fc;
          g1 = gc;
          Kg1 = Kgc;
          Q1 = Qc;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // no ascent direction left at working precision
        rr.iterations = n;
        rr.converged = calm >= 1;
        break;
      }
    } else if (++streak >= 3) {
      tau = 1;
    }
    if (Q1 < it.Q - kQuotientNoise * std::abs(it.Q)) rr.monotone = false;
    const double dq = std::abs(Q1 - it.Q) / std::abs(Q1);
    it.f = std::move(f1);
    it.g = std::move(g1);
    it.Kg = std::move(Kg1);
    it.Q = Q1;
    rr.quotient.push_back(Q1);
    rr.damping.push_back(tau);
    rr.iterations = n;
    calm = dq < opt.tol ? calm + 1 : 0;
    if (calm >= 5 && df < opt.field_tol) {
      rr.converged = true;
      break;
    }
  }
  rr.D = it.Q;
  rr.f = std::move(it.f);
  rr.g = std::move(it.g);
  return rr;
}

}  // namespace

double rayleigh_ratio(const NeumannSolver& K, const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ExponentPack& pk) {
  const Mesh& m = K.mesh();
  const double nf = norm_Ls(m, f, pk.alpha), ng = norm_Ls(m, g, pk.beta);
  if (!(nf > 0) || !(ng > 0)) throw ConfigError("rayleigh_ratio needs nonzero fields");
  return inner(m, f, K.solve(g)) / (nf * ng);
}

double rayleigh_ratio(const MeshPtr& mesh, const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ExponentPack& pk) {
  return rayleigh_ratio(*neumann_solver(mesh), f, g, pk);
}

Eigen::VectorXd first_eigenfunction(const NeumannSolver& K, int iters) {
  const Mesh& m = K.mesh();
  Eigen::VectorXd x(m.size());
  for (int k = 0; k < m.size(); ++k) {
    const double r = m.r_of(k), t = m.theta_of(k);
    x[k] = r + (m.axisym() ? 2 * std::cos(t) : 0.0) + 0.1 * std::sin(7.0 * k);
  }
  x.array() -= integrate(m, x) / m.weights().sum();
  for (int i = 0; i < iters; ++i) {
    x = K.solve_projected(x);
    x /= norm_Ls(m, x, 2);
  }
  return x;
}

Eigen::VectorXd smooth_noise(const Mesh& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const int kr = 6, kt = m.axisym() ? 6 : 1;
  Eigen::MatrixXd c(kr + 1, kt);
  for (int i = 0; i <= kr; ++i)
    for (int j = 0; j < kt; ++j) c(i, j) = nd(rng) / (1.0 + i + j);
  const double r0 = m.r0(), R = m.R();
  Eigen::VectorXd x(m.size());
  for (int k = 0; k < m.size(); ++k) {
    const double xi = (m.r_of(k) - r0) / (R - r0), t = m.theta_of(k);
    double s = 0;
    for (int i = 0; i <= kr; ++i)
      for (int j = 0; j < kt; ++j) s += c(i, j) * std::cos(i * M_PI * xi) * std::cos(j * t);
    x[k] = s;
  }
  x.array() -= integrate(m, x) / m.weights().sum();
  return x;
}

DualReport maximize_D(const MeshPtr& mesh, const ExponentPack& pk, const DualOptions& opt) {
  auto K = neumann_solver(mesh);
  const Mesh& m = *mesh;
  std::vector<std::pair<std::string, std::pair<Eigen::VectorXd, Eigen::VectorXd>>> inits;
  for (size_t i = 0; i < opt.inits.size(); ++i) inits.push_back({"supplied-" + std::to_string(i), opt.inits[i]});
  if (opt.builtin_inits) {
    const int budget = std::max(1, opt.restarts);
    Eigen::VectorXd phi = first_eigenfunction(*K);
    inits.push_back({"eigenfunction", {phi, phi}});
    if (!m.axisym() && int(inits.size()) < budget + int(opt.inits.size())) {
      Eigen::VectorXd h = smooth_noise(m, opt.seed * 7919 + 1);
      Eigen::VectorXd s = star_transform(RadialProfile::from_mesh(m, h)).project(m);
      inits.push_back({"star-noise", {s, s}});
    }
    for (int r = 0; int(inits.size()) < budget + int(opt.inits.size()); ++r) {
      Eigen::VectorXd a = smooth_noise(m, opt.seed * 1000003 + 2 * r), b = smooth_noise(m, opt.seed * 1000003 + 2 * r + 1);
      // half of the random starts share f = g, the rest are independent
      inits.push_back({"noise-" + std::to_string(r), {a, (r % 2 == 0) ? a : b}});
    }
  }
  if (inits.empty()) throw ConfigError("no initial pairs requested");

  DualReport rep;
  rep.pack = pk;
  rep.mesh = mesh;
  rep.mesh_desc = m.describe();
  rep.restarts.resize(inits.size());
  const int jobs = std::max(1, opt.jobs);
  for (size_t start = 0; start < inits.size(); start += jobs) {
    std::vector<std::future<RestartResult>> fut;
    const size_t stop = std::min(inits.size(), start + jobs);
    for (size_t i = start; i < stop; ++i) {
      fut.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, [&, i] {
        return run_restart(*K, pk, opt, inits[i].second.first, inits[i].second.second, inits[i].first);
      }));
    }
    for (size_t i = start; i < stop; ++i) rep.restarts[i] = fut[i - start].get();
  }
  for (size_t i = 0; i < rep.restarts.size(); ++i) {
    const auto& r = rep.restarts[i];
    if (!r.converged) continue;
    if (rep.best < 0 || r.D > rep.restarts[rep.best].D) rep.best = int(i);
  }
  rep.converged = rep.best >= 0;
  if (!rep.converged) {
    for (size_t i = 0; i < rep.restarts.size(); ++i)
      if (rep.best < 0 || rep.restarts[i].D > rep.restarts[rep.best].D) rep.best = int(i);
  }
  const auto& b = rep.restarts[rep.best];
  rep.D = b.D;
  rep.f = b.f;
  rep.g = b.g;
  for (size_t i = 0; i < rep.restarts.size(); ++i)
    if (rep.restarts[i].converged && std::abs(rep.restarts[i].D - rep.D) <= 1e-8 * rep.D) rep.near_best.push_back(int(i));
  if (opt.S > 0) rep.threshold = std::pow(2.0, 2.0 / pk.N) / opt.S;
  recover_solution(rep);
  return rep;
}

DualReport maximize_D_radial(const MeshPtr& mesh, const ExponentPack& pk, const DualOptions& opt) {
  if (mesh->axisym()) throw ConfigError("maximize_D_radial needs a radial mesh");
  return maximize_D(mesh, pk, opt);
}

double energy(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v, const ExponentPack& pk) {
  return dirichlet_form(m, u, v) - std::pow(norm_Ls(m, u, pk.p + 1), pk.p + 1) / (pk.p + 1) -
         std::pow(norm_Ls(m, v, pk.q + 1), pk.q + 1) / (pk.q + 1);
}

void recover_solution(DualReport& rep) {
  const auto K = neumann_solver(rep.mesh);
  const Mesh& m = *rep.mesh;
  const auto& pk = rep.pack;
  const double p = pk.p, q = pk.q, D = rep.D, pq1 = p * q - 1;
  const double wsum = m.weights().sum();
  rep.mean_f = integrate(m, rep.f) / norm_Ls(m, rep.f, 1);
  rep.mean_g = integrate(m, rep.g) / norm_Ls(m, rep.g, 1);

  Eigen::VectorXd Kg = K->solve_projected(rep.g), Kf = K->solve_projected(rep.f);
  const KtShift kp = kappa_shift(m, Kg, p), kq = kappa_shift(m, Kf, q);
  Eigen::VectorXd Kpg = Kg.array() + kp.kappa, Kqf = Kf.array() + kq.kappa;
  rep.u = std::pow(D, -q * (p + 1) / pq1) * Kpg;
  rep.v = std::pow(D, -p * (q + 1) / pq1) * Kqf;

  Eigen::VectorXd fu = signed_pow_vec(rep.f, 1 / p), gv = signed_pow_vec(rep.g, 1 / q);
  rep.el_residual = norm_Ls(m, Kpg - D * fu, p + 1) / D;
  rep.el_residual_q = norm_Ls(m, Kqf - D * gv, q + 1) / D;
  const double su = rep.u.cwiseAbs().maxCoeff(), sv = rep.v.cwiseAbs().maxCoeff();
  rep.pointwise_u = (rep.u - std::pow(D, -(q + 1) / pq1) * fu).cwiseAbs().maxCoeff() / su;
  rep.pointwise_v = (rep.v - std::pow(D, -(p + 1) / pq1) * gv).cwiseAbs().maxCoeff() / sv;

  Eigen::VectorXd vq = signed_pow_vec(rep.v, q), up = signed_pow_vec(rep.u, p);
  Eigen::VectorXd ru = laplacian(m, rep.u) + vq, rv = laplacian(m, rep.v) + up;
  rep.residual_u = rep.residual_v = 0;
  for (int k = 0; k < m.size(); ++k) {
    if (!m.interior()[k]) continue;
    rep.residual_u = std::max(rep.residual_u, std::abs(ru[k]));
    rep.residual_v = std::max(rep.residual_v, std::abs(rv[k]));
  }
  rep.residual_u_rel = rep.residual_u / vq.cwiseAbs().maxCoeff();
  rep.residual_v_rel = rep.residual_v / up.cwiseAbs().maxCoeff();
  rep.compat_u = integrate(m, up) / norm_Ls(m, up, 1);
  rep.compat_v = integrate(m, vq) / norm_Ls(m, vq, 1);
  (void)wsum;

  rep.energy = energy(m, rep.u, rep.v, pk);
  rep.c_pred = (2.0 / pk.N) * std::pow(D, -pk.N / 2.0);
  // normal form: (t f, s g) with gamma1 ||tf||^alpha + gamma2 ||sg||^beta = 1 and the
  // product form preserved; at a maximizer both norms are equal to one already
  rep.constraint_value = pk.gamma1 * std::pow(norm_Ls(m, rep.f, pk.alpha), pk.alpha) +
                         pk.gamma2 * std::pow(norm_Ls(m, rep.g, pk.beta), pk.beta);
}

void write_trace_csv(const std::string& path, const DualReport& rep) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os.precision(17);
  os << "restart,init,iteration,quotient,damping\n";
  for (size_t i = 0; i < rep.restarts.size(); ++i) {
    const auto& r = rep.restarts[i];
    for (size_t n = 0; n < r.quotient.size(); ++n)
      os << i << ',' << r.init << ',' << n << ',' << r.quotient[n] << ',' << r.damping[n] << '\n';
  }
}

}  // namespace critdual
