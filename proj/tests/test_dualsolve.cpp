#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "critdual/dualsolve.hpp"
#include "critdual/errors.hpp"

using namespace critdual;

namespace {

MeshPtr radial_annulus(int N, int nr) {
  MeshParams p;
  p.kind = MeshKind::RadialAnnulus;
  p.N = N;
  p.r0 = 1;
  p.R = 2;
  p.nr = nr;
  p.allow_coarse = true;
  return Mesh::build(p);
}

Eigen::VectorXd random_zero_mean(const Mesh& m, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(m.size());
  for (int k = 0; k < m.size(); ++k) v[k] = nd(rng);
  v.array() -= integrate(m, v) / m.weights().sum();
  return v;
}

double lp(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double s) {
  return std::pow((w.array() * x.array().abs().pow(s)).sum(), 1 / s);
}

// Dense pseudo-inverse of the Neumann operator: sum over nonconstant modes of phi phi^T W / lambda.
struct DenseK {
  Eigen::MatrixXd K;
  Eigen::VectorXd w, lam;
  Eigen::MatrixXd phi;
  explicit DenseK(const Mesh& m) : w(m.weights()) {
    Eigen::MatrixXd L = Eigen::MatrixXd(m.stiffness());
    Eigen::VectorXd s = w.cwiseSqrt().cwiseInverse();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.asDiagonal() * L * s.asDiagonal());
    lam = es.eigenvalues();
    phi = s.asDiagonal() * es.eigenvectors();
    const int n = m.size();
    K = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) K += phi.col(k) * phi.col(k).transpose() / lam[k];
    K = K * w.asDiagonal();
  }
};

// For p = 1 both block maxima are explicit norms. Maximizing over g first leaves
// D = sup_f min_c ||K f + c||_{q+1} / ||f||_2, which is smooth in f; plain
// gradient ascent with backtracking, the inner c found by bisection.
double gradient_ascent_p1(const DenseK& dk, double q, Eigen::VectorXd f) {
  const Eigen::VectorXd& w = dk.w;
  const double W = w.sum();
  auto proj = [&](Eigen::VectorXd x) {
    x.array() -= w.dot(x) / W;
    return x;
  };
  auto shifted = [&](const Eigen::VectorXd& f) {
    Eigen::VectorXd h = dk.K * f;
    double lo = -h.maxCoeff(), hi = -h.minCoeff();
    for (int k = 0; k < 80; ++k) {
      const double c = 0.5 * (lo + hi);
      const double s = (w.array() * (h.array() + c).sign() * (h.array() + c).abs().pow(q)).sum();
      (s > 0 ? hi : lo) = c;
    }
    return Eigen::VectorXd(h.array() + 0.5 * (lo + hi));
  };
  auto J = [&](const Eigen::VectorXd& x) { return std::log(lp(w, shifted(x), q + 1)) - std::log(lp(w, x, 2)); };
  f = proj(f);
  double Jf = J(f), step = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const Eigen::VectorXd h = shifted(f);
    const double A = (w.array() * h.array().abs().pow(q + 1)).sum();
    Eigen::VectorXd s = h.array().sign() * h.array().abs().pow(q);
    // W-gradient; the c-derivative drops out at the inner minimum
    Eigen::VectorXd grad = (dk.K.transpose() * w.cwiseProduct(s)).cwiseQuotient(w) / A;
    grad -= f / (w.array() * f.array().square()).sum();
    grad = proj(grad);
    bool moved = false;
    for (int bt = 0; bt < 60 && !moved; ++bt, step *= 0.5) {
      Eigen::VectorXd f1 = f + step * grad;
      const double J1 = J(f1);
      if (J1 > Jf) {
        moved = J1 - Jf > 1e-16;
        f = f1 / lp(w, f1, 2);
        Jf = J1;
        step *= 4;
      }
    }
    if (!moved) break;
  }
  return std::exp(Jf);
}

DualReport solve(const MeshPtr& m, double p, int N, int restarts = 3) {
  DualOptions o;
  o.restarts = restarts;
  return maximize_D(m, pack_from_p(p, N), o);
}

}  // namespace

TEST_CASE("Rayleigh ratio of a Neumann eigenfunction") {
  auto m = radial_annulus(5, 64);
  DenseK dk(*m);
  const auto pk = pack_from_p(1, 5);  // alpha = 2
  for (int k : {1, 3}) {
    Eigen::VectorXd phi = dk.phi.col(k);
    const double expect = lp(dk.w, phi, 2) / (dk.lam[k] * lp(dk.w, phi, pk.beta));
    CHECK(rayleigh_ratio(m, phi, phi, pk) == doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("Rayleigh ratio is homogeneous, odd and swap symmetric") {
  auto m = radial_annulus(6, 96);
  std::mt19937_64 rng(4);
  const auto pk = pack_from_p(1.7, 6);
  const auto kp = pack_from_p(pk.q, 6);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd f = random_zero_mean(*m, rng), g = random_zero_mean(*m, rng);
    const double r = rayleigh_ratio(m, f, g, pk);
    CHECK(rayleigh_ratio(m, 3.5 * f, 0.25 * g, pk) == doctest::Approx(r).epsilon(1e-12));
    CHECK(rayleigh_ratio(m, -f, g, pk) == doctest::Approx(-r).epsilon(1e-12));
    CHECK(rayleigh_ratio(m, g, f, kp) == doctest::Approx(r).epsilon(1e-10));
  }
  CHECK_THROWS_AS(rayleigh_ratio(m, Eigen::VectorXd::Zero(m->size()), Eigen::VectorXd::Ones(m->size()), pk),
                  ConfigError);
}

TEST_CASE("D dominates random pairs and the eigenfunction pair") {
  auto m = radial_annulus(6, 96);
  const auto pk = pack_from_p(2.5, 6);
  auto rep = solve(m, 2.5, 6);
  REQUIRE(rep.converged);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd f = random_zero_mean(*m, rng), g = random_zero_mean(*m, rng);
    CHECK(std::abs(rayleigh_ratio(m, f, g, pk)) <= rep.D * (1 + 1e-9));
  }
  auto K = neumann_solver(m);
  Eigen::VectorXd e = first_eigenfunction(*K);
  CHECK(rayleigh_ratio(*K, e, e, pk) <= rep.D * (1 + 1e-9));
  // the maximizing pair attains D
  CHECK(rayleigh_ratio(m, rep.f, rep.g, pk) == doctest::Approx(rep.D).epsilon(1e-12));
}

TEST_CASE("biharmonic pack agrees with gradient ascent on the reduced problem") {
  auto m = radial_annulus(5, 64);
  DenseK dk(*m);
  const auto pk = pack_from_p(1, 5);
  auto rep = solve(m, 1, 5);
  REQUIRE(rep.converged);
  const double oracle = gradient_ascent_p1(dk, pk.q, dk.phi.col(1));
  CHECK(std::abs(rep.D - oracle) <= 1e-3 * oracle);
  // the ascent can only undershoot a global maximum
  CHECK(oracle <= rep.D * (1 + 1e-9));
  for (const auto& r : rep.restarts) {
    CHECK(r.monotone);
    for (size_t k = 1; k < r.quotient.size(); ++k) CHECK(r.quotient[k] >= r.quotient[k - 1] * (1 - 1e-12));
  }
}

TEST_CASE("energy of manufactured fields") {
  // u = cos(pi (r-1)), v = cos(2 pi (r-1)) satisfy the Neumann condition on (1,2)
  auto m = radial_annulus(6, 1024);
  const auto pk = pack_from_p(2, 6);
  const double sig = sphere_measure(5), pi = std::acos(-1.0);
  Eigen::VectorXd u(m->size()), v(m->size());
  for (int k = 0; k < m->size(); ++k) {
    u[k] = std::cos(pi * (m->r_of(k) - 1));
    v[k] = std::cos(2 * pi * (m->r_of(k) - 1));
  }
  auto radial = [&](auto F) {
    return sig * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                     [&](double r) { return F(r) * std::pow(r, 5); }, 1.0, 2.0, 10, 1e-14);
  };
  const double duv = radial([&](double r) { return 2 * pi * pi * std::sin(pi * (r - 1)) * std::sin(2 * pi * (r - 1)); });
  const double u3 = radial([&](double r) { return std::pow(std::abs(std::cos(pi * (r - 1))), 3); });
  const double v3 = radial([&](double r) { return std::pow(std::abs(std::cos(2 * pi * (r - 1))), 3); });
  CHECK(dirichlet_form(*m, u, v) == doctest::Approx(duv).epsilon(1e-5));
  CHECK(energy(*m, u, v, pk) == doctest::Approx(duv - u3 / 3 - v3 / 3).epsilon(1e-5));
  Field c = Field::constant(m, 2.0);
  CHECK(energy(*m, c.values(), c.values(), pk) == doctest::Approx(-2 * m->volume() * 8.0 / 3).epsilon(1e-12));
}

TEST_CASE("recovered solutions satisfy the system and the energy identity") {
  for (double p : {2.0, 3.0, 1.0}) {
    const int N = p == 2.0 ? 6 : (p == 3.0 ? 4 : 5);
    auto m = radial_annulus(N, 256);
    auto rep = solve(m, p, N);
    REQUIRE(rep.converged);
    CAPTURE(p);
    CHECK(std::abs(rep.energy - rep.c_pred) <= 1e-6 * std::abs(rep.energy));
    CHECK(rep.residual_u <= 1e-5);
    CHECK(rep.residual_v <= 1e-5);
    CHECK(std::abs(rep.compat_u) <= 1e-8);
    CHECK(std::abs(rep.compat_v) <= 1e-8);
    CHECK(std::abs(rep.mean_f) <= 1e-12);
    CHECK(std::abs(rep.mean_g) <= 1e-12);
    CHECK(rep.el_residual <= 1e-8);
    CHECK(rep.el_residual_q <= 1e-8);
    CHECK(rep.constraint_value == doctest::Approx(1.0).epsilon(1e-10));
    // zero mean sources force sign changes
    CHECK(rep.u.maxCoeff() > 0);
    CHECK(rep.u.minCoeff() < 0);
  }
}

TEST_CASE("equal exponents give u = v") {
  auto m = radial_annulus(6, 128);
  auto rep = solve(m, 2, 6);
  CHECK((rep.u - rep.v).cwiseAbs().maxCoeff() <= 1e-8 * rep.u.cwiseAbs().maxCoeff());
}

TEST_CASE("radial least-energy solutions are monotone with u_r v_r > 0") {
  for (double p : {2.0, 3.0, 1.0, 1.5}) {
    const int N = p == 3.0 ? 4 : (p == 1.0 ? 5 : 6);
    auto m = radial_annulus(N, 256);
    auto rep = solve(m, p, N);
    int good = 0, total = 0;
    for (int i = 0; i + 1 < m->nr(); ++i, ++total)
      if ((rep.u[i + 1] - rep.u[i]) * (rep.v[i + 1] - rep.v[i]) > 0) ++good;
    CAPTURE(p);
    CHECK(good >= 0.99 * total);
  }
}

TEST_CASE("D_rad is stable under refinement") {
  for (double p : {2.0, 3.0}) {
    const int N = p == 2.0 ? 6 : 4;
    const double a = solve(radial_annulus(N, 128), p, N).D, b = solve(radial_annulus(N, 256), p, N).D;
    CHECK(std::abs(a - b) <= 2e-3 * b);
  }
}

TEST_CASE("axisymmetric D is at least the radial D") {
  MeshParams mp;
  mp.kind = MeshKind::AxisymAnnulus;
  mp.N = 6;
  mp.r0 = 1;
  mp.R = 2;
  mp.nr = 32;
  mp.ntheta = 24;
  mp.allow_coarse = true;
  auto axi = Mesh::build(mp);
  auto rad = radial_annulus(6, 32);
  const double Da = solve(axi, 2, 6).D, Dr = solve(rad, 2, 6).D;
  CHECK(Da >= Dr);
}

TEST_CASE("restarts are reproducible and independent of the job count") {
  auto m = radial_annulus(6, 96);
  DualOptions o;
  o.restarts = 4;
  o.seed = 7;
  const auto pk = pack_from_p(2.2, 6);
  auto a = maximize_D(m, pk, o);
  auto b = maximize_D(m, pk, o);
  o.jobs = 2;
  auto c = maximize_D(m, pk, o);
  CHECK(a.D == b.D);
  CHECK(a.D == c.D);
  REQUIRE(a.restarts.size() == c.restarts.size());
  for (size_t k = 0; k < a.restarts.size(); ++k) CHECK(a.restarts[k].D == c.restarts[k].D);
  CHECK(!a.near_best.empty());
}

TEST_CASE("maximize_D_radial rejects axisymmetric meshes") {
  MeshParams mp;
  mp.kind = MeshKind::AxisymBall;
  mp.N = 4;
  mp.R = 1;
  mp.nr = 16;
  mp.ntheta = 8;
  mp.allow_coarse = true;
  CHECK_THROWS_AS(maximize_D_radial(Mesh::build(mp), pack_from_p(3, 4)), ConfigError);
}
