#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <random>

#include "critdual/asymptotics.hpp"
#include "critdual/dualsolve.hpp"
#include "critdual/errors.hpp"

using namespace critdual;

namespace {

const BubbleProfile& profile(double p, int N) {
  static std::map<std::pair<double, int>, BubbleProfile> cache;
  auto key = std::make_pair(p, N);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, shoot(pack_from_p(p, N))).first;
  return it->second;
}

MeshPtr graded_ball(int N, int nr, int nt, double grading) {
  MeshParams mp;
  mp.kind = MeshKind::AxisymBall;
  mp.N = N;
  mp.R = 1;
  mp.nr = nr;
  mp.ntheta = nt;
  mp.r_grading = grading;
  mp.theta_grading = grading;
  mp.allow_coarse = true;
  return Mesh::build(mp);
}

const std::vector<double> kNormGrid = geometric_grid(1e-4, 1e-8, 9);

}  // namespace

TEST_CASE("geometric grid") {
  auto g = geometric_grid(0.2, 0.002, 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 0.2);
  CHECK(g.back() == 0.002);
  for (size_t k = 1; k < g.size(); ++k) CHECK(g[k] / g[k - 1] == doctest::Approx(g[1] / g[0]));
  CHECK_THROWS_AS(geometric_grid(0.1, 0.2, 5), ConfigError);
}

TEST_CASE("linear fit recovers coefficients and covers them with its interval") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0, 1e-3);
  int covered = 0;
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd A(12, 2);
    Eigen::VectorXd y(12);
    for (int i = 0; i < 12; ++i) {
      const double x = 0.1 * i;
      A(i, 0) = x;
      A(i, 1) = x * x;
      y[i] = 0.7 * x - 0.3 * x * x + nd(rng);
    }
    auto f = fit_linear(A, y);
    if (std::abs(f.coef[0] - 0.7) <= f.half_width[0]) ++covered;
  }
  // 95% nominal coverage
  CHECK(covered >= 85);
  Eigen::MatrixXd A(3, 2);
  A << 1, 0, 1, 1, 1, 2;
  auto exact = fit_linear(A, Eigen::Vector3d(1, 3, 5));
  CHECK(exact.coef[0] == doctest::Approx(1));
  CHECK(exact.coef[1] == doctest::Approx(2));
  CHECK(exact.rms <= 1e-12);
}

TEST_CASE("rate table values") {
  // (2,2,6): ||V_eps||_1 ~ eps^2; (3,3,4): ||U_eps||_1 ~ eps
  CHECK(predicted_norm_rate(pack_from_p(2, 6), SweepQuantity::V1).slope == doctest::Approx(2));
  CHECK(predicted_norm_rate(pack_from_p(3, 4), SweepQuantity::U1).slope == doctest::Approx(1));
  // q = N/(N-2) at N = 5 carries the log correction
  auto lg = predicted_norm_rate(pack_from_p(31.0 / 9, 5), SweepQuantity::U1);
  CHECK(lg.log_regime);
  CHECK(lg.log_power == 1);
  CHECK(lg.slope == doctest::Approx(15.0 / 8));
  // slow branch q N/(p+1)
  CHECK(predicted_norm_rate(pack_from_p(4, 5), SweepQuantity::U1).slope == doctest::Approx(1.5));
  // exchanging p and q exchanges the roles of U and V
  const auto a = pack_from_p(4, 5), b = pack_from_p(a.q, 5);
  CHECK(predicted_norm_rate(a, SweepQuantity::U1).slope == doctest::Approx(predicted_norm_rate(b, SweepQuantity::V1).slope));
  CHECK(predicted_normal_rate(pack_from_p(2, 6)).slope == doctest::Approx(1));
  CHECK(predicted_normal_rate(pack_from_p(3, 4)).log_power == doctest::Approx(2.0 / 3));
}

TEST_CASE("norm rate sweeps match the table") {
  for (auto pn : std::vector<std::pair<double, int>>{{2, 6}, {3, 4}, {1, 5}, {31.0 / 9, 5}, {4, 5}}) {
    const auto& P = profile(pn.first, pn.second);
    for (auto q : {SweepQuantity::U1, SweepQuantity::V1, SweepQuantity::Up1, SweepQuantity::Vq1}) {
      auto r = norm_rate_sweep(P, q, kNormGrid);
      CAPTURE(pn.first);
      CAPTURE(r.quantity);
      CHECK(r.pass);
      CHECK_FALSE(r.flagged);
      const double tol = r.predicted.log_regime ? 0.05 : 0.02;
      CHECK(std::abs(r.slope - r.predicted.slope) <= tol * r.predicted.slope);
    }
  }
}

TEST_CASE("eps = 1 reproduces the unscaled norms") {
  const auto& P = profile(2, 6);
  std::vector<double> g = geometric_grid(1.0, 1e-2, 6);
  auto r = norm_rate_sweep(P, SweepQuantity::U1, g);
  CHECK(r.values[0] == doctest::Approx(P.ball_integral([](const ProfileSample& s) { return s.U; }, 1.0)).epsilon(1e-14));
}

TEST_CASE("sweep grids are validated") {
  const auto& P = profile(2, 6);
  CHECK_THROWS_AS(norm_rate_sweep(P, SweepQuantity::U1, geometric_grid(1e-2, 1e-3, 6)), ConfigError);
  CHECK_THROWS_AS(norm_rate_sweep(P, SweepQuantity::U1, geometric_grid(1e-2, 1e-5, 4)), ConfigError);
  CHECK_THROWS_AS(norm_rate_sweep(P, SweepQuantity::U1, {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}), ConfigError);
  CHECK_THROWS_AS(sweep_quantity_from_string("W"), ConfigError);
}

TEST_CASE("boundary term against a direct quadrature of the explicit bubble") {
  // p = q = 3, N = 4: U = V = (1 + r^2/8)^{-1}
  const auto& P = profile(3, 4);
  const int N = 4;
  const double sig = sphere_measure(N - 2), pi = std::acos(-1.0);
  std::vector<double> g = geometric_grid(0.1, 0.001, 5);
  auto bt = boundary_term_sweep(P, g);
  for (size_t k = 0; k < g.size(); ++k) {
    const double e = g[k], sp = 1.0;  // N/(p+1)
    auto U = [&](double rho) { return std::pow(e, -sp) / (1 + rho * rho / (8 * e * e)); };
    auto dU = [&](double rho) { return -std::pow(e, -sp) * (rho / (4 * e * e)) / std::pow(1 + rho * rho / (8 * e * e), 2); };
    // polar angle theta on the unit sphere, pole at theta = 0
    auto F = [&](double th) {
      const double rho = 2 * std::sin(th / 2);
      return U(rho) * dU(rho) * (rho / 2) * sig * std::pow(std::sin(th), N - 2);
    };
    double direct = 0;
    // split at a few multiples of the scale
    std::vector<double> cuts = {0, e, 4 * e, 16 * e, 64 * e, pi};
    for (size_t j = 0; j + 1 < cuts.size(); ++j) {
      if (cuts[j] >= pi) break;
      direct += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(F, cuts[j], std::min(pi, cuts[j + 1]), 12, 1e-12);
    }
    CHECK(bt.term.values[k] == doctest::Approx(direct).epsilon(1e-6));
    CHECK(bt.term.values[k] < 0);
  }
  CHECK(bt.eps0 == g.front());
}

TEST_CASE("normal derivative norms follow the trace rate") {
  for (auto pn : std::vector<std::pair<double, int>>{{2, 6}, {3, 4}, {31.0 / 9, 5}}) {
    auto bt = boundary_term_sweep(profile(pn.first, pn.second), kNormGrid);
    CAPTURE(pn.first);
    CHECK(bt.normal.pass);
    CHECK(bt.term.pass);
    CHECK(bt.eps0 == kNormGrid.front());
  }
}

TEST_CASE("test-function ratio is homogeneous and dominated by D") {
  const auto& P = profile(2, 6);
  auto m = graded_ball(6, 48, 32, 3);
  const double eps = 0.08;
  auto tp = boundary_test_pair(*m, P, eps);
  const double r = test_function_ratio(m, P, eps);
  CHECK(rayleigh_ratio(m, 2.5 * tp.f, 0.3 * tp.g, P.pack) == doctest::Approx(r).epsilon(1e-12));
  CHECK(std::abs(integrate(*m, tp.f)) <= 1e-12 * norm_Ls(*m, tp.f, 1));
  DualOptions o;
  o.restarts = 0;
  o.builtin_inits = false;
  o.inits.push_back({tp.f, tp.g});
  auto rep = maximize_D(m, P.pack, o);
  CHECK(rep.D >= r - 1e-10);
  CHECK_THROWS_AS(test_function_ratio(m, P, 0.5 * min_resolved_eps(*m, P)), ResolutionError);
}

TEST_CASE("test-function ratio exceeds the threshold with a positive linear coefficient") {
  const auto& P = profile(2, 6);
  auto m = graded_ball(6, 200, 160, 8);
  auto rs = test_function_sweep(m, P, geometric_grid(0.03, 0.003, 6));
  CHECK(rs.all_above);
  CHECK(rs.c1 - rs.c1_ci > 0);
  CHECK(rs.pass);
}

TEST_CASE("W^{1,s} norm of a linear field") {
  auto m = graded_ball(5, 96, 64, 0);
  Eigen::VectorXd u(m->size());
  for (int k = 0; k < m->size(); ++k) u[k] = m->r_of(k) * std::cos(m->theta_of(k));
  // |grad u| = 1
  const double s = 1.5;
  const double expect = norm_Ls(*m, u, s) + std::pow(m->volume(), 1 / s);
  CHECK(w1_norm(*m, u, s) == doctest::Approx(expect).epsilon(2e-2));
}

TEST_CASE("Cherrier probe families") {
  const auto& P = profile(2, 6);
  const double S = P.S;
  auto m = graded_ball(6, 200, 160, 8);
  auto b = cherrier_probe(m, P, CherrierFamily::Boundary, geometric_grid(0.02, 0.003, 4));
  CHECK(b.pass);
  CHECK(b.target == doctest::Approx(std::pow(2.0, 2.0 / 6) / S));
  // sharper members approach the constant from above
  for (size_t k = 1; k < b.lead.size(); ++k) CHECK(b.lead[k] < b.lead[k - 1]);
  CHECK(b.eta_star == doctest::Approx(P.pack.p + 1));
  MeshParams mr;
  mr.kind = MeshKind::RadialBall;
  mr.N = 6;
  mr.R = 1;
  mr.nr = 2048;
  auto rb = Mesh::build(mr);
  auto in = cherrier_probe(rb, P, CherrierFamily::Interior, geometric_grid(0.05, 0.01, 4));
  CHECK(in.pass);
  CHECK(in.target == doctest::Approx(1 / S));
  auto c = cherrier_probe(rb, P, CherrierFamily::Constant, {});
  CHECK(c.skipped);
  CHECK(c.label == "gradient term dominant");
  auto rnd = cherrier_probe(rb, P, CherrierFamily::Random, {1, 2, 3});
  CHECK(rnd.lead.size() == 3);
  CHECK(rnd.leading > 0);
  CHECK_THROWS_AS(cherrier_family_from_string("edge"), ConfigError);
}
