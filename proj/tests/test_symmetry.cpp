#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "critdual/errors.hpp"
#include "critdual/groundstate.hpp"
#include "critdual/symmetry.hpp"

using namespace critdual;

namespace {

MeshPtr mesh(MeshKind kind, int N, int nr, int nt = 1) {
  MeshParams p;
  p.kind = kind;
  p.N = N;
  p.r0 = 1;
  p.R = 2;
  p.nr = nr;
  p.ntheta = nt;
  p.allow_coarse = true;
  return Mesh::build(p);
}

RadialProfile random_profile(int N, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> np(3, 40);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.2, 1.0);
  const int n = np(rng);
  std::vector<double> vol(n), val(n);
  for (int k = 0; k < n; ++k) {
    vol[k] = ud(rng);
    val[k] = nd(rng);
  }
  // rescale the volumes to the annulus (1,2) and remove the mean
  const double total = ball_volume(N) * (std::pow(2.0, N) - 1);
  double s = 0, mean = 0;
  for (double v : vol) s += v;
  for (int k = 0; k < n; ++k) {
    vol[k] *= total / s;
    mean += vol[k] * val[k];
  }
  for (double& v : val) v -= mean / total;
  auto P = RadialProfile::from_volumes(N, 1.0, vol, val);
  P.R = 2;
  P.edges.back() = 2;
  return P;
}

double scale(const RadialProfile& f, const RadialProfile& g) {
  return std::abs(radial_pairing(star_transform(f), star_transform(g))) + f.norm(2) * g.norm(2) * 1e-3;
}

}  // namespace

TEST_CASE("star transform on a two-step profile") {
  // +1 inside, -1 outside, equal volumes: I >= 0, already decreasing
  const int N = 4;
  const double half = 0.5 * ball_volume(N) * 15;
  auto h = RadialProfile::from_volumes(N, 1, {half, half}, {1, -1});
  auto s = star_transform(h);
  CHECK(max_difference(s, h) <= 1e-12);
  // the reversed profile has I <= 0 and flips as a whole
  auto r = RadialProfile::from_volumes(N, 1, {half, half}, {-1, 1});
  auto fr = flip_F(r);
  CHECK(max_difference(fr, h) <= 1e-12);
  CHECK(max_difference(star_transform(r), h) <= 1e-12);
}

TEST_CASE("flip takes the absolute value of the cumulative integral") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    auto h = random_profile(5, rng);
    auto F = flip_F(h);
    // compare |I_h| and I_F at a set of radii
    for (int k = 0; k <= 50; ++k) {
      const double r = 1 + k / 50.0;
      auto I_at = [&](const RadialProfile& P) {
        const auto I = P.cumulative_I();
        size_t j = std::upper_bound(P.edges.begin(), P.edges.end(), r) - P.edges.begin();
        if (j == 0) return 0.0;
        if (j >= P.edges.size()) return I.back();
        return I[j - 1] + P.values[j - 1] * (P.volume_coordinate(r) - P.volume_coordinate(P.edges[j - 1]));
      };
      CHECK(I_at(F) == doctest::Approx(std::abs(I_at(h))).epsilon(1e-9).scale(h.norm(1)));
    }
  }
}

TEST_CASE("star transform preserves norms, raises the pairing and is idempotent") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 200; ++t) {
    const int N = 4 + t % 4;
    auto f = random_profile(N, rng), g = random_profile(N, rng);
    auto fs = star_transform(f), gs = star_transform(g);
    for (double s : {1.0, 1.5, 2.0, 4.0}) CHECK(fs.norm(s) == doctest::Approx(f.norm(s)).epsilon(1e-8));
    CHECK(std::abs(fs.integral()) <= 1e-10 * f.norm(1));
    CHECK(radial_pairing(f, g) <= radial_pairing(fs, gs) + 1e-8 * scale(f, g));
    CHECK(max_difference(star_transform(fs), fs) <= 1e-10 * f.norm(1));
    // decreasing values
    for (size_t k = 1; k < fs.values.size(); ++k) CHECK(fs.values[k] <= fs.values[k - 1]);
  }
}

TEST_CASE("radial pairing matches the continuum formula and the discrete solver") {
  const int N = 6;
  const double sig = sphere_measure(N - 1), om = ball_volume(N);
  const double half = 0.5 * om * (64 - 1);
  auto h = RadialProfile::from_volumes(N, 1, {half, half}, {1, -1});
  const double rm = h.edges[1];
  // I(r) in closed form; int I^2 / (sigma r^{N-1}) dr
  auto I = [&](double r) { return r < rm ? om * (std::pow(r, N) - 1) : om * (std::pow(2.0, N) - std::pow(r, N)); };
  auto gk = [&](double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double r) { return I(r) * I(r) / (sig * std::pow(r, N - 1)); }, a, b, 10, 1e-14);
  };
  const double exact = gk(1, rm) + gk(rm, 2);

  CHECK(radial_pairing(h, h) == doctest::Approx(exact).epsilon(1e-12));
  auto m = mesh(MeshKind::RadialAnnulus, N, 2048);
  Eigen::VectorXd x = h.project(*m);
  const double disc = inner(*m, x, neumann_solver(m)->solve_projected(x));
  CHECK(disc == doctest::Approx(exact).epsilon(1e-4));
}

TEST_CASE("profile projection and mesh round trip") {
  auto m = mesh(MeshKind::RadialAnnulus, 5, 128);
  Eigen::VectorXd x(m->size());
  for (int k = 0; k < m->size(); ++k) x[k] = std::sin(5.0 * m->r_of(k));
  auto P = RadialProfile::from_mesh(*m, x);
  CHECK((P.project(*m) - x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(P.integral() == doctest::Approx(integrate(*m, x)).epsilon(1e-12));
  CHECK(P.norm(3) == doctest::Approx(norm_Ls(*m, x, 3)).epsilon(1e-12));
  const auto I = cumulative_I(*m, x);
  CHECK(I.back() == doctest::Approx(integrate(*m, x)).epsilon(1e-12));
  CHECK_THROWS_AS(RadialProfile::from_mesh(*mesh(MeshKind::AxisymAnnulus, 5, 8, 8), Eigen::VectorXd::Zero(64)),
                  ConfigError);
}

TEST_CASE("polarization examples") {
  auto m = mesh(MeshKind::AxisymAnnulus, 5, 16, 16);
  Eigen::VectorXd c(m->size()), s2(m->size());
  for (int k = 0; k < m->size(); ++k) {
    c[k] = std::cos(m->theta_of(k));
    s2[k] = std::sin(2 * m->theta_of(k));
  }
  CHECK((polarize(*m, c, +1) - c).cwiseAbs().maxCoeff() == 0);
  CHECK((polarize(*m, -c, +1) - c).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((polarize(*m, c, -1) + c).cwiseAbs().maxCoeff() <= 1e-14);
  // sin 2theta is even about the equator, so polarization leaves it alone
  CHECK((polarize(*m, s2, +1) - s2).cwiseAbs().maxCoeff() <= 1e-14);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd w(m->size());
    for (int k = 0; k < m->size(); ++k) w[k] = nd(rng);
    Eigen::VectorXd P = polarize(*m, w, +1);
    CHECK((polarize(*m, P, +1) - P).cwiseAbs().maxCoeff() == 0);
    for (double s : {1.0, 2.0, 3.0}) CHECK(norm_Ls(*m, P, s) == doctest::Approx(norm_Ls(*m, w, s)).epsilon(1e-12));
  }
  auto graded = [] {
    MeshParams p;
    p.kind = MeshKind::AxisymBall;
    p.N = 4;
    p.R = 1;
    p.nr = 8;
    p.ntheta = 8;
    p.theta_grading = 2;
    p.allow_coarse = true;
    return Mesh::build(p);
  }();
  CHECK_THROWS_AS(polarize(*graded, Eigen::VectorXd::Zero(graded->size()), +1), ConfigError);
}

TEST_CASE("fs_check classifies simple fields") {
  auto m = mesh(MeshKind::AxisymAnnulus, 6, 16, 16);
  Eigen::VectorXd c(m->size()), rad(m->size()), s2(m->size());
  for (int k = 0; k < m->size(); ++k) {
    const double r = m->r_of(k), t = m->theta_of(k);
    c[k] = r * std::cos(t);
    rad[k] = r * r;
    s2[k] = std::sin(2 * t);
  }
  auto a = fs_check(*m, c, c);
  CHECK(a.pass);
  CHECK(a.orientation == 1);
  CHECK(a.radial_spread > 1);
  auto b = fs_check(*m, -c, -c);
  CHECK(b.pass);
  CHECK(b.orientation == -1);
  // opposite orientations for u and v
  CHECK_FALSE(fs_check(*m, c, -c).pass);
  CHECK_FALSE(fs_check(*m, s2, s2).pass);
  auto r = fs_check(*m, rad, rad);
  CHECK(r.pass);
  CHECK(r.radial_spread == 0);
}

TEST_CASE("symmetry gap on a coarse annulus") {
  const auto pk = pack_from_p(2, 6);
  GapOptions o;
  o.nr = 24;
  o.ntheta = 16;
  o.dual.restarts = 2;
  o.estimate_noise = false;
  o.allow_coarse = true;
  auto g = symmetry_gap(pk, o);
  CHECK(g.gap > 0);
  CHECK(g.D >= g.D_rad);
  auto fs = fs_check(*g.axi.mesh, g.axi.u, g.axi.v);
  CHECK(fs.pass);
  CHECK(fs.radial_spread > 0.1);
  o.both_radial = true;
  auto z = symmetry_gap(pk, o);
  CHECK(z.gap == 0);
}
