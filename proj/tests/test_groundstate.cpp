#include <doctest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <limits>
#include <map>

#include "critdual/errors.hpp"
#include "critdual/groundstate.hpp"
#include "critdual/mesh.hpp"

using namespace critdual;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double quad_inf(const std::function<double(double)>& f) {
  boost::math::quadrature::exp_sinh<double> es;
  return es.integrate(
      [&](double x) {
        const double v = std::isfinite(x) ? f(x) : 0.0;
        return std::isfinite(v) ? v : 0.0;
      },
      0.0, kInf);
}

const BubbleProfile& bubble(double p, int N) {
  static std::map<std::pair<double, int>, BubbleProfile> cache;
  auto key = std::make_pair(p, N);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, shoot(pack_from_p(p, N))).first;
  return it->second;
}

// Biharmonic bubble for (1, 9, 5) with V(0) = 1: V = (1 + mu r^2)^{-1/2},
// U = -Delta V, mu = 105^{-1/2}.
const double kMu = 1 / std::sqrt(105.0);
double V19(double r) { return 1 / std::sqrt(1 + kMu * r * r); }
double U19(double r) { return kMu * std::pow(1 + kMu * r * r, -2.5) * (5 + 2 * kMu * r * r); }

}  // namespace

TEST_CASE("explicit bubble for p = q = 3, N = 4") {
  const auto& P = bubble(3, 4);
  CHECK(P.V[0] == 1.0);
  const double s8 = std::sqrt(8.0);
  // U*(r) = sqrt(8) (1+r^2)^{-1} = sqrt(8) U(sqrt(8) r) under V(0) = 1
  double worst = 0;
  for (int k = 0; k <= 4000; ++k) {
    const double r = 20.0 * k / 4000;
    const double ustar = s8 / (1 + r * r);
    worst = std::max(worst, std::abs(s8 * P.eval(s8 * r).U / ustar - 1));
  }
  CHECK(worst <= 1e-6);
  CHECK(s8 * P.eval(0).U == doctest::Approx(2.828427).epsilon(1e-6));
  CHECK(s8 * P.eval(s8).U == doctest::Approx(1.414214).epsilon(1e-6));

  const double explicit_int =
      sphere_measure(3) * quad_inf([](double r) { return std::pow(r, 3) * std::pow(1 + r * r / 8, -4); });
  const double S_explicit = std::pow(explicit_int, 0.5);
  CHECK(std::abs(P.S / S_explicit - 1) < 1e-3);
  CHECK(std::abs(P.S / sobolev_constant_closed_form(4) - 1) < 1e-6);
  // plateau of r^{N-2} U* is sqrt(8)
  CHECK(s8 * P.a / 8 == doctest::Approx(s8).epsilon(1e-6));
  CHECK(P.a == doctest::Approx(P.b).epsilon(1e-8));
}

TEST_CASE("symmetric point in N = 6") {
  const auto& P = bubble(2, 6);
  double worst = 0;
  for (size_t i = 0; i < P.r.size(); ++i) worst = std::max(worst, std::abs(P.U[i] - P.V[i]) / P.V[i]);
  CHECK(worst <= 1e-8);
  CHECK(to_string(P.regime) == "q>N/(N-2)");
  CHECK(std::abs(P.S / sobolev_constant_closed_form(6) - 1) < 1e-6);
}

TEST_CASE("biharmonic pack agrees with the closed-form biharmonic bubble") {
  const auto& P = bubble(1, 5);
  CHECK(P.pack.q == doctest::Approx(9));
  CHECK(P.shoot_d == doctest::Approx(5 * kMu).epsilon(1e-9));
  double worst = 0;
  for (size_t i = 0; i < P.r.size(); ++i) {
    worst = std::max(worst, std::abs(P.U[i] / U19(P.r[i]) - 1));
    worst = std::max(worst, std::abs(P.V[i] / V19(P.r[i]) - 1));
  }
  CHECK(worst <= 1e-5);
  const double I = sphere_measure(4) * quad_inf([](double r) { return std::pow(r, 4) * std::pow(V19(r), 10); });
  CHECK(std::abs(P.S / std::pow(I, 2.0 / 5) - 1) < 5e-3);
  CHECK(to_string(P.regime) == "q<N/(N-2)");
  CHECK(P.fast_is_U);
  // V ~ b r^{-1} with b = 1/sqrt(mu)
  CHECK(P.b == doctest::Approx(1 / std::sqrt(kMu)).epsilon(1e-6));
}

TEST_CASE("S is symmetric in (p, q) and the two critical integrals agree") {
  for (double p : {1.0, 4.0}) {
    const auto& A = bubble(p, 5);
    const auto& B = bubble(hyperbola_partner(p, 5), 5);
    CHECK(std::abs(A.S / B.S - 1) < 5e-3);
    CHECK(std::abs(A.int_U / A.int_V - 1) < 1e-6);
    CHECK(std::abs(B.int_U / B.int_V - 1) < 1e-6);
  }
}

TEST_CASE("profile invariants and decay constants") {
  for (double p : {3.0, 31.0 / 9, 4.0, 1.0}) {
    const auto& P = bubble(p, p == 3.0 ? 4 : 5);
    for (size_t i = 1; i < P.r.size(); ++i) {
      REQUIRE(P.U[i] > 0);
      REQUIRE(P.V[i] < P.V[i - 1]);
    }
    CHECK(P.b > 0);
    CHECK(std::isfinite(P.b));
    CHECK(P.bracket_hi - P.bracket_lo <= 1e-14 * P.shoot_d);
    // r X'/X stays bounded and approaches the decay exponent
    const auto s = P.eval(P.r_max);
    CHECK(std::abs(P.r_max * s.dU / s.U) < P.pack.N);
    CHECK(std::abs(P.r_max * s.dV / s.V) < P.pack.N);
  }
  // slow and log regimes: leading constants forced by -Delta U = V^q at infinity
  {
    const auto& P = bubble(4, 5);  // q = 3/2 < 5/3
    CHECK(to_string(P.regime) == "q<N/(N-2)");
    const double Q = P.pack.q, k = Q * 3 - 2;
    CHECK(P.b == doctest::Approx(std::pow(P.a, Q) / (k * (3 - k))).epsilon(1e-4));
  }
  {
    const auto& P = bubble(31.0 / 9, 5);  // q = 5/3
    CHECK(to_string(P.regime) == "q=N/(N-2)");
    CHECK(P.b == doctest::Approx(std::pow(P.a, 5.0 / 3) / 3).epsilon(1e-4));
  }
}

TEST_CASE("scaled quantities") {
  const auto& P = bubble(3, 4);
  auto one = scaled_quantities(P, 1.0);
  CHECK(one.U1 == doctest::Approx(P.ball_integral([](const ProfileSample& s) { return s.U; }, 1.0)).epsilon(1e-14));
  CHECK(one.Vq1 == doctest::Approx(P.ball_integral([](const ProfileSample& s) { return s.V * s.V * s.V; }, 1.0)).epsilon(1e-14));

  auto a = scaled_quantities(P, 0.01), b = scaled_quantities(P, 0.005);
  CHECK(std::abs(b.V1 / a.V1 / std::pow(2.0, -4.0 / 4) - 1) < 0.02);

  // critical norm int V_eps^{q+1} over B_1 is nearly eps-invariant
  const double q = P.pack.q;
  std::vector<double> crit;
  for (double e : {0.02, 0.01, 0.005}) {
    crit.push_back(P.ball_integral([q](const ProfileSample& s) { return std::pow(s.V, q + 1); }, 1 / e));
  }
  CHECK(std::abs(crit[0] / crit[2] - 1) < 0.01);
  CHECK(std::abs(crit[1] / crit[2] - 1) < 0.01);

  // C1 against the explicit profile (1 + s^2/8)^{-1}
  const double c1 = 0.5 * sphere_measure(2) * quad_inf([](double s) { return std::pow(s, 4) * std::pow(1 + s * s / 8, -4); });
  CHECK(std::abs(one.C1 / c1 - 1) < 5e-3);
  CHECK(one.C2 == doctest::Approx(one.C1).epsilon(1e-6));
}

TEST_CASE("divergent moments are reported") {
  const auto& P = bubble(1.5, 4);  // q = 9: U decays like r^{-2}, U^{2.5} s^4 is not integrable
  auto s = scaled_quantities(P, 1.0);
  CHECK_FALSE(s.C1_finite);
  CHECK(std::isnan(s.C1));
  CHECK(s.note.find("diverges") != std::string::npos);
  CHECK(s.C2_finite);
}

TEST_CASE("shoot preconditions") {
  CHECK_THROWS_AS(shoot(pack_from_p(3, 4), ShootOptions{1e3, 1e-3}), ConfigError);
}
