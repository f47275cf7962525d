#include "critdual/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "critdual/errors.hpp"

namespace critdual {

namespace {

void check_dimension(int N) {
  if (N < 4) throw ConfigError("dimension N must be at least 4, got " + std::to_string(N));
}

}  // namespace

double hyperbola_partner(double p, int N) {
  check_dimension(N);
  if (!(p > 2.0 / (N - 2))) {
    std::ostringstream os;
    os << "p = " << p << " has no positive partner for N = " << N << " (need p > " << 2.0 / (N - 2) << ")";
    throw ConfigError(os.str());
  }
  const double c = double(N - 2) / N - 1.0 / (p + 1);
  return 1.0 / c - 1.0;
}

double hyperbola_residual(double p, double q, int N) {
  return 1.0 / (p + 1) + 1.0 / (q + 1) - double(N - 2) / N;
}

ExponentPack derived_constants(double p, double q, int N) {
  check_dimension(N);
  if (!(p > 0) || !(q > 0)) throw ConfigError("exponents must be positive");
  const double res = hyperbola_residual(p, q, N);
  if (std::abs(res) > kHyperbolaTol * (double(N - 2) / N)) {
    std::ostringstream os;
    os.precision(3);
    os << "(p, q, N) = (" << p << ", " << q << ", " << N << ") is off the critical hyperbola, residual " << res;
    throw ConfigError(os.str());
  }
  ExponentPack k;
  k.p = p;
  k.q = hyperbola_partner(p, N);
  k.N = N;
  k.alpha = (k.p + 1) / k.p;
  k.beta = (k.q + 1) / k.q;
  const double den = 2 * k.p * k.q + k.p + k.q;
  k.gamma1 = k.p * (k.q + 1) / den;
  k.gamma2 = k.q * (k.p + 1) / den;
  k.gamma = (k.p + 1) * (k.q + 1) / den;
  k.sp = N / (k.p + 1);
  k.sq = N / (k.q + 1);
  return k;
}

ExponentPack pack_from_p(double p, int N) { return derived_constants(p, hyperbola_partner(p, N), N); }

std::string Admissibility::label() const {
  switch (coverage) {
    case Coverage::MainTheorem: return "covered-by-main-thm";
    case Coverage::BiharmonicWindow: return "biharmonic-window";
    default: return "uncovered";
  }
}

Admissibility admissibility(const ExponentPack& k) {
  Admissibility a;
  const double lo = std::min(k.p, k.q);
  const int N = k.N;
  if (N >= 6) {
    a.threshold = (N + 2.0) / (2.0 * (N - 2));
    if (lo > a.threshold) {
      a.coverage = Coverage::MainTheorem;
      a.condition = "(i)";
      return a;
    }
  } else if (N == 5) {
    a.threshold = 17.0 / 13.0;
    if (lo > a.threshold) {
      a.coverage = Coverage::MainTheorem;
      a.condition = "(ii)";
      return a;
    }
  } else {
    a.threshold = 7.0 / 3.0;
    if (lo > a.threshold) {
      a.coverage = Coverage::MainTheorem;
      a.condition = "(iii)";
      return a;
    }
  }
  if (N >= 5 && std::abs(lo - 1.0) <= kHyperbolaTol) {
    a.coverage = Coverage::BiharmonicWindow;
    a.condition = "biharmonic";
    a.threshold = 1.0;
    return a;
  }
  a.condition.clear();
  return a;
}

}  // namespace critdual
