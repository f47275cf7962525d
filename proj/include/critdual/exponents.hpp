#pragma once

#include <string>

namespace critdual {

// A point (p, q) on the critical hyperbola 1/(p+1) + 1/(q+1) = (N-2)/N with the
// constants of the dual formulation.
struct ExponentPack {
  double p = 0, q = 0;
  int N = 0;
  double alpha = 0, beta = 0;  // (p+1)/p, (q+1)/q
  double gamma1 = 0, gamma2 = 0, gamma = 0;
  double sp = 0, sq = 0;  // N/(p+1), N/(q+1)

  // (p+1)(q+1)/(pq-1), equal to N/2 on the hyperbola.
  double scaling_exponent() const { return (p + 1) * (q + 1) / (p * q - 1); }
};

// Relative tolerance for accepting a pair as lying on the hyperbola.
inline constexpr double kHyperbolaTol = 1e-10;

double hyperbola_partner(double p, int N);

// Builds the pack; q is recomputed from p after the membership check.
ExponentPack derived_constants(double p, double q, int N);
ExponentPack pack_from_p(double p, int N);

// 1/(p+1) + 1/(q+1) - (N-2)/N.
double hyperbola_residual(double p, double q, int N);

enum class Coverage { MainTheorem, BiharmonicWindow, Uncovered };

struct Admissibility {
  Coverage coverage = Coverage::Uncovered;
  std::string condition;  // "(i)", "(ii)", "(iii)", "biharmonic" or ""
  double threshold = 0;   // lower bound on min(p,q) used by the condition
  std::string label() const;
};

Admissibility admissibility(const ExponentPack& pack);

}  // namespace critdual
