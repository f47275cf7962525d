#pragma once

#include <functional>
#include <string>
#include <vector>

#include "critdual/exponents.hpp"

namespace critdual {

// Decay classes of the slower component, indexed by the smaller exponent
// q_s = min(p, q) compared with N/(N-2).
enum class DecayRegime { Fast, Log, Slow };
std::string to_string(DecayRegime r);

// X(r) ~ c1 r^{-e1} (log r)^{L} + c2 r^{-e2} + c3 r^{-e3} beyond the sampled range.
struct TailModel {
  double e1 = 0, e2 = 0, e3 = 0;
  int log_power = 0;
  double c1 = 0, c2 = 0, c3 = 0;
  double drift = 0;  // relative change of c1 between the two fit windows
  double value(double r) const;
  double derivative(double r) const;
};

struct ProfileSample {
  double U, dU, V, dV;
};

struct ShootOptions {
  double r_max = 1e3;
  double tol = 1e-14;      // bisection bracket width relative to d
  double ode_rtol = 1e-14;
  double trust = 1e-9;     // relative split of the bracket trajectories
  double grid_step = 0.0025;  // r_k = exp(k h) - 1
};

// Positive radial ground state with V(0) = 1.
struct BubbleProfile {
  ExponentPack pack;
  std::vector<double> r, U, V, dU, dV;
  double shoot_d = 0;
  double bracket_lo = 0, bracket_hi = 0;
  double r_max = 0;    // end of the trusted sampled range
  double r_trust = 0;  // radius where the bracket trajectories separate
  // Filled by profile_constants.
  double a = 0, b = 0;
  DecayRegime regime = DecayRegime::Fast;
  double S = 0;
  double int_U = 0, int_V = 0;  // int U^{p+1}, int V^{q+1} over R^N
  // The component decaying like r^{2-N} is V when p >= q and U otherwise.
  bool fast_is_U = false;
  TailModel tail_U, tail_V;

  ProfileSample eval(double r) const;
  // int_lo^hi f(r, sample) dr over the profile; hi may be +infinity.
  double integrate(const std::function<double(double, const ProfileSample&)>& f, double lo, double hi) const;
  // int over B_rho(0) in R^N of F(U, V): sigma_{N-1} int_0^rho F r^{N-1} dr.
  double ball_integral(const std::function<double(const ProfileSample&)>& F, double rho) const;
};

BubbleProfile shoot(const ExponentPack& pack, const ShootOptions& opt = {});
std::string describe_tail(const TailModel& t);

struct ProfileConstants {
  double S, a, b;
  DecayRegime regime;
};
// Fits the tails, computes S and stores everything in the profile.
ProfileConstants profile_constants(BubbleProfile& profile);

// Regime of a pack (depends only on the exponents).
DecayRegime decay_regime(const ExponentPack& pack);

// S_{p,q} at p = q = (N+2)/(N-2): pi N (N-2) (Gamma(N/2)/Gamma(N))^{2/N}.
double sobolev_constant_closed_form(int N);

// Norms of U_eps = eps^{-N/(p+1)} U(x/eps), V_eps = eps^{-N/(q+1)} V(x/eps)
// on the unit ball B_1, and the moments C1, C2 (curvature factored out).
struct ScaledQuantities {
  double eps;
  double U1, V1, Up1, Vq1;
  double C1, C2;
  bool C1_finite = true, C2_finite = true;
  std::string note;
};
ScaledQuantities scaled_quantities(const BubbleProfile& profile, double eps);

void write_profile_csv(const std::string& path, const BubbleProfile& profile);

}  // namespace critdual
