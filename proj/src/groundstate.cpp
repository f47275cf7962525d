#include "critdual/groundstate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "critdual/errors.hpp"
#include "critdual/mesh.hpp"

namespace critdual {

std::string to_string(DecayRegime r) {
  switch (r) {
    case DecayRegime::Fast: return "q>N/(N-2)";
    case DecayRegime::Log: return "q=N/(N-2)";
    case DecayRegime::Slow: return "q<N/(N-2)";
  }
  return "?";
}

DecayRegime decay_regime(const ExponentPack& k) {
  const double qs = std::min(k.p, k.q);
  const double crit = double(k.N) / (k.N - 2);
  if (std::abs(qs - crit) <= 1e-9 * crit) return DecayRegime::Log;
  return qs > crit ? DecayRegime::Fast : DecayRegime::Slow;
}

double sobolev_constant_closed_form(int N) {
  return M_PI * N * (N - 2) * std::pow(std::tgamma(N / 2.0) / std::tgamma(double(N)), 2.0 / N);
}

double TailModel::value(double r) const {
  const double lead = c1 * std::pow(r, -e1) * (log_power ? std::log(r) : 1.0);
  return lead + c2 * std::pow(r, -e2) + c3 * std::pow(r, -e3);
}

double TailModel::derivative(double r) const {
  double d1 = -e1 * c1 * std::pow(r, -e1 - 1);
  if (log_power) d1 = c1 * std::pow(r, -e1 - 1) * (1 - e1 * std::log(r));
  return d1 - e2 * c2 * std::pow(r, -e2 - 1) - e3 * c3 * std::pow(r, -e3 - 1);
}

namespace {

namespace odeint = boost::numeric::odeint;
using Real = long double;
using State = std::array<Real, 4>;  // U, U', V, V'

Real spow(Real x, Real t) {
  if (x == 0) return 0;
  return std::copysign(std::pow(std::abs(x), t), x);
}

struct Rhs {
  Real p, q;
  int N;
  void operator()(const State& y, State& dy, Real r) const {
    dy[0] = y[1];
    dy[1] = -(N - 1) * y[1] / r - spow(y[2], q);
    dy[2] = y[3];
    dy[3] = -(N - 1) * y[3] / r - spow(y[0], p);
  }
};

// Taylor start at r = rs: U = d + U2 r^2 + U4 r^4, likewise V with V(0) = 1.
State series_state(const ExponentPack& k, Real d, Real rs) {
  const int N = k.N;
  const Real U2 = -1 / Real(2 * N);
  const Real V2 = -std::pow(d, Real(k.p)) / (2 * N);
  const Real U4 = -Real(k.q) * V2 / (4 * (N + 2));
  const Real V4 = -Real(k.p) * std::pow(d, Real(k.p) - 1) * U2 / (4 * (N + 2));
  const Real r2 = rs * rs;
  return {d + U2 * r2 + U4 * r2 * r2, 2 * U2 * rs + 4 * U4 * r2 * rs, 1 + V2 * r2 + V4 * r2 * r2,
          2 * V2 * rs + 4 * V4 * r2 * rs};
}

constexpr Real kStart = 1e-3L;

enum class Outcome { Low, High, Undecided };

struct RunResult {
  Outcome outcome = Outcome::Undecided;
  double r_event = 0;
};

// Integrates from the series start; records samples on grid (grid[0] = 0 is
// taken from the series) until rec_end and classifies d by which component
// reaches zero first.
RunResult run(const ExponentPack& k, Real d, double r_end, double rtol, const std::vector<double>* grid,
              double rec_end, std::vector<State>* out) {
  Rhs rhs{Real(k.p), Real(k.q), k.N};
  auto stepper = odeint::make_dense_output<odeint::runge_kutta_dopri5<State, Real>>(Real(1e-40), Real(rtol));
  State y = series_state(k, d, kStart);
  stepper.initialize(y, kStart, Real(1e-4));
  size_t gi = 1;
  if (out) {
    out->clear();
    out->push_back({d, 0, 1, 0});
  }
  RunResult res;
  State tmp;
  try {
    for (int steps = 0; steps < 5000000; ++steps) {
      auto iv = stepper.do_step(rhs);
      const Real t0 = iv.first, t1 = iv.second;
      const State& cur = stepper.current_state();
      for (double v : cur)
        if (!std::isfinite(double(v))) throw ConvergenceError("shooting ODE produced non-finite values (blow-up)");
      const bool cu = cur[0] <= 0, cv = cur[2] <= 0;
      if (cu || cv) {
        // locate the first crossing inside the step by bisection on the dense output
        auto first_zero = [&](int comp) {
          Real a = t0, b = t1;
          for (int it = 0; it < 80; ++it) {
            Real m = 0.5L * (a + b);
            stepper.calc_state(m, tmp);
            (tmp[comp] <= 0 ? b : a) = m;
          }
          return b;
        };
        Real zu = cu ? first_zero(0) : std::numeric_limits<Real>::infinity();
        Real zv = cv ? first_zero(2) : std::numeric_limits<Real>::infinity();
        res.outcome = zu <= zv ? Outcome::Low : Outcome::High;
        res.r_event = double(std::min(zu, zv));
        if (out && grid) {
          while (gi < grid->size() && (*grid)[gi] <= rec_end && (*grid)[gi] < res.r_event) {
            stepper.calc_state((*grid)[gi], tmp);
            out->push_back(tmp);
            ++gi;
          }
        }
        return res;
      }
      if (out && grid) {
        while (gi < grid->size() && (*grid)[gi] <= t1 && (*grid)[gi] <= rec_end) {
          stepper.calc_state((*grid)[gi], tmp);
          out->push_back(tmp);
          ++gi;
        }
      }
      if (t1 >= r_end) break;
    }
  } catch (const odeint::step_adjustment_error& e) {
    throw ConvergenceError(std::string("shooting step-size failure: ") + e.what());
  }
  // No crossing: use the harmonic constants X + r X'/(N-2), which tend to the
  // constant mode that eventually drives one component negative.
  const State& y1 = stepper.current_state();
  const Real r = stepper.current_time();
  const Real cu = (y1[0] + r * y1[1] / (k.N - 2)) / y1[0];
  const Real cv = (y1[2] + r * y1[3] / (k.N - 2)) / y1[2];
  if (cu < 0 || cv < 0) res.outcome = cu < cv ? Outcome::Low : Outcome::High;
  res.r_event = double(r);
  return res;
}

const char* name(Outcome o) {
  switch (o) {
    case Outcome::Low: return "U-crosses-first";
    case Outcome::High: return "V-crosses-first";
    default: return "undecided";
  }
}

// Least squares fit of X by c1 phi1 + c2 phi2 in relative error on samples
// with r in [lo, hi].
Eigen::Vector3d fit_terms(const std::vector<double>& r, const std::vector<double>& X, double lo, double hi,
                          const std::function<double(double)>& phi1, const std::function<double(double)>& phi2,
                          const std::function<double(double)>& phi3) {
  std::vector<int> idx;
  for (size_t i = 0; i < r.size(); ++i)
    if (r[i] >= lo && r[i] <= hi) idx.push_back(int(i));
  if (idx.size() < 8) throw ResolutionError("tail fit window has too few samples (r_max too small)");
  Eigen::MatrixXd A(idx.size(), 3);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(idx.size());
  for (size_t k = 0; k < idx.size(); ++k) {
    const double rr = r[idx[k]];
    A(k, 0) = phi1(rr) / X[idx[k]];
    A(k, 1) = phi2(rr) / X[idx[k]];
    A(k, 2) = phi3(rr) / X[idx[k]];
  }
  // column scaling for conditioning
  Eigen::Vector3d sc(A.col(0).norm(), A.col(1).norm(), A.col(2).norm());
  for (int c = 0; c < 3; ++c) A.col(c) /= sc[c];
  Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
  return c.cwiseQuotient(sc);
}

}  // namespace

BubbleProfile shoot(const ExponentPack& pack, const ShootOptions& opt) {
  if (!(opt.tol > 0 && opt.tol <= 1e-4)) throw ConfigError("shoot tolerance must lie in (0, 1e-4]");
  if (!(opt.r_max > 1)) throw ConfigError("r_max must exceed 1");
  const double r_cap = 1e12;
  auto classify = [&](Real d) { return run(pack, d, r_cap, opt.ode_rtol, nullptr, 0, nullptr); };

  // bracket search around the symmetric-point value d = 1
  Real lo = 1, hi = 1;
  RunResult rl = classify(lo), rh = rl;
  int guard = 0;
  if (rl.outcome == Outcome::Undecided) {
    // the start value is already a ground state to working precision
    for (Real del = 1e-15L; del < 1e-3L && (rl.outcome != Outcome::Low || rh.outcome != Outcome::High); del *= 4) {
      lo = 1 - del;
      hi = 1 + del;
      rl = classify(lo);
      rh = classify(hi);
    }
  } else if (rl.outcome == Outcome::High) {
    while (rl.outcome == Outcome::High && guard++ < 200) {
      hi = lo;
      rh = rl;
      lo *= 0.5L;
      rl = classify(lo);
    }
  } else {
    while (rh.outcome != Outcome::High && guard++ < 200) {
      if (rh.outcome == Outcome::Low) lo = hi;
      rl = rh;
      hi *= 2;
      rh = classify(hi);
    }
  }
  if (rl.outcome != Outcome::Low || rh.outcome != Outcome::High) {
    std::ostringstream os;
    os << "shooting bracket not found: d=" << double(lo) << " -> " << name(rl.outcome) << ", d=" << double(hi) << " -> "
       << name(rh.outcome);
    throw ConvergenceError(os.str());
  }
  for (int it = 0; it < 200; ++it) {
    const Real mid = 0.5L * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    RunResult rm = classify(mid);
    if (rm.outcome == Outcome::Low) {
      lo = mid;
    } else if (rm.outcome == Outcome::High) {
      hi = mid;
    } else {
      // mid is a ground state to working precision
      const Real e = 8 * std::numeric_limits<Real>::epsilon() * mid;
      lo = mid - e;
      hi = mid + e;
      break;
    }
  }
  if (hi - lo > Real(opt.tol) * hi) {
    std::ostringstream os;
    os << "shooting bisection stalled at relative width " << double((hi - lo) / hi);
    throw ConvergenceError(os.str());
  }

  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double r = std::expm1(k * opt.grid_step);
    grid.push_back(r);
    if (r > opt.r_max) break;
  }
  std::vector<State> s_lo, s_hi;
  run(pack, lo, r_cap, opt.ode_rtol, &grid, opt.r_max, &s_lo);
  run(pack, hi, r_cap, opt.ode_rtol, &grid, opt.r_max, &s_hi);
  const size_t n = std::min(s_lo.size(), s_hi.size());

  BubbleProfile P;
  P.pack = pack;
  P.shoot_d = double(0.5L * (lo + hi));
  P.bracket_lo = double(lo);
  P.bracket_hi = double(hi);
  P.r_trust = grid[n - 1];
  for (size_t i = 0; i < n; ++i) {
    const State& a = s_lo[i];
    const State& b = s_hi[i];
    const Real su = std::abs(a[0] - b[0]) / std::abs(a[0] + b[0]);
    const Real sv = std::abs(a[2] - b[2]) / std::abs(a[2] + b[2]);
    if (2 * std::max(su, sv) > Real(opt.trust)) {
      P.r_trust = grid[i];
      break;
    }
    P.r.push_back(grid[i]);
    P.U.push_back(double(0.5L * (a[0] + b[0])));
    P.dU.push_back(double(0.5L * (a[1] + b[1])));
    P.V.push_back(double(0.5L * (a[2] + b[2])));
    P.dV.push_back(double(0.5L * (a[3] + b[3])));
  }
  if (P.r.size() < 50) throw ResolutionError("shooting trajectories separate before any useful range");
  P.r_max = P.r.back();
  for (size_t i = 1; i < P.r.size(); ++i) {
    if (!(P.U[i] > 0 && P.V[i] > 0 && P.U[i] < P.U[i - 1] && P.V[i] < P.V[i - 1]))
      throw ConvergenceError("shooting profile is not positive and decreasing at r = " + std::to_string(P.r[i]));
  }
  profile_constants(P);
  return P;
}

std::string describe_tail(const TailModel& t) {
  std::ostringstream os;
  os << t.c1 << " r^-" << t.e1 << (t.log_power ? " log r" : "") << " + " << t.c2 << " r^-" << t.e2 << " + " << t.c3
     << " r^-" << t.e3 << " (drift " << t.drift << ")";
  return os.str();
}

ProfileSample BubbleProfile::eval(double x) const {
  if (x < 0) x = -x;
  if (x > r_max) return {tail_U.value(x), tail_U.derivative(x), tail_V.value(x), tail_V.derivative(x)};
  size_t i = std::upper_bound(r.begin(), r.end(), x) - r.begin();
  if (i == 0) i = 1;
  if (i >= r.size()) i = r.size() - 1;
  const double r0 = r[i - 1], r1 = r[i], h = r1 - r0, t = (x - r0) / h;
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t), h01 = t * t * (3 - 2 * t),
               h11 = t * t * (t - 1);
  const double d00 = 6 * t * (t - 1) / h, d10 = (1 - t) * (1 - 3 * t), d01 = -d00, d11 = t * (3 * t - 2);
  auto hv = [&](const std::vector<double>& y, const std::vector<double>& dy) {
    return h00 * y[i - 1] + h10 * h * dy[i - 1] + h01 * y[i] + h11 * h * dy[i];
  };
  auto hd = [&](const std::vector<double>& y, const std::vector<double>& dy) {
    return d00 * y[i - 1] + d10 * dy[i - 1] + d01 * y[i] + d11 * dy[i];
  };
  return {hv(U, dU), hd(U, dU), hv(V, dV), hd(V, dV)};
}

double BubbleProfile::integrate(const std::function<double(double, const ProfileSample&)>& f, double lo,
                                double hi) const {
  using G = boost::math::quadrature::gauss<double, 7>;
  double acc = 0;
  auto g = [&](double x) {
    if (!std::isfinite(x)) return 0.0;
    const double v = f(x, eval(x));
    return std::isfinite(v) ? v : 0.0;
  };
  if (lo < r_max) {
    const double top = std::min(hi, r_max);
    size_t i = std::upper_bound(r.begin(), r.end(), lo) - r.begin();
    double a = lo;
    for (; i < r.size() && a < top; ++i) {
      const double b = std::min(r[i], top);
      if (b > a) acc += G::integrate(g, a, b);
      a = b;
    }
  }
  if (hi > r_max) {
    const double a = std::max(lo, r_max);
    if (std::isinf(hi)) {
      boost::math::quadrature::exp_sinh<double> es;
      acc += es.integrate(g, a, std::numeric_limits<double>::infinity());
    } else {
      acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, hi, 12, 1e-12);
    }
  }
  return acc;
}

double BubbleProfile::ball_integral(const std::function<double(const ProfileSample&)>& F, double rho) const {
  const int N = pack.N;
  return sphere_measure(N - 1) * integrate([&](double x, const ProfileSample& s) { return F(s) * std::pow(x, N - 1); }, 0, rho);
}

ProfileConstants profile_constants(BubbleProfile& P) {
  const auto& k = P.pack;
  const int N = k.N;
  const double P_ = std::max(k.p, k.q), Q = std::min(k.p, k.q);
  P.regime = decay_regime(k);
  P.fast_is_U = k.p < k.q;
  const double m_g = P.regime == DecayRegime::Slow ? Q * (N - 2) - 2 : N - 2.0;

  TailModel fast, slow;
  fast.e1 = N - 2;
  fast.e2 = P_ * m_g - 2;
  switch (P.regime) {
    case DecayRegime::Fast:
      slow.e1 = N - 2;
      slow.e2 = Q * (N - 2) - 2;
      break;
    case DecayRegime::Log:
      slow.e1 = N - 2;
      slow.log_power = 1;
      slow.e2 = N - 2;
      break;
    case DecayRegime::Slow:
      slow.e1 = m_g;
      slow.e2 = N - 2;
      break;
  }
  const std::vector<double>& Xf = P.fast_is_U ? P.U : P.V;
  const std::vector<double>& Xs = P.fast_is_U ? P.V : P.U;
  auto fit = [&](TailModel& tm, const std::vector<double>& X) {
    auto phi1 = [&](double r) { return std::pow(r, -tm.e1) * (tm.log_power ? std::log(r) : 1.0); };
    auto phi2 = [&](double r) { return std::pow(r, -tm.e2); };
    auto phi3 = [&](double r) { return std::pow(r, -tm.e3); };
    const double R = P.r_max;
    auto c = fit_terms(P.r, X, R / 2, R, phi1, phi2, phi3);
    auto c_in = fit_terms(P.r, X, R / 4, R / 2, phi1, phi2, phi3);
    tm.c1 = c[0];
    tm.c2 = c[1];
    tm.c3 = c[2];
    tm.drift = std::abs(c_in[0] - c[0]) / std::abs(c[0]);
  };
  fast.e3 = 2 * fast.e2 - fast.e1;
  slow.e3 = slow.log_power ? slow.e1 + 2 : 2 * std::max(slow.e1, slow.e2) - std::min(slow.e1, slow.e2);
  fit(fast, Xf);
  fit(slow, Xs);
  const double drift = std::max(fast.drift, slow.drift);
  if (!(drift < 0.01)) {
    std::ostringstream os;
    os << "r_max too small: tail coefficient drifts by " << 100 * drift << "% across the fit window (r_max = " << P.r_max
       << ")";
    throw ResolutionError(os.str());
  }
  if (!(slow.c1 > 0 && fast.c1 > 0 && std::isfinite(slow.c1)))
    throw ResolutionError("fitted decay constants are not positive and finite");
  if (P.fast_is_U) {
    P.tail_U = fast;
    P.tail_V = slow;
  } else {
    P.tail_V = fast;
    P.tail_U = slow;
  }
  P.a = fast.c1;
  P.b = slow.c1;
  const double pp = k.p, qq = k.q;
  P.int_U = P.ball_integral([pp](const ProfileSample& s) { return std::pow(s.U, pp + 1); }, std::numeric_limits<double>::infinity());
  P.int_V = P.ball_integral([qq](const ProfileSample& s) { return std::pow(s.V, qq + 1); }, std::numeric_limits<double>::infinity());
  P.S = std::pow(P.int_U, 2.0 / N);
  return {P.S, P.a, P.b, P.regime};
}

ScaledQuantities scaled_quantities(const BubbleProfile& P, double eps) {
  if (!(eps > 0 && eps <= 1)) throw ConfigError("eps must lie in (0, 1]");
  const auto& k = P.pack;
  const int N = k.N;
  const double sp = k.sp, sq = k.sq, rho = 1 / eps;
  ScaledQuantities out;
  out.eps = eps;
  const double p = k.p, q = k.q;
  // int_{B_1} eps^{-s} X(x/eps) dx = eps^{N-s} int_{B_{1/eps}} X
  out.U1 = std::pow(eps, N - sp) * P.ball_integral([](const ProfileSample& s) { return s.U; }, rho);
  out.V1 = std::pow(eps, N - sq) * P.ball_integral([](const ProfileSample& s) { return s.V; }, rho);
  out.Up1 = std::pow(eps, N - p * sp) * P.ball_integral([p](const ProfileSample& s) { return std::pow(s.U, p); }, rho);
  out.Vq1 = std::pow(eps, N - q * sq) * P.ball_integral([q](const ProfileSample& s) { return std::pow(s.V, q); }, rho);

  // s^N X^{t+1} s^{N-2}... the moment int s^N X^{t+1} ds converges iff the tail exponent m(t+1) > N + 1
  const double sig = sphere_measure(N - 2);
  auto moment = [&](const TailModel& tm, double t, bool& finite, const std::function<double(const ProfileSample&)>& F) {
    if (!(tm.e1 * (t + 1) > N + 1)) {
      finite = false;
      std::ostringstream os;
      os << "moment diverges: tail exponent " << tm.e1 << " * " << t + 1 << " <= " << N + 1 << "; ";
      out.note += os.str();
      return std::numeric_limits<double>::quiet_NaN();
    }
    return 0.5 * sig * P.integrate([&](double s, const ProfileSample& x) { return std::pow(s, N) * F(x); }, 0,
                                   std::numeric_limits<double>::infinity());
  };
  out.C1 = moment(P.tail_U, p, out.C1_finite, [p](const ProfileSample& s) { return std::pow(s.U, p + 1); });
  out.C2 = moment(P.tail_V, q, out.C2_finite, [q](const ProfileSample& s) { return std::pow(s.V, q + 1); });
  return out;
}

void write_profile_csv(const std::string& path, const BubbleProfile& P) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os.precision(17);
  os << "r,U,V,dU,dV\n";
  for (size_t i = 0; i < P.r.size(); ++i) os << P.r[i] << ',' << P.U[i] << ',' << P.V[i] << ',' << P.dU[i] << ',' << P.dV[i] << '\n';
}

}  // namespace critdual
