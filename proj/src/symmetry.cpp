#include "critdual/symmetry.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numeric>

#include "critdual/errors.hpp"

namespace critdual {

namespace {

double omega(int N) { return ball_volume(N); }

}  // namespace

RadialProfile RadialProfile::from_mesh(const Mesh& m, const Eigen::VectorXd& h) {
  if (m.axisym()) throw ConfigError("radial profile needs a radial mesh");
  RadialProfile P;
  P.N = m.N();
  P.r0 = m.r0();
  P.R = m.R();
  P.edges = m.r_faces();
  P.values.assign(h.data(), h.data() + h.size());
  return P;
}

RadialProfile RadialProfile::from_volumes(int N, double r0, const std::vector<double>& vols, const std::vector<double>& vals) {
  RadialProfile P;
  P.N = N;
  P.r0 = r0;
  P.edges.push_back(r0);
  double s = 0;
  for (double v : vols) {
    s += v;
    P.edges.push_back(P.radius_of_volume(s));
  }
  P.R = P.edges.back();
  P.values = vals;
  return P;
}

double RadialProfile::volume_coordinate(double r) const { return omega(N) * (std::pow(r, N) - std::pow(r0, N)); }

double RadialProfile::radius_of_volume(double s) const { return std::pow(std::pow(r0, N) + s / omega(N), 1.0 / N); }

std::vector<double> RadialProfile::piece_volumes() const {
  std::vector<double> v(values.size());
  for (size_t k = 0; k < values.size(); ++k) v[k] = omega(N) * (std::pow(edges[k + 1], N) - std::pow(edges[k], N));
  return v;
}

std::vector<double> RadialProfile::cumulative_I() const {
  const auto vol = piece_volumes();
  std::vector<double> I(edges.size(), 0.0);
  for (size_t k = 0; k < values.size(); ++k) I[k + 1] = I[k] + values[k] * vol[k];
  return I;
}

double RadialProfile::integral() const { return cumulative_I().back(); }

double RadialProfile::norm(double s) const {
  const auto vol = piece_volumes();
  double acc = 0;
  for (size_t k = 0; k < values.size(); ++k) acc += vol[k] * std::pow(std::abs(values[k]), s);
  return std::pow(acc, 1.0 / s);
}

double RadialProfile::value_at(double r) const {
  size_t k = std::upper_bound(edges.begin(), edges.end(), r) - edges.begin();
  if (k == 0) k = 1;
  if (k > values.size()) k = values.size();
  return values[k - 1];
}

Eigen::VectorXd RadialProfile::project(const Mesh& m) const {
  if (m.axisym()) throw ConfigError("projection needs a radial mesh");
  const auto& rf = m.r_faces();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.nr());
  const double om = omega(N);
  size_t k = 0;
  for (int i = 0; i < m.nr(); ++i) {
    const double a = rf[i], b = rf[i + 1];
    while (k < values.size() && edges[k + 1] <= a) ++k;
    double acc = 0;
    for (size_t j = k; j < values.size() && edges[j] < b; ++j) {
      const double lo = std::max(a, edges[j]), hi = std::min(b, edges[j + 1]);
      if (hi > lo) acc += values[j] * om * (std::pow(hi, N) - std::pow(lo, N));
    }
    out[i] = acc / (om * (std::pow(b, N) - std::pow(a, N)));
  }
  return out;
}

std::vector<double> cumulative_I(const Mesh& m, const Eigen::VectorXd& h) {
  return RadialProfile::from_mesh(m, h).cumulative_I();
}

RadialProfile flip_F(const RadialProfile& h) {
  const auto vol = h.piece_volumes();
  const auto I = h.cumulative_I();
  double l1 = 0;
  for (size_t k = 0; k < vol.size(); ++k) l1 += vol[k] * std::abs(h.values[k]);
  const double band = 1e-12 * l1;
  // split a piece only where I changes sign by more than the rounding band;
  // pieces with |I| inside the band keep their sign
  std::vector<double> nv, nval;
  for (size_t k = 0; k < vol.size(); ++k) {
    const double a = I[k], b = I[k + 1];
    if ((a > band && b < -band) || (a < -band && b > band)) {
      const double c = a / (a - b) * vol[k];
      nv.push_back(c);
      nval.push_back(a > 0 ? h.values[k] : -h.values[k]);
      nv.push_back(vol[k] - c);
      nval.push_back(b > 0 ? h.values[k] : -h.values[k]);
    } else {
      nv.push_back(vol[k]);
      nval.push_back(0.5 * (a + b) < -band ? -h.values[k] : h.values[k]);
    }
  }
  RadialProfile out = RadialProfile::from_volumes(h.N, h.r0, nv, nval);
  out.R = h.R;
  out.edges.back() = h.R;
  return out;
}

RadialProfile star_transform(const RadialProfile& h) {
  RadialProfile f = flip_F(h);
  const auto vol = f.piece_volumes();
  std::vector<size_t> idx(vol.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return f.values[a] > f.values[b]; });
  std::vector<double> nv, nval;
  for (size_t i : idx) {
    if (!nval.empty() && nval.back() == f.values[i]) {
      nv.back() += vol[i];
    } else {
      nv.push_back(vol[i]);
      nval.push_back(f.values[i]);
    }
  }
  RadialProfile out = RadialProfile::from_volumes(h.N, h.r0, nv, nval);
  out.R = h.R;
  out.edges.back() = h.R;
  return out;
}

double radial_pairing(const RadialProfile& f, const RadialProfile& g) {
  // breakpoints of both, in the volume coordinate
  std::vector<double> s;
  for (double r : f.edges) s.push_back(f.volume_coordinate(r));
  for (double r : g.edges) s.push_back(f.volume_coordinate(r));
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end(), [](double a, double b) { return std::abs(a - b) <= 1e-15 * std::max(1.0, std::abs(b)); }),
          s.end());
  const int N = f.N;
  const double sig = sphere_measure(N - 1);
  const auto If = f.cumulative_I(), Ig = g.cumulative_I();
  const auto vf = f.piece_volumes(), vg = g.piece_volumes();
  auto I_at = [](const RadialProfile& P, const std::vector<double>& I, const std::vector<double>& vol, double ss) {
    double acc = 0;
    for (size_t k = 0; k < vol.size(); ++k) {
      if (ss <= acc + vol[k]) return I[k] + P.values[k] * (ss - acc);
      acc += vol[k];
    }
    return I.back();
  };
  double total = 0;
  for (size_t k = 0; k + 1 < s.size(); ++k) {
    const double a = s[k], b = s[k + 1];
    if (!(b > a)) continue;
    // I_f and I_g are affine on (a, b)
    const double fa = I_at(f, If, vf, a), fb = I_at(f, If, vf, b), ga = I_at(g, Ig, vg, a), gb = I_at(g, Ig, vg, b);
    // in the volume coordinate the weight r^{-2(N-1)} has a nearby pole, so integrate in r
    auto integrand = [&](double r) {
      const double t = (f.volume_coordinate(r) - a) / (b - a);
      return (fa + t * (fb - fa)) * (ga + t * (gb - ga)) / (sig * std::pow(r, N - 1));
    };
    total += boost::math::quadrature::gauss<double, 20>::integrate(integrand, f.radius_of_volume(a), f.radius_of_volume(b));
  }
  return total;
}

double max_difference(const RadialProfile& a, const RadialProfile& b) {
  std::vector<double> e = a.edges;
  e.insert(e.end(), b.edges.begin(), b.edges.end());
  std::sort(e.begin(), e.end());
  double worst = 0;
  for (size_t k = 0; k + 1 < e.size(); ++k) {
    if (!(e[k + 1] > e[k] * (1 + 1e-14))) continue;
    const double m = 0.5 * (e[k] + e[k + 1]);
    worst = std::max(worst, std::abs(a.value_at(m) - b.value_at(m)));
  }
  return worst;
}

Eigen::VectorXd polarize(const Mesh& m, const Eigen::VectorXd& w, int orientation) {
  if (!m.axisym()) return w;
  if (!m.theta_symmetric()) throw ConfigError("polarization needs a theta grid symmetric about pi/2");
  Eigen::VectorXd out(w.size());
  const int nt = m.nt();
  for (int i = 0; i < m.nr(); ++i) {
    for (int j = 0; j < nt; ++j) {
      const int jm = nt - 1 - j;
      const double a = w[m.index(i, j)], b = w[m.index(i, jm)];
      const bool north = (orientation > 0) ? (j < jm) : (j > jm);
      if (j == jm)
        out[m.index(i, j)] = a;
      else
        out[m.index(i, j)] = north ? std::max(a, b) : std::min(a, b);
    }
  }
  return out;
}

FsDiagnostic fs_check(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v, double tol) {
  FsDiagnostic d;
  const double su = std::max(1e-300, u.cwiseAbs().maxCoeff()), sv = std::max(1e-300, v.cwiseAbs().maxCoeff());
  for (int i = 0; i < m.nr(); ++i) {
    double lo = u[m.index(i, 0)], hi = lo;
    for (int j = 1; j < m.nt(); ++j) {
      lo = std::min(lo, u[m.index(i, j)]);
      hi = std::max(hi, u[m.index(i, j)]);
    }
    d.radial_spread = std::max(d.radial_spread, (hi - lo) / su);
  }
  auto violation = [&](const Eigen::VectorXd& x, double scale, int orient) {
    double worst = 0;
    for (int i = 0; i < m.nr(); ++i)
      for (int j = 0; j + 1 < m.nt(); ++j) {
        const double inc = x[m.index(i, j + 1)] - x[m.index(i, j)];
        worst = std::max(worst, orient * inc);
      }
    return worst / scale;
  };
  double best = std::numeric_limits<double>::infinity();
  for (int orient : {+1, -1}) {
    const double vu = violation(u, su, orient), vv = violation(v, sv, orient);
    if (std::max(vu, vv) < best) {
      best = std::max(vu, vv);
      d.orientation = orient;
      d.violation_u = vu;
      d.violation_v = vv;
    }
  }
  d.violation = best;
  d.pass = best <= tol;
  return d;
}

SymmetryGap symmetry_gap(const ExponentPack& pk, const GapOptions& opt) {
  auto solve_pair = [&](int nr, int nt, SymmetryGap& out) {
    MeshParams mr;
    mr.kind = MeshKind::RadialAnnulus;
    mr.N = opt.N;
    mr.r0 = opt.r0;
    mr.R = opt.R;
    mr.nr = nr;
    mr.allow_coarse = opt.allow_coarse;
    auto rad = Mesh::build(mr);
    out.rad = maximize_D_radial(rad, pk, opt.dual);
    if (opt.both_radial) {
      out.axi = maximize_D_radial(rad, pk, opt.dual);
    } else {
      MeshParams ma = mr;
      ma.kind = MeshKind::AxisymAnnulus;
      ma.ntheta = nt;
      auto axi = Mesh::build(ma);
      DualOptions d = opt.dual;
      // the radial optimum, extended constant in theta, is a feasible start
      Eigen::VectorXd f(axi->size()), g(axi->size());
      for (int k = 0; k < axi->size(); ++k) {
        f[k] = out.rad.f[k / axi->nt()];
        g[k] = out.rad.g[k / axi->nt()];
      }
      d.inits.insert(d.inits.begin(), {f, g});
      out.axi = maximize_D(axi, pk, d);
    }
    out.D = out.axi.D;
    out.D_rad = out.rad.D;
    out.gap = out.D - out.D_rad;
  };
  SymmetryGap coarse;
  solve_pair(opt.nr, opt.ntheta, coarse);
  if (!opt.estimate_noise || opt.both_radial) return coarse;
  SymmetryGap fine;
  solve_pair(2 * opt.nr, 2 * opt.ntheta, fine);
  fine.noise = std::abs(fine.gap - coarse.gap);
  return fine;
}

}  // namespace critdual
