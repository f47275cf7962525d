#include "critdual/mesh.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

#include "critdual/errors.hpp"

namespace critdual {

std::string to_string(MeshKind k) {
  switch (k) {
    case MeshKind::RadialAnnulus: return "radial-annulus";
    case MeshKind::RadialBall: return "radial-ball";
    case MeshKind::AxisymAnnulus: return "axisym-annulus";
    case MeshKind::AxisymBall: return "axisym-ball";
  }
  return "?";
}

MeshKind mesh_kind_from_string(const std::string& s) {
  if (s == "radial-annulus") return MeshKind::RadialAnnulus;
  if (s == "radial-ball") return MeshKind::RadialBall;
  if (s == "axisym-annulus") return MeshKind::AxisymAnnulus;
  if (s == "axisym-ball") return MeshKind::AxisymBall;
  throw ConfigError("unknown mesh kind '" + s + "'");
}

double sphere_measure(int k) {
  const double h = 0.5 * (k + 1);
  return 2 * std::pow(M_PI, h) / std::tgamma(h);
}

double ball_volume(int N) { return sphere_measure(N - 1) / N; }

namespace {

// Graded map of [0,1] onto itself, clustering toward xi = 1 for g > 0.
double graded_to_end(double xi, double g) {
  if (g <= 0) return xi;
  return 1 - std::sinh(g * (1 - xi)) / std::sinh(g);
}

double graded_to_start(double xi, double g) {
  if (g <= 0) return xi;
  return std::sinh(g * xi) / std::sinh(g);
}

// int_a^b sin^n; Gauss on each cell keeps full relative accuracy near the poles.
double sin_power_integral(double a, double b, int n) {
  auto f = [n](double t) { return std::pow(std::sin(t), n); };
  return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

}  // namespace

std::shared_ptr<const Mesh> Mesh::build(const MeshParams& prm) {
  const int N = prm.N;
  if (N < 4) throw ConfigError("mesh dimension must be at least 4");
  const bool ball = prm.kind == MeshKind::RadialBall || prm.kind == MeshKind::AxisymBall;
  const bool axi = prm.kind == MeshKind::AxisymAnnulus || prm.kind == MeshKind::AxisymBall;
  const double r0 = ball ? 0.0 : prm.r0;
  if (!(prm.R > r0) || r0 < 0 || !std::isfinite(prm.R)) throw ConfigError("degenerate radii: need 0 <= r0 < R");
  if (!ball && !(r0 > 0)) throw ConfigError("annulus needs r0 > 0");
  if (!prm.allow_coarse) {
    if (prm.nr < 64) throw ResolutionError("nr = " + std::to_string(prm.nr) + " is below the minimum 64");
    if (axi && prm.ntheta < 32) throw ResolutionError("ntheta = " + std::to_string(prm.ntheta) + " is below the minimum 32");
  }
  if (prm.nr < 2 || (axi && prm.ntheta < 2)) throw ResolutionError("grid too small");

  std::shared_ptr<Mesh> m(new Mesh());
  m->prm_ = prm;
  m->prm_.r0 = r0;
  m->nr_ = prm.nr;
  m->nt_ = axi ? prm.ntheta : 1;
  const int nr = m->nr_, nt = m->nt_;

  m->rf_.resize(nr + 1);
  for (int i = 0; i <= nr; ++i) m->rf_[i] = r0 + (prm.R - r0) * graded_to_end(double(i) / nr, prm.r_grading);
  m->rf_[0] = r0;
  m->rf_[nr] = prm.R;
  m->rc_.resize(nr);
  for (int i = 0; i < nr; ++i) m->rc_[i] = 0.5 * (m->rf_[i] + m->rf_[i + 1]);

  // Polar cells: J = int sin^{N-2} over the cell, cbar = its cos-centroid. The
  // node angle is arccos(cbar), which makes the stencil exact on r cos(theta).
  std::vector<double> J(nt, 1.0), cbar(nt, 0.0);
  const int n = N - 2;
  if (axi) {
    m->tf_.resize(nt + 1);
    for (int j = 0; j <= nt; ++j) m->tf_[j] = M_PI * graded_to_start(double(j) / nt, prm.theta_grading);
    m->tf_[0] = 0;
    m->tf_[nt] = M_PI;
    m->tc_.resize(nt);
    for (int j = 0; j < nt; ++j) {
      const double a = m->tf_[j], b = m->tf_[j + 1];
      J[j] = sin_power_integral(a, b, n);
      cbar[j] = (std::pow(std::sin(b), n + 1) - std::pow(std::sin(a), n + 1)) / ((n + 1) * J[j]);
      // the closed form loses digits near the equator; fall back to quadrature there
      if (std::abs(cbar[j]) < 0.5) {
        auto f = [n](double t) { return std::cos(t) * std::pow(std::sin(t), n); };
        cbar[j] = boost::math::quadrature::gauss<double, 20>::integrate(f, a, b) / J[j];
      }
      m->tc_[j] = std::acos(std::clamp(cbar[j], -1.0, 1.0));
    }
  } else {
    m->tf_ = {0.0, M_PI};
    m->tc_ = {0.0};
  }

  const double sig = axi ? sphere_measure(N - 2) : sphere_measure(N - 1);
  m->volume_ = sphere_measure(N - 1) * (std::pow(prm.R, N) - std::pow(r0, N)) / N;
  m->w_.resize(nr * nt);
  for (int i = 0; i < nr; ++i) {
    const double shell = (std::pow(m->rf_[i + 1], N) - std::pow(m->rf_[i], N)) / N;
    for (int j = 0; j < nt; ++j) m->w_[m->index(i, j)] = sig * shell * J[j];
  }

  // radial faces
  for (int i = 0; i + 1 < nr; ++i) {
    const double area = sig * std::pow(m->rf_[i + 1], N - 1);
    const double d = m->rc_[i + 1] - m->rc_[i];
    for (int j = 0; j < nt; ++j) m->faces_.push_back({m->index(i, j), m->index(i + 1, j), area * J[j] / d});
  }
  // polar faces
  if (axi) {
    for (int i = 0; i < nr; ++i) {
      const double G = (std::pow(m->rf_[i + 1], N - 1) - std::pow(m->rf_[i], N - 1)) / ((N - 1) * m->rc_[i]);
      for (int j = 0; j + 1 < nt; ++j) {
        const double t = std::pow(std::sin(m->tf_[j + 1]), N - 1) / (cbar[j] - cbar[j + 1]);
        m->faces_.push_back({m->index(i, j), m->index(i, j + 1), sig * G * t});
      }
    }
  }

  for (int j = 0; j < nt; ++j) {
    m->boundary_.push_back({m->index(nr - 1, j), sig * std::pow(prm.R, N - 1) * J[j], prm.R, m->tc_[j], +1});
    if (!ball) m->boundary_.push_back({m->index(0, j), sig * std::pow(r0, N - 1) * J[j], r0, m->tc_[j], -1});
  }

  m->interior_.assign(nr * nt, 1);
  for (int j = 0; j < nt; ++j) {
    m->interior_[m->index(nr - 1, j)] = 0;
    if (!ball) m->interior_[m->index(0, j)] = 0;
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * m->faces_.size());
  for (const auto& f : m->faces_) {
    trip.emplace_back(f.a, f.a, f.coeff);
    trip.emplace_back(f.b, f.b, f.coeff);
    trip.emplace_back(f.a, f.b, -f.coeff);
    trip.emplace_back(f.b, f.a, -f.coeff);
  }
  m->L_.resize(nr * nt, nr * nt);
  m->L_.setFromTriplets(trip.begin(), trip.end());
  return m;
}

bool Mesh::theta_symmetric(double tol) const {
  if (!axisym()) return true;
  for (int j = 0; j <= nt_; ++j)
    if (std::abs(tf_[j] + tf_[nt_ - j] - M_PI) > tol) return false;
  return true;
}

std::string Mesh::describe() const {
  std::ostringstream os;
  os << to_string(prm_.kind) << " N=" << prm_.N << " r0=" << prm_.r0 << " R=" << prm_.R << " nr=" << nr_;
  if (axisym()) os << " ntheta=" << nt_;
  return os.str();
}

Field::Field(MeshPtr mesh, Eigen::VectorXd values) : mesh_(std::move(mesh)), v_(std::move(values)) {
  if (v_.size() != mesh_->size()) throw ConfigError("field size does not match mesh");
}

Field Field::constant(MeshPtr mesh, double c) {
  const int n = mesh->size();
  return Field(std::move(mesh), Eigen::VectorXd::Constant(n, c));
}

Field Field::sample(MeshPtr mesh, const std::function<double(double, double)>& fn) {
  Eigen::VectorXd v(mesh->size());
  for (int k = 0; k < mesh->size(); ++k) v[k] = fn(mesh->r_of(k), mesh->theta_of(k));
  return Field(std::move(mesh), std::move(v));
}

double Field::integral() const { return critdual::integrate(*mesh_, v_); }

double Field::norm(double s) const {
  auto it = cache_.find(s);
  if (it != cache_.end()) return it->second;
  const double v = norm_Ls(*mesh_, v_, s);
  cache_[s] = v;
  return v;
}

double integrate(const Mesh& m, const Eigen::VectorXd& u) { return m.weights().dot(u); }

double norm_Ls(const Mesh& m, const Eigen::VectorXd& u, double s) {
  const auto& w = m.weights();
  if (s == 2) return std::sqrt(w.dot(u.cwiseAbs2()));
  double acc = 0;
  for (int k = 0; k < u.size(); ++k) acc += w[k] * std::pow(std::abs(u[k]), s);
  return std::pow(acc, 1.0 / s);
}

double integrate(const Field& u) { return u.integral(); }
double norm_Ls(const Field& u, double s) { return u.norm(s); }

double inner(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return m.weights().dot(u.cwiseProduct(v));
}

double dirichlet_form(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  double acc = 0;
  for (const auto& f : m.faces()) acc += f.coeff * (u[f.a] - u[f.b]) * (v[f.a] - v[f.b]);
  return acc;
}

Eigen::VectorXd laplacian(const Mesh& m, const Eigen::VectorXd& u) {
  Eigen::VectorXd out = -(m.stiffness() * u);
  return out.cwiseQuotient(m.weights());
}

Field laplacian(const Field& u) { return Field(u.mesh_ptr(), laplacian(u.mesh(), u.values())); }

Eigen::VectorXd laplacian(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& dnu) {
  if (dnu.size() != int(m.boundary().size())) throw ConfigError("boundary data size mismatch");
  Eigen::VectorXd flux = -(m.stiffness() * u);
  for (size_t b = 0; b < m.boundary().size(); ++b) flux[m.boundary()[b].cell] += m.boundary()[b].area * dnu[b];
  return flux.cwiseQuotient(m.weights());
}

double boundary_integral(const Mesh& m, const Eigen::VectorXd& g) {
  double acc = 0;
  for (size_t b = 0; b < m.boundary().size(); ++b) acc += m.boundary()[b].area * g[b];
  return acc;
}

Eigen::VectorXd sample_boundary(const Mesh& m, const std::function<double(double, double)>& g) {
  Eigen::VectorXd out(m.boundary().size());
  for (size_t b = 0; b < m.boundary().size(); ++b) out[b] = g(m.boundary()[b].r, m.boundary()[b].theta);
  return out;
}

void write_field_csv(const std::string& path, const Mesh& m,
                     const std::vector<std::pair<std::string, const Eigen::VectorXd*>>& cols) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os.precision(17);
  os << "r,theta,w";
  for (const auto& c : cols) os << ',' << c.first;
  os << '\n';
  for (int k = 0; k < m.size(); ++k) {
    os << m.r_of(k) << ',' << m.theta_of(k) << ',' << m.weights()[k];
    for (const auto& c : cols) os << ',' << (*c.second)[k];
    os << '\n';
  }
}

}  // namespace critdual
