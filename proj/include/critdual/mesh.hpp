#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace critdual {

enum class MeshKind { RadialAnnulus, RadialBall, AxisymAnnulus, AxisymBall };

std::string to_string(MeshKind k);
MeshKind mesh_kind_from_string(const std::string& s);

// |S^k|, the surface measure of the unit k-sphere.
double sphere_measure(int k);
// Volume of the unit ball in R^N.
double ball_volume(int N);

struct MeshParams {
  MeshKind kind = MeshKind::RadialAnnulus;
  int N = 4;
  double r0 = 1, R = 2;
  int nr = 256;
  int ntheta = 64;
  // sinh grading toward r = R (0 = uniform) and toward theta = 0.
  double r_grading = 0;
  double theta_grading = 0;
  // Lets tests build very small grids for dense-matrix oracles.
  bool allow_coarse = false;
};

// Cell-centred finite-volume grid in (r) or (r, theta) for the N-dimensional
// Laplacian restricted to radial or axisymmetric functions. Cell index is
// i * nt + j with i radial and j polar. Zero boundary flux is the discrete
// Neumann condition; the pole and the origin need no special rows because
// their face areas vanish.
class Mesh {
 public:
  struct Face {
    int a, b;
    double coeff;  // face area / node distance, with angular metric folded in
  };
  struct BoundaryFace {
    int cell;
    double area;
    double r;      // radius of the face
    double theta;  // polar node angle of the adjacent cell (0 for radial)
    int side;      // +1 outer sphere, -1 inner sphere
  };

  static std::shared_ptr<const Mesh> build(const MeshParams& prm);

  const MeshParams& params() const { return prm_; }
  MeshKind kind() const { return prm_.kind; }
  int N() const { return prm_.N; }
  bool axisym() const { return prm_.kind == MeshKind::AxisymAnnulus || prm_.kind == MeshKind::AxisymBall; }
  bool ball() const { return prm_.kind == MeshKind::RadialBall || prm_.kind == MeshKind::AxisymBall; }
  double r0() const { return prm_.r0; }
  double R() const { return prm_.R; }
  int nr() const { return nr_; }
  int nt() const { return nt_; }
  int size() const { return nr_ * nt_; }
  int index(int i, int j) const { return i * nt_ + j; }

  const std::vector<double>& r_faces() const { return rf_; }
  const std::vector<double>& r_nodes() const { return rc_; }
  const std::vector<double>& theta_faces() const { return tf_; }
  const std::vector<double>& theta_nodes() const { return tc_; }
  double r_of(int k) const { return rc_[k / nt_]; }
  double theta_of(int k) const { return tc_[k % nt_]; }

  const Eigen::VectorXd& weights() const { return w_; }
  double volume() const { return volume_; }  // exact continuum volume
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<BoundaryFace>& boundary() const { return boundary_; }
  // Cells whose stencil does not touch the radial boundary.
  const std::vector<char>& interior() const { return interior_; }
  // Graph Laplacian L with u^T L v = discrete Dirichlet form.
  const Eigen::SparseMatrix<double>& stiffness() const { return L_; }
  bool theta_symmetric(double tol = 1e-13) const;

  std::string describe() const;

 private:
  Mesh() = default;
  MeshParams prm_;
  int nr_ = 0, nt_ = 1;
  std::vector<double> rf_, rc_, tf_, tc_;
  Eigen::VectorXd w_;
  double volume_ = 0;
  std::vector<Face> faces_;
  std::vector<BoundaryFace> boundary_;
  std::vector<char> interior_;
  Eigen::SparseMatrix<double> L_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

// Grid function with a lazily filled cache of L^s norms.
class Field {
 public:
  Field() = default;
  Field(MeshPtr mesh, Eigen::VectorXd values);
  static Field constant(MeshPtr mesh, double c);
  static Field sample(MeshPtr mesh, const std::function<double(double r, double theta)>& fn);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const Eigen::VectorXd& values() const { return v_; }
  Eigen::VectorXd& mutable_values() {
    cache_.clear();
    return v_;
  }
  double operator[](int k) const { return v_[k]; }
  int size() const { return int(v_.size()); }

  double integral() const;
  double norm(double s) const;

 private:
  MeshPtr mesh_;
  Eigen::VectorXd v_;
  mutable std::map<double, double> cache_;
};

double integrate(const Mesh& m, const Eigen::VectorXd& u);
double norm_Ls(const Mesh& m, const Eigen::VectorXd& u, double s);
double integrate(const Field& u);
double norm_Ls(const Field& u, double s);
// Weighted inner product sum w u v.
double inner(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
// Discrete Dirichlet form sum over faces coeff (u_a-u_b)(v_a-v_b).
double dirichlet_form(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Discrete Laplacian with homogeneous Neumann data.
Eigen::VectorXd laplacian(const Mesh& m, const Eigen::VectorXd& u);
Field laplacian(const Field& u);
// Same, with prescribed outward normal derivatives on the boundary faces
// (ordered as Mesh::boundary()).
Eigen::VectorXd laplacian(const Mesh& m, const Eigen::VectorXd& u, const Eigen::VectorXd& dnu);
// Quadrature of a boundary function given its values on Mesh::boundary().
double boundary_integral(const Mesh& m, const Eigen::VectorXd& g);
// Samples g(r, theta) on Mesh::boundary().
Eigen::VectorXd sample_boundary(const Mesh& m, const std::function<double(double r, double theta)>& g);

// CSV dump: r,theta,w and one column per field.
void write_field_csv(const std::string& path, const Mesh& m, const std::vector<std::pair<std::string, const Eigen::VectorXd*>>& cols);

}  // namespace critdual
