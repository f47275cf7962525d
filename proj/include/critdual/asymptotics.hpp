#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "critdual/groundstate.hpp"
#include "critdual/mesh.hpp"

namespace critdual {

// Geometric grid hi = e_0 > e_1 > ... > e_{n-1} = lo.
std::vector<double> geometric_grid(double hi, double lo, int n);

// Least squares y = sum_k c_k phi_k(x) with t-based 95% half widths.
struct LinearFit {
  Eigen::VectorXd coef, half_width;
  double rms = 0;  // residual root mean square
  int dof = 0;
};
LinearFit fit_linear(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double level = 0.95);

enum class SweepQuantity { U1, V1, Up1, Vq1 };
std::string to_string(SweepQuantity q);
SweepQuantity sweep_quantity_from_string(const std::string& s);

// Predicted eps-behaviour a eps^slope |log eps|^log_power.
struct Rate {
  double slope = 0;
  double log_power = 0;
  std::string source;  // which branch of the rate table
  bool log_regime = false;
};
// Rate table for the bubble L^1 norms over a bounded domain, with the roles of
// (p, U) and (q, V) exchanged when q > p.
Rate predicted_norm_rate(const ExponentPack& pack, SweepQuantity q);
// Rate for ||d_nu U_eps||_{2(N-1)/N} on the boundary sphere.
Rate predicted_normal_rate(const ExponentPack& pack);

struct SweepRecord {
  ExponentPack pack;
  std::string quantity;
  std::vector<double> eps, values;
  double slope = 0, slope_ci = 0, amplitude = 0;
  Rate predicted;
  bool has_prediction = true;
  double fit_rms = 0;
  double tolerance = 0.02;  // relative tolerance on the slope
  bool flagged = false;     // fit residual too large for the model
  bool pass = false;
  std::string note;
};
// Fits log y = log a + s log eps + m log|log eps| with m fixed by the prediction.
void fit_sweep(SweepRecord& rec);

SweepRecord norm_rate_sweep(const BubbleProfile& profile, SweepQuantity q, const std::vector<double>& eps);

// Bubble centred at the north pole of the ball of radius R; the boundary
// integrands depend only on the distance to the pole, so a 1D quadrature is exact.
struct BoundaryTerms {
  SweepRecord term;    // int_{dB} U_eps d_nu V_eps
  SweepRecord normal;  // ||d_nu U_eps||_{L^{2(N-1)/N}(dB)}
  double eps0 = 0;     // the term is negative for every grid eps <= eps0
};
BoundaryTerms boundary_term_sweep(const BubbleProfile& profile, const std::vector<double>& eps, double R = 1);

// Test pair (U_eps^p - mean, V_eps^q - mean) centred at the north pole of a ball mesh.
struct TestPair {
  Eigen::VectorXd f, g;
};
TestPair boundary_test_pair(const Mesh& ball, const BubbleProfile& profile, double eps);
// Same with the bubble at the centre of the ball.
TestPair interior_test_pair(const Mesh& ball, const BubbleProfile& profile, double eps);
// Smallest eps with at least `cells` mesh cells across the bubble core at the pole.
double min_resolved_eps(const Mesh& ball, const BubbleProfile& profile, double cells = 8);

double test_function_ratio(const MeshPtr& ball, const BubbleProfile& profile, double eps);

struct RatioSweep {
  std::vector<double> eps, ratio;
  double threshold = 0;
  double c1 = 0, c1_ci = 0, c2 = 0, c2_ci = 0;  // ratio - threshold = c1 eps + c2 eps^2
  double fit_rms = 0;
  bool all_above = false;  // ratio > threshold at every grid eps
  bool model_monotone = false;  // fitted model increasing in eps on the window
  bool pass = false;
};
RatioSweep test_function_sweep(const MeshPtr& ball, const BubbleProfile& profile, const std::vector<double>& eps);

enum class CherrierFamily { Boundary, Interior, Random, Constant };
std::string to_string(CherrierFamily f);
CherrierFamily cherrier_family_from_string(const std::string& s);

struct CherrierRecord {
  CherrierFamily family;
  double eta = 0, eta_star = 0;
  std::vector<double> eps;        // concentration scale (seed index for the random family)
  std::vector<double> lead;       // ||u||_{eta*} / ||Delta u||_eta
  std::vector<double> lower;      // ||u||_{W^{1,eta}} / ||Delta u||_eta
  std::vector<double> c_lo;       // grid of lower-order constants
  std::vector<std::vector<double>> shifted;  // (||u|| - C ||u||_{W^{1,eta}}) / ||Delta u||, per eps and C
  double leading = 0;  // empirical leading constant at the sharpest member
  double target = 0;   // 2^{2/N}/S on the boundary, 1/S in the interior, 0 if no claim
  double rel_error = 0;
  bool skipped = false;
  std::string label;
  bool pass = false;
};
// u = K f with the mesh Neumann inverse, so d_nu u = 0 and Delta u = -f exactly.
CherrierRecord cherrier_probe(const MeshPtr& mesh, const BubbleProfile& profile, CherrierFamily family,
                              const std::vector<double>& eps, double tol = 0.03);

// Discrete ||u||_{W^{1,s}} from centred node differences.
double w1_norm(const Mesh& m, const Eigen::VectorXd& u, double s);

void write_sweep_csv(const std::string& path, const SweepRecord& rec);

}  // namespace critdual
