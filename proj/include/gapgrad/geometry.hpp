#pragma once

// Configuration types and closed-form geometry of the thin gap between two
// m-convex inclusions: the angular weight kappa, the gap height delta, the
// explicit constants theta1..3, c0, cbar0, curvilinear cube profiles,
// weighted norms/averages and the slab change of variables.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gapgrad {

using Point = std::vector<double>;

/// Geometric configuration of the leading-order gap profile.
///
/// Index sets are 1-based, as in the config files: `setA` and `setB` must
/// partition {1, ..., d-1}. `kappa[i-1]` is the coefficient of coordinate i.
struct WeightSpec {
  int d = 3;
  double m = 2.0;
  double kappa0 = 1.0;
  std::vector<double> kappa;
  std::vector<int> setA;
  std::vector<int> setB;

  /// Throws InputError describing the first violated invariant.
  void validate() const;

  int dim() const { return d - 1; }

  /// A = {}, B = {1..d-1}, all kappa equal to `value`.
  static WeightSpec power_sum(int d, double m, double value = 1.0);
  /// A = {1..d-1}, B = {}, giving kappa0 * (sum kappa_i xi_i^2)^{m/2}.
  static WeightSpec radial(int d, double m, double kappa0, double value = 1.0);
};

struct DerivedConstants {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  double c0 = 0.0;
  double cbar0 = 0.0;
  double varrho = 0.0;  // lower sandwich bound, equals theta3^{-m/(m-1)}
};

/// kappa(xi) for a unit vector xi in R^{d-1}.
double kappa_weight(const WeightSpec& spec, std::span<const double> xi);

/// kappa at angle theta on the unit circle (d = 3 only).
double kappa_at_angle(const WeightSpec& spec, double theta);

DerivedConstants derived_constants(const WeightSpec& spec);

/// delta(x') = eps + kappa(x'/|x'|) |x'|^m; equals eps at the origin.
double delta(const WeightSpec& spec, double eps, std::span<const double> x);

/// Analytic gradient of delta with respect to x' (zero at the origin).
Point delta_gradient(const WeightSpec& spec, std::span<const double> x);

// ---------------------------------------------------------------------------
// Curvilinear cubes

struct CubeSpec {
  double r1 = 1.0;
  double r2 = 1.0;
  double m = 2.0;
  void validate() const;
};

struct CubeProfile {
  double kappabar = 0.0;
  std::function<double(std::span<const double>)> h1;
  std::function<double(std::span<const double>)> h2;
  std::function<double(std::span<const double>)> gap;  // h1 - h2
  /// Sampled sup of |gap - kappabar * sum|x_i|^m| / |x'|^{2m} on |x'| <= min(r1,r2)/2.
  double remainder_bound = 0.0;
};

/// Exact gap of two curvilinear cubes touching at the origin, in dimension
/// `dim` = d - 1 of the horizontal variable.
CubeProfile cube_profile(const CubeSpec& cube, int dim = 2);

/// The WeightSpec with A = {}, kappa_i = kappabar that the cube gap realizes.
WeightSpec cube_weight_spec(const CubeSpec& cube, int d = 3);

// ---------------------------------------------------------------------------
// Weighted norms and averages

/// Indices of sup |x'|^{-sigma} (eps + |x'|^m)^{tau - 1} |F(x')|.
struct NormSpec {
  double eps = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
};

/// One sample of a scalar (size 1) or vector field.
struct FieldSample {
  Point x;
  std::vector<double> value;
};

double weighted_norm(std::span<const FieldSample> field, const NormSpec& norm, double m);

enum class Surface { sphere, ball };

using ScalarField = std::function<double(std::span<const double>)>;

/// kappa-weighted mean of f over the circle |x'| = rho or the disk |x'| < rho.
double weighted_average(const ScalarField& f, const WeightSpec& spec, double rho, Surface surface,
                        double R0, int n_theta = 256);

// ---------------------------------------------------------------------------
// Gap profiles and the slab change of variables

using HeightFunction = std::function<double(std::span<const double>)>;

/// h sampled on a uniform Cartesian grid of [-L, L]^2 and evaluated by
/// cubic convolution.
class SampledHeight {
 public:
  SampledHeight(std::vector<double> values, int n, double half_width);
  static SampledHeight from_function(const HeightFunction& h, int n, double half_width);

  double operator()(std::span<const double> x) const;

 private:
  std::vector<double> values_;
  int n_;
  double half_width_;
  double spacing_;
  double at(int i, int j) const;
};

struct GapProfile {
  double eps = 0.0;
  double R0 = 1.0;
  HeightFunction h1;
  HeightFunction h2;
  double gamma = 0.5;
  double tau1 = 1.0;
  double tau2 = 1.0;
};

/// Maps a point x = (x', x_d) of the gap onto the slab |y_d| <= delta0.
/// Throws DomainError when x is outside the gap or the gap has zero height.
Point gap_transform(const GapProfile& profile, std::span<const double> x, double delta0);

struct HConditionReport {
  double max_gradient_ratio = 0.0;   // sup_j |grad h_j| / |x'|^{m-1}
  bool gradient_ok = true;           // max_gradient_ratio <= tau1
  double remainder_constant = 0.0;   // sup |h1 - h2 - model| / |x'|^{m+gamma}
  std::optional<double> remainder_exponent;  // log-log slope; empty when the remainder vanishes
  bool remainder_ok = true;          // exponent >= m + gamma (or remainder ~ 0)
  double c2_norm = 0.0;              // sampled ||h1||_C2 + ||h2||_C2
  bool c2_ok = true;                 // c2_norm <= tau2
  std::size_t sample_count = 0;
  bool passes() const { return gradient_ok && remainder_ok && c2_ok; }
};

HConditionReport validate_H_conditions(const GapProfile& profile, const WeightSpec& spec,
                                       std::span<const Point> samples);

std::string describe(const WeightSpec& spec);

}  // namespace gapgrad
