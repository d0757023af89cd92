#pragma once

// Radial Euler-type ODE  V'' + ((m+d-2)/r) V' - (lambda/r^2) V = H(r)
// arising from separation of variables of div(kappa r^m grad v) = div F.

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace gapgrad {

enum class RadialSource { closed_form, rk4, variation_of_parameters };

struct RadialSolution {
  std::vector<double> r;       // ascending, inside (0, 1]
  std::vector<double> values;  // v(r) (for variation of parameters: v = r^alpha w)
  std::vector<double> w;       // variation-of-parameters factor; empty otherwise
  std::optional<double> closed_form_exponent;
  RadialSource source = RadialSource::closed_form;
  // Local power-law exponent d log|v| / d log r fitted over the innermost decade of the grid.
  std::optional<double> observed_exponent;
  bool singular_branch = false;  // observed exponent is negative: blows up toward r = 0
};

/// rho^{alpha_+(lambda)}, the H^1-admissible homogeneous solution with V(1) = 1.
double homogeneous_radial(double lambda_k, int d, double m, double rho);

/// Classical RK4 integration of the homogeneous ODE from r_start down to r_end.
RadialSolution solve_radial_ivp(double lambda_k, int d, double m, double r_start, double r_end,
                                double v1, double dv1, int steps);

/// w(r) = int_0^r s^{-(d+m+2a-2)} int_0^s t^{d+m+a-2} H(t) dt ds and v = r^a w,
/// by nested Gauss-Legendre on geometrically graded panels.
RadialSolution variation_of_parameters(const std::function<double(double)>& H, double alpha, int d,
                                       double m, std::span<const double> r_grid,
                                       double rtol = 1e-10);

/// Applies L v = v'' + ((m+d-2)/r) v' - (lambda/r^2) v by central differences at
/// interior points of a uniform grid.
std::vector<double> apply_radial_operator(std::span<const double> r, std::span<const double> v,
                                          double lambda, int d, double m);

struct LeadingFit {
  double C1 = 0.0;
  double C1_stderr = 0.0;
  double correction = 0.0;  // c in U / r^alpha = C1 + c r^gamma
  double correction_stderr = 0.0;
  std::optional<double> residual_exponent;  // slope of log|U - C1 r^alpha|; empty at numerical zero
  double max_relative_residual = 0.0;        // of the two-term model
  int count = 0;
};

/// Least squares of U(r)/r^alpha against 1 + c r^gamma with alpha, gamma fixed.
LeadingFit fit_leading_coefficient(std::span<const double> r, std::span<const double> U,
                                   double alpha, double gamma);

}  // namespace gapgrad
