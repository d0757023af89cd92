#pragma once

// Finite-volume solver for div(delta grad v) = div F on the disk |x'| < R0
// (d = 3) with Dirichlet data on the outer circle, and the measurements
// built on it: oscillation profiles, Moser sup checks, epsilon sweeps of the
// gradient, the leading-coefficient experiment and Hardy/CKN ratios.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gapgrad/geometry.hpp"
#include "gapgrad/radial.hpp"
#include "gapgrad/regression.hpp"
#include "gapgrad/spectral.hpp"

namespace gapgrad {

/// Cell-centered polar grid: r_i = (i + 1/2) R0 / n_r, theta_j = (j + 1/2) 2pi / n_theta.
/// There is no unknown at the origin.
struct PolarGrid {
  int n_r = 64;
  int n_theta = 64;
  double R0 = 1.0;

  void validate() const;
  double dr() const { return R0 / n_r; }
  double dtheta() const;
  double radius(int i) const { return (i + 0.5) * dr(); }
  double theta(int j) const { return (j + 0.5) * dtheta(); }
  double face_theta(int j) const { return j * dtheta(); }
  int index(int i, int j) const { return i * n_theta + j; }
  int size() const { return n_r * n_theta; }
};

/// F sampled on cell faces: radial component on the circles r = i dr
/// ((n_r + 1) x n_theta) and angular component on the rays theta = j dtheta
/// (n_r x n_theta). Empty vectors mean F = 0.
struct FaceFlux {
  std::vector<double> radial;
  std::vector<double> angular;
  bool empty() const { return radial.empty() && angular.empty(); }
};

using VectorField = std::function<std::array<double, 2>(double x, double y)>;

FaceFlux sample_face_flux(const PolarGrid& grid, const VectorField& F);

struct MatrixEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// The SPD five-point system after Dirichlet elimination. Transmissibilities
/// are stored per face; `trans_radial[i * n_theta + j]` couples cells (i-1, j)
/// and (i, j) across r = i dr (row 0 is the degenerate origin face, row n_r
/// the Dirichlet face); `trans_angular[i * n_theta + j]` couples (i, j-1) and
/// (i, j) across theta = j dtheta.
struct DiskSystem {
  PolarGrid grid;
  double eps = 0.0;
  double m = 2.0;
  std::vector<double> trans_radial;
  std::vector<double> trans_angular;
  std::vector<double> diag;
  std::vector<double> rhs;
  std::vector<double> boundary;       // g at theta_j
  std::vector<double> kappa_centers;  // kappa(theta_j)
  std::vector<double> kappa_faces;    // kappa(j dtheta)
  std::vector<double> div_flux;       // per-cell sum of F.n * area
  double min_face_delta = 0.0;        // over faces of positive area

  std::vector<double> apply(std::span<const double> v) const;
  std::vector<MatrixEntry> entries() const;
};

DiskSystem assemble_disk_system(const AngularWeight& kappa, double m, double eps,
                                const PolarGrid& grid, const FaceFlux& F,
                                std::span<const double> g);
DiskSystem assemble_disk_system(const WeightSpec& spec, double eps, const PolarGrid& grid,
                                const FaceFlux& F, std::span<const double> g);

/// Boundary data sampled at theta_j.
std::vector<double> sample_boundary(const PolarGrid& grid, const std::function<double(double)>& g);

struct DiskField {
  PolarGrid grid;
  std::vector<double> values;  // n_r x n_theta, row-major in r
  double eps = 0.0;
  std::vector<double> boundary;
  std::vector<double> kappa_centers;
  double solve_residual = 0.0;
  int iterations = 0;

  double at(int i, int j) const { return values[grid.index(i, j)]; }
  /// Value on the circle r = rho at theta_j, by cubic Lagrange interpolation in r
  /// (the Dirichlet data closes the stencil at r = R0).
  double on_circle(double rho, int j) const;
};

enum class Preconditioner { jacobi, separable };

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 200000;
  std::vector<double> initial_guess;
  Preconditioner preconditioner = Preconditioner::separable;
};

/// Preconditioned conjugate gradients on the SPD system. `jacobi` is plain
/// diagonal scaling. `separable` replaces delta by kappa(theta) s(r) with
/// s(r) = r^m + eps / kappa_mid and solves that operator exactly (angular
/// eigenbasis times radial tridiagonal solves); it is exact at eps = 0 and
/// spectrally equivalent for eps > 0. Throws ConvergenceError with the
/// residual history if the relative residual stays above tol.
DiskField solve_disk(const DiskSystem& system, const SolveOptions& options = {});

/// Field sampled from f(r, theta) with the given (normally zero) boundary data.
DiskField sample_field(const PolarGrid& grid, const std::function<double(double, double)>& f,
                       std::vector<double> boundary = {});

/// |grad v| at every cell center by central differences (across the origin for the
/// innermost ring, against the Dirichlet data for the outermost).
std::vector<double> gradient_magnitude(const DiskField& field);

struct DecayProfile {
  std::vector<double> rho;
  std::vector<double> omega;
};

enum class OmegaForm { circle, annulus };

struct OmegaOptions {
  OmegaForm form = OmegaForm::circle;
  double cbar0 = 0.0;                 // annulus half-width factor
  std::optional<double> center_value; // circle form: overrides the ring-average reference
};

DecayProfile omega_profile(const DiskField& field, std::span<const double> rho_list,
                           const OmegaOptions& options = {});

/// kappa-weighted mean over the innermost ring, the discrete v(0').
double center_value(const DiskField& field);

RateFit verify_oscillation_decay(const DecayProfile& profile, double predicted_alpha);

struct MoserLevel {
  int n_r = 0;
  double F_norm = 0.0;
  double sup_v = 0.0;
  double ratio = 0.0;
};

struct MoserReport {
  std::vector<MoserLevel> levels;
  double max_relative_change = 0.0;
  bool stable = false;  // every successive change <= tolerance
  double tolerance = 0.1;
};

/// Solves div(delta grad v2) = div F with zero boundary data on each level,
/// normalizing F to unit (eps, sigma, 0) norm.
MoserReport moser_sup_check(const AngularWeight& kappa, double m, double eps, double sigma,
                            std::span<const int> n_r_levels, const VectorField& F,
                            double tolerance = 0.1, int n_theta = 0);

struct SweepPoint {
  double eps = 0.0;
  double max_gradient = 0.0;
  double probe_radius = 0.0;
  int probe_cells = 0;      // radial cells inside the probe radius
  bool asymptotic = true;   // probe disk inside B'_{R0/2}
  int iterations = 0;
};

struct SweepOptions {
  PolarGrid grid{1024, 64, 1.0};
  double probe_radius = 2.0;  // probe disk |x'| <= probe_radius * eps^{1/m}
  double tol = 1e-10;
  int min_probe_cells = 8;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  RateFit fit;
  bool all_asymptotic = true;
};

SweepResult gradient_rate_sweep(const AngularWeight& kappa, double m,
                                const std::function<double(double)>& g,
                                std::span<const double> eps_list, double predicted_exponent,
                                const SweepOptions& options = {});

struct LowerBoundOptions {
  int j0 = 1;
  double gamma = 0.9;
  // Strength s of the test forcing F = s r^{m-1+alpha+gamma} kappa(theta) Y(theta) e_r,
  // which sits at the envelope |F| <= C |x'|^{m-1+gamma+alpha}. Zero disables it.
  double forcing = 0.25;
  double fit_r_min = 0.02;
  double fit_r_max = 0.5;
  int fit_points = 24;
  std::function<double(double)> boundary;  // defaults to xi_{j0}
  double tol = 1e-10;
};

struct LowerBoundResult {
  bool degenerate = false;  // boundary data has no component on Y_{1,j0}
  std::string note;
  double lambda1 = 0.0;
  double alpha = 0.0;
  double boundary_projection = 0.0;
  LeadingFit fit;
  std::vector<double> r;
  std::vector<double> U;
};

LowerBoundResult lower_bound_experiment(const WeightSpec& spec, const PolarGrid& grid,
                                        const LowerBoundOptions& options = {});

struct RatioReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool degenerate = false;
};

/// sup_r r^{d+m-2} avg_{|x'|=r} |w|^2 against int |x'|^{m+beta} |grad w|^2 (d = 3).
RatioReport hardy_trace_ratio(const DiskField& w, double beta, double m);

/// ||u||_{L^p(|x'|^m)} / ||grad u||_{L^2(|x'|^m)}, p = 2(d+m-1)/(d+m-3) (d = 3).
RatioReport ckn_ratio(const DiskField& u, double m);

}  // namespace gapgrad
