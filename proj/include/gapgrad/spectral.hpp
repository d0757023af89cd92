#pragma once

// Weighted eigenproblem -(kappa u')' = lambda kappa u on the unit circle,
// discretized by a conservative cell-centered finite-volume scheme, plus
// Rayleigh quotients, reflection-parity analysis and the continuation of
// "property O" along the weight family 1 + mu b.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gapgrad/geometry.hpp"

namespace gapgrad {

/// A positive weight on S^1 parametrized by the angle.
using AngularWeight = std::function<double(double)>;

/// Throws UnsupportedError unless spec.d == 3.
AngularWeight angular_weight(const WeightSpec& spec);

/// Uniform cell-centered grid on [0, 2pi): centers (j + 1/2) h, faces j h.
/// Face j separates cell j-1 from cell j; face n is face 0.
struct CircleGrid {
  int n = 0;
  std::vector<double> centers;
  std::vector<double> faces;

  explicit CircleGrid(int cells);
  double spacing() const;
};

/// Symmetric cyclic tridiagonal matrix: row i couples to i-1 and i+1 mod n.
/// `off[i]` is the entry coupling i and i+1 (mod n).
struct CyclicTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  int size() const { return static_cast<int>(diag.size()); }
  std::vector<double> apply(std::span<const double> u) const;
  double entry(int row, int col) const;
};

struct CircleOperator {
  CyclicTridiagonal stiffness;  // K, positive semidefinite, kernel = constants
  std::vector<double> mass;     // diagonal of M: kappa at cell centers
  std::vector<double> kappa_faces;
  CircleGrid grid;
};

CircleOperator assemble_operator(const AngularWeight& kappa, const CircleGrid& grid);
CircleOperator assemble_operator(const WeightSpec& spec, const CircleGrid& grid);

struct ParityEntry {
  int coordinate = 0;           // 1-based j
  double projected_norm = 0.0;  // largest M-norm of a projected eigenvector
  bool odd_member = false;      // projected_norm > threshold
};

struct ClusterParity {
  int first = 0;  // index into eigenvalues
  int size = 0;
  std::vector<ParityEntry> entries;
  bool property_O() const;
};

struct Spectrum {
  std::vector<double> eigenvalues;                 // ascending
  std::vector<std::vector<double>> eigenfunctions; // kappa-orthonormal: (1/n) sum kappa u v = delta
  std::vector<int> multiplicities;                 // one entry per cluster
  std::vector<int> cluster_of;                     // eigenvalue index -> cluster index
  std::vector<ClusterParity> parity;               // empty when kappa is not even
  std::vector<double> residuals;                   // ||K y - lambda M y|| / ||M y||
  std::vector<double> mass;
  std::vector<double> kappa_faces;
  int n = 0;

  int cluster_count() const { return static_cast<int>(multiplicities.size()); }
  int cluster_start(int cluster) const;
};

/// First k generalized eigenpairs, ascending. Eigenvalues closer than
/// `cluster_rtol` (relative) are grouped into one multiplicity cluster.
Spectrum solve_spectrum(const CircleOperator& op, int k, double cluster_rtol = 1e-6);

/// Convenience: lambda_1, the first eigenvalue above the constant mode.
double first_nonzero_eigenvalue(const AngularWeight& kappa, int n);

/// Richardson extrapolation of lambda_1 over the grid sizes n, 2n, ...,
/// assuming an O(n^-2) leading error. Returns the estimate from the two
/// finest grids together with the per-level values.
struct RichardsonResult {
  std::vector<int> sizes;
  std::vector<double> values;
  std::vector<double> extrapolated;  // one per consecutive pair
  double estimate = 0.0;
};
RichardsonResult richardson_lambda1(const AngularWeight& kappa, std::span<const int> sizes);

double rayleigh_quotient(std::span<const double> u, const CircleOperator& op);

/// kappa-weighted inner product (1/n) sum kappa_j u_j v_j.
double kappa_inner(std::span<const double> u, std::span<const double> v,
                   std::span<const double> mass);

/// True when kappa (sampled at centers and faces) is invariant under both
/// coordinate reflections of the circle.
bool weight_is_even(std::span<const double> mass, std::span<const double> kappa_faces,
                    double rtol = 1e-12);

/// Reflection images on a cell-centered circle grid with n cells (n even).
std::vector<double> reflect(std::span<const double> u, int coordinate);

/// Projection onto {odd in xi_j, even in the other coordinate}.
std::vector<double> odd_sector_projection(std::span<const double> u, int coordinate);

/// Parity of the eigenspace containing eigenvalue `eigen_index`.
/// Throws PreconditionError when the weight is not even.
ClusterParity parity_analysis(const Spectrum& spectrum, int eigen_index, double threshold = 1e-6);

/// The sign-normalized member of the lambda_1 eigenspace odd in xi_j,
/// positive where xi_j > 0 and kappa-normalized. Empty when none exists.
std::optional<std::vector<double>> odd_eigenfunction(const Spectrum& spectrum, int eigen_index,
                                                     int coordinate, double threshold = 1e-6);

struct PerturbedWeight {
  AngularWeight b;
  double sup_norm = 0.0;
  double reconstruction_error = 0.0;  // sup |1 + (eps0/2) b - kappa/kappa_{d-1}|
  double eps0 = 0.0;
};

/// b built so that 1 + (eps0/2) b equals kappa / kappa_{d-1} on the circle.
/// Requires A = {} and kappa_1 >= kappa_2.
PerturbedWeight perturbed_weight_b(const WeightSpec& spec, double eps0);

struct ContinuationEntry {
  double mu = 0.0;
  bool skipped = false;
  std::string note;
  double lambda1 = 0.0;
  int multiplicity = 0;
  bool property_O = false;
};

struct ContinuationReport {
  std::vector<ContinuationEntry> entries;
  bool holds_everywhere = false;
  // Largest contiguous run of swept mu around the value closest to 0 where property O holds.
  std::optional<std::pair<double, double>> interval;
};

ContinuationReport property_O_continuation(const AngularWeight& b, std::span<const double> mu_values,
                                           int n);

}  // namespace gapgrad
