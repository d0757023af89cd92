#include "gapgrad/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gapgrad/error.hpp"

namespace gapgrad {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int mod(int a, int n) { return ((a % n) + n) % n; }

// Cell j maps to this cell under xi_coordinate -> -xi_coordinate.
int reflected_center(int j, int n, int coordinate) {
  return coordinate == 1 ? mod(n / 2 - 1 - j, n) : mod(n - 1 - j, n);
}

int reflected_face(int j, int n, int coordinate) {
  return coordinate == 1 ? mod(n / 2 - j, n) : mod(n - j, n);
}

double m_norm(std::span<const double> u, std::span<const double> mass) {
  return std::sqrt(kappa_inner(u, u, mass));
}

struct EigenPairs {
  std::vector<double> values;
  Eigen::MatrixXd vectors;  // columns, M-orthonormal
};

// Dense path for small grids: C = M^{-1/2} K M^{-1/2}.
EigenPairs dense_pairs(const CircleOperator& op, int wanted) {
  const int n = op.stiffness.size();
  Eigen::VectorXd isq(n);
  for (int i = 0; i < n; ++i) isq[i] = 1.0 / std::sqrt(op.mass[i]);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j : {mod(i - 1, n), i, mod(i + 1, n)}) C(i, j) = op.stiffness.entry(i, j) * isq[i] * isq[j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw ConvergenceError("solve_spectrum: dense eigensolve failed", {});
  EigenPairs out;
  out.vectors = isq.asDiagonal() * es.eigenvectors().leftCols(wanted);
  for (int e = 0; e < wanted; ++e) out.values.push_back(es.eigenvalues()[e]);
  return out;
}

// Solves (K - shift M) x = b for the cyclic tridiagonal K by the periodic
// Thomas algorithm (Sherman-Morrison on the corner coupling).
class CyclicSolver {
 public:
  CyclicSolver(const CircleOperator& op, double shift) : n_(op.stiffness.size()) {
    const auto& K = op.stiffness;
    a_.resize(n_);
    c_.resize(n_);
    b_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      b_[i] = K.diag[i] - shift * op.mass[i];
      c_[i] = K.off[i];                 // couples i, i+1
      a_[i] = K.off[mod(i - 1, n_)];    // couples i, i-1
    }
    corner_ = K.off[n_ - 1];  // couples n-1 and 0
    gamma_ = -b_[0];
    bb_ = b_;
    bb_[0] -= gamma_;
    bb_[n_ - 1] -= corner_ * corner_ / gamma_;
    u_.assign(n_, 0.0);
    u_[0] = gamma_;
    u_[n_ - 1] = corner_;
    z_ = thomas(u_);
    zfac_ = 1.0 + z_[0] + corner_ * z_[n_ - 1] / gamma_;
  }

  void solve(const double* rhs, double* x) const {
    std::vector<double> r(rhs, rhs + n_);
    const auto y = thomas(r);
    const double f = (y[0] + corner_ * y[n_ - 1] / gamma_) / zfac_;
    for (int i = 0; i < n_; ++i) x[i] = y[i] - f * z_[i];
  }

 private:
  std::vector<double> thomas(const std::vector<double>& d) const {
    std::vector<double> cp(n_), dp(n_), x(n_);
    cp[0] = c_[0] / bb_[0];
    dp[0] = d[0] / bb_[0];
    for (int i = 1; i < n_; ++i) {
      const double den = bb_[i] - a_[i] * cp[i - 1];
      cp[i] = c_[i] / den;
      dp[i] = (d[i] - a_[i] * dp[i - 1]) / den;
    }
    x[n_ - 1] = dp[n_ - 1];
    for (int i = n_ - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
  }

  int n_;
  std::vector<double> a_, b_, c_, bb_, u_, z_;
  double corner_ = 0.0, gamma_ = 0.0, zfac_ = 1.0;
};

// Shift-invert subspace iteration with Rayleigh-Ritz in the M inner product.
EigenPairs lowest_pairs(const CircleOperator& op, int wanted) {
  const int n = op.stiffness.size();
  if (n <= 384 || 4 * wanted > n) return dense_pairs(op, wanted);

  const int p = std::min(n, wanted + std::max(8, wanted));
  const double shift = -1.0;
  const CyclicSolver solver(op, shift);

  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = normal(rng);
  const Eigen::Map<const Eigen::VectorXd> M(op.mass.data(), n);

  auto applyK = [&](const Eigen::MatrixXd& V) {
    Eigen::MatrixXd out(n, V.cols());
    for (int j = 0; j < V.cols(); ++j) {
      const auto col = op.stiffness.apply(std::span<const double>(V.col(j).data(), n));
      for (int i = 0; i < n; ++i) out(i, j) = col[i];
    }
    return out;
  };

  EigenPairs out;
  std::vector<double> history;
  for (int it = 0; it < 1000; ++it) {
    Eigen::MatrixXd MX = M.asDiagonal() * X;
    for (int j = 0; j < p; ++j) solver.solve(MX.col(j).data(), X.col(j).data());
    const Eigen::MatrixXd KX = applyK(X);
    const Eigen::MatrixXd Kp = X.transpose() * KX;
    const Eigen::MatrixXd Mp = X.transpose() * (M.asDiagonal() * X);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (Kp + Kp.transpose()),
                                                                   0.5 * (Mp + Mp.transpose()));
    if (ritz.info() != Eigen::Success) throw ConvergenceError("solve_spectrum: Rayleigh-Ritz failed", history);
    X = X * ritz.eigenvectors();
    const Eigen::MatrixXd R = KX * ritz.eigenvectors() - M.asDiagonal() * X * ritz.eigenvalues().asDiagonal();
    double worst = 0.0;
    for (int e = 0; e < wanted; ++e)
      worst = std::max(worst, R.col(e).norm() / (M.asDiagonal() * X.col(e)).norm());
    history.push_back(worst);
    if (worst <= 1e-11 || (it >= 20 && worst <= 1e-9 && worst >= 0.5 * history[history.size() - 6])) {
      out.vectors = X.leftCols(wanted);
      for (int e = 0; e < wanted; ++e) out.values.push_back(ritz.eigenvalues()[e]);
      return out;
    }
  }
  throw ConvergenceError("solve_spectrum: subspace iteration did not converge", history);
}

}  // namespace

AngularWeight angular_weight(const WeightSpec& spec) {
  spec.validate();
  if (spec.d != 3)
    throw UnsupportedError("spectral: only d = 3 (the circle S^1) is supported; got d = " +
                           std::to_string(spec.d));
  return [spec](double theta) { return kappa_at_angle(spec, theta); };
}

CircleGrid::CircleGrid(int cells) : n(cells) {
  if (cells < 16) throw InputError("CircleGrid: need at least 16 cells");
  if (cells % 2 != 0) throw InputError("CircleGrid: cell count must be even");
  const double h = kTwoPi / cells;
  centers.resize(cells);
  faces.resize(cells);
  for (int j = 0; j < cells; ++j) {
    centers[j] = (j + 0.5) * h;
    faces[j] = j * h;
  }
}

double CircleGrid::spacing() const { return kTwoPi / n; }

std::vector<double> CyclicTridiagonal::apply(std::span<const double> u) const {
  const int n = size();
  if (static_cast<int>(u.size()) != n) throw InputError("CyclicTridiagonal::apply: size mismatch");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int ip = i + 1 == n ? 0 : i + 1;
    const int im = i == 0 ? n - 1 : i - 1;
    out[i] = diag[i] * u[i] + off[i] * u[ip] + off[im] * u[im];
  }
  return out;
}

double CyclicTridiagonal::entry(int row, int col) const {
  const int n = size();
  double v = 0.0;
  if (row == col) v += diag[row];
  if (mod(row + 1, n) == col) v += off[row];
  if (mod(col + 1, n) == row) v += off[col];
  return v;
}

CircleOperator assemble_operator(const AngularWeight& kappa, const CircleGrid& grid) {
  const int n = grid.n;
  const double h = grid.spacing();
  CircleOperator op{{}, {}, {}, grid};
  op.mass.resize(n);
  op.kappa_faces.resize(n);
  for (int j = 0; j < n; ++j) {
    op.mass[j] = kappa(grid.centers[j]);
    op.kappa_faces[j] = kappa(grid.faces[j]);
    if (!(op.mass[j] > 0.0) || !(op.kappa_faces[j] > 0.0))
      throw InputError("assemble_operator: weight must be positive on the grid");
  }
  // Face j sits between cells j-1 and j; off[i] couples i and i+1 through face i+1.
  auto& K = op.stiffness;
  K.diag.assign(n, 0.0);
  K.off.assign(n, 0.0);
  const double inv_h2 = 1.0 / (h * h);
  for (int i = 0; i < n; ++i) {
    const double k_right = op.kappa_faces[mod(i + 1, n)] * inv_h2;
    K.off[i] = -k_right;
    K.diag[i] += k_right;
    K.diag[mod(i + 1, n)] += k_right;
  }
  return op;
}

CircleOperator assemble_operator(const WeightSpec& spec, const CircleGrid& grid) {
  return assemble_operator(angular_weight(spec), grid);
}

double kappa_inner(std::span<const double> u, std::span<const double> v, std::span<const double> mass) {
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += mass[j] * u[j] * v[j];
  return s / static_cast<double>(u.size());
}

int Spectrum::cluster_start(int cluster) const {
  int start = 0;
  for (int c = 0; c < cluster; ++c) start += multiplicities[c];
  return start;
}

bool ClusterParity::property_O() const {
  return std::any_of(entries.begin(), entries.end(), [](const ParityEntry& e) { return e.odd_member; });
}

Spectrum solve_spectrum(const CircleOperator& op, int k, double cluster_rtol) {
  const int n = op.stiffness.size();
  if (k < 1) throw InputError("solve_spectrum: k must be positive");
  if (k > n) throw InputError("solve_spectrum: requested more eigenpairs than grid cells");
  const int wanted = std::min(n, k + 4);

  const EigenPairs pairs = lowest_pairs(op, wanted);
  const std::vector<double>& w = pairs.values;

  Spectrum s;
  s.n = n;
  s.mass = op.mass;
  s.kappa_faces = op.kappa_faces;
  for (int e = 0; e < wanted; ++e) {
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = pairs.vectors(i, e);
    const double nrm = m_norm(y, op.mass);
    for (double& v : y) v /= nrm;
    // Deterministic sign: first entry of largest magnitude is positive.
    const auto big = std::max_element(y.begin(), y.end(),
                                      [](double a, double b) { return std::abs(a) < std::abs(b) - 1e-12; });
    if (*big < 0.0)
      for (double& v : y) v = -v;
    s.eigenvalues.push_back(w[e]);
    s.eigenfunctions.push_back(std::move(y));
  }

  // Clusters; keep only those that start within the first k and are complete.
  std::vector<int> mult;
  for (int e = 0; e < wanted;) {
    int len = 1;
    while (e + len < wanted &&
           std::abs(s.eigenvalues[e + len] - s.eigenvalues[e + len - 1]) <=
               cluster_rtol * std::max(1.0, std::abs(s.eigenvalues[e + len])))
      ++len;
    if (e >= k) break;
    if (e + len == wanted && wanted < n) break;  // may continue past the computed range
    mult.push_back(len);
    e += len;
  }
  int kept = 0;
  for (int len : mult) kept += len;
  if (kept == 0) throw ConvergenceError("solve_spectrum: no complete eigenvalue cluster; raise k", {});
  s.eigenvalues.resize(kept);
  s.eigenfunctions.resize(kept);
  s.multiplicities = mult;
  for (int c = 0; c < static_cast<int>(mult.size()); ++c)
    for (int l = 0; l < mult[c]; ++l) s.cluster_of.push_back(c);

  std::vector<double> history;
  for (int e = 0; e < kept; ++e) {
    const auto& y = s.eigenfunctions[e];
    const auto Ky = op.stiffness.apply(y);
    double r2 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double My = op.mass[i] * y[i];
      r2 += (Ky[i] - s.eigenvalues[e] * My) * (Ky[i] - s.eigenvalues[e] * My);
      m2 += My * My;
    }
    s.residuals.push_back(std::sqrt(r2 / m2));
  }
  const double worst = *std::max_element(s.residuals.begin(), s.residuals.end());
  if (!(worst <= 1e-8)) {
    std::ostringstream os;
    os << "solve_spectrum: eigen-residual " << worst << " exceeds 1e-8";
    throw ConvergenceError(os.str(), s.residuals);
  }

  if (weight_is_even(s.mass, s.kappa_faces)) {
    for (int c = 0; c < s.cluster_count(); ++c) s.parity.push_back(parity_analysis(s, s.cluster_start(c)));
  }
  return s;
}

double first_nonzero_eigenvalue(const AngularWeight& kappa, int n) {
  const Spectrum s = solve_spectrum(assemble_operator(kappa, CircleGrid(n)), 3);
  if (s.cluster_count() < 2) throw ConvergenceError("first_nonzero_eigenvalue: spectrum too short", {});
  return s.eigenvalues[s.cluster_start(1)];
}

RichardsonResult richardson_lambda1(const AngularWeight& kappa, std::span<const int> sizes) {
  if (sizes.size() < 2) throw InputError("richardson_lambda1: need at least two grid sizes");
  RichardsonResult r;
  for (int n : sizes) {
    r.sizes.push_back(n);
    r.values.push_back(first_nonzero_eigenvalue(kappa, n));
  }
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const double ratio = static_cast<double>(sizes[i + 1]) / sizes[i];
    const double q = ratio * ratio;
    r.extrapolated.push_back((q * r.values[i + 1] - r.values[i]) / (q - 1.0));
  }
  r.estimate = r.extrapolated.back();
  return r;
}

double rayleigh_quotient(std::span<const double> u, const CircleOperator& op) {
  if (static_cast<int>(u.size()) != op.stiffness.size())
    throw InputError("rayleigh_quotient: size mismatch");
  const auto Ku = op.stiffness.apply(u);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    num += u[i] * Ku[i];
    den += op.mass[i] * u[i] * u[i];
  }
  if (!(den > 0.0)) throw InputError("rayleigh_quotient: u has zero weighted norm");
  return num / den;
}

bool weight_is_even(std::span<const double> mass, std::span<const double> kappa_faces, double rtol) {
  const int n = static_cast<int>(mass.size());
  if (n % 2 != 0) return false;
  for (int coordinate = 1; coordinate <= 2; ++coordinate)
    for (int j = 0; j < n; ++j) {
      const double a = mass[j], b = mass[reflected_center(j, n, coordinate)];
      const double fa = kappa_faces[j], fb = kappa_faces[reflected_face(j, n, coordinate)];
      if (std::abs(a - b) > rtol * std::max(std::abs(a), std::abs(b))) return false;
      if (std::abs(fa - fb) > rtol * std::max(std::abs(fa), std::abs(fb))) return false;
    }
  return true;
}

std::vector<double> reflect(std::span<const double> u, int coordinate) {
  const int n = static_cast<int>(u.size());
  if (n % 2 != 0) throw InputError("reflect: grid must have an even number of cells");
  if (coordinate != 1 && coordinate != 2) throw InputError("reflect: coordinate must be 1 or 2");
  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) out[j] = u[reflected_center(j, n, coordinate)];
  return out;
}

std::vector<double> odd_sector_projection(std::span<const double> u, int coordinate) {
  const int other = coordinate == 1 ? 2 : 1;
  const auto Ro = reflect(u, other);
  std::vector<double> even_other(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) even_other[j] = 0.5 * (u[j] + Ro[j]);
  const auto Rc = reflect(even_other, coordinate);
  std::vector<double> out(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) out[j] = 0.5 * (even_other[j] - Rc[j]);
  return out;
}

ClusterParity parity_analysis(const Spectrum& spectrum, int eigen_index, double threshold) {
  if (eigen_index < 0 || eigen_index >= static_cast<int>(spectrum.eigenvalues.size()))
    throw InputError("parity_analysis: eigen_index out of range");
  if (!weight_is_even(spectrum.mass, spectrum.kappa_faces))
    throw PreconditionError("parity_analysis: weight is not even in every coordinate");
  const int cluster = spectrum.cluster_of[eigen_index];
  ClusterParity out;
  out.first = spectrum.cluster_start(cluster);
  out.size = spectrum.multiplicities[cluster];
  for (int coordinate = 1; coordinate <= 2; ++coordinate) {
    ParityEntry e;
    e.coordinate = coordinate;
    for (int l = 0; l < out.size; ++l) {
      const auto p = odd_sector_projection(spectrum.eigenfunctions[out.first + l], coordinate);
      e.projected_norm = std::max(e.projected_norm, m_norm(p, spectrum.mass));
    }
    e.odd_member = e.projected_norm > threshold;
    out.entries.push_back(e);
  }
  return out;
}

std::optional<std::vector<double>> odd_eigenfunction(const Spectrum& spectrum, int eigen_index,
                                                     int coordinate, double threshold) {
  const ClusterParity parity = parity_analysis(spectrum, eigen_index, threshold);
  std::vector<double> best;
  double best_norm = 0.0;
  for (int l = 0; l < parity.size; ++l) {
    auto p = odd_sector_projection(spectrum.eigenfunctions[parity.first + l], coordinate);
    const double nrm = m_norm(p, spectrum.mass);
    if (nrm > best_norm) {
      best_norm = nrm;
      best = std::move(p);
    }
  }
  if (!(best_norm > threshold)) return std::nullopt;
  const int n = spectrum.n;
  const CircleGrid grid(n);
  double orientation = 0.0;
  for (int j = 0; j < n; ++j) {
    const double xi = coordinate == 1 ? std::cos(grid.centers[j]) : std::sin(grid.centers[j]);
    orientation += xi * best[j];
  }
  const double s = (orientation < 0.0 ? -1.0 : 1.0) / best_norm;
  for (double& v : best) v *= s;
  return best;
}

PerturbedWeight perturbed_weight_b(const WeightSpec& spec, double eps0) {
  spec.validate();
  if (!spec.setA.empty()) throw UnsupportedError("perturbed_weight_b: requires A = {}");
  if (spec.d != 3) throw UnsupportedError("perturbed_weight_b: implemented for d = 3");
  if (!(eps0 > 0.0)) throw InputError("perturbed_weight_b: eps0 must be positive");
  for (int i = 0; i + 1 < spec.dim(); ++i)
    if (spec.kappa[i] < spec.kappa[i + 1])
      throw InputError("perturbed_weight_b: coordinates must be ordered kappa_i >= kappa_{i+1}");

  const double m = spec.m;
  const double k1 = spec.kappa[0];
  const double klast = spec.kappa[1];
  PerturbedWeight out;
  out.eps0 = eps0;
  out.b = [=](double theta) {
    const double x1 = std::cos(theta);
    const double rest = std::max(0.0, 1.0 - x1 * x1);
    const double bracket = k1 * std::pow(std::abs(x1), m) - (1.0 - std::pow(rest, m / 2.0)) * klast;
    return 2.0 * bracket / (eps0 * klast);
  };
  const int samples = 20000;
  for (int s = 0; s < samples; ++s) {
    const double t = kTwoPi * s / samples;
    const double b = out.b(t);
    out.sup_norm = std::max(out.sup_norm, std::abs(b));
    const double target = kappa_at_angle(spec, t) / klast;
    out.reconstruction_error = std::max(out.reconstruction_error, std::abs(1.0 + 0.5 * eps0 * b - target));
  }
  return out;
}

ContinuationReport property_O_continuation(const AngularWeight& b, std::span<const double> mu_values,
                                           int n) {
  if (mu_values.empty()) throw InputError("property_O_continuation: empty mu sweep");
  const CircleGrid grid(n);
  std::vector<double> mus(mu_values.begin(), mu_values.end());
  std::sort(mus.begin(), mus.end());

  ContinuationReport report;
  for (double mu : mus) {
    ContinuationEntry e;
    e.mu = mu;
    AngularWeight w = [&b, mu](double t) { return 1.0 + mu * b(t); };
    bool positive = true;
    for (int j = 0; j < n && positive; ++j)
      positive = w(grid.centers[j]) > 0.0 && w(grid.faces[j]) > 0.0;
    if (!positive) {
      e.skipped = true;
      e.note = "weight 1 + mu b is not positive";
      report.entries.push_back(e);
      continue;
    }
    const CircleOperator op = assemble_operator(w, grid);
    const Spectrum s = solve_spectrum(op, 4);
    if (s.cluster_count() < 2) {
      e.skipped = true;
      e.note = "spectrum too short";
      report.entries.push_back(e);
      continue;
    }
    if (!weight_is_even(s.mass, s.kappa_faces)) {
      e.skipped = true;
      e.note = "weight is not even; reflections do not commute with the operator";
      report.entries.push_back(e);
      continue;
    }
    const int first = s.cluster_start(1);
    e.lambda1 = s.eigenvalues[first];
    e.multiplicity = s.multiplicities[1];
    e.property_O = parity_analysis(s, first).property_O();
    report.entries.push_back(e);
  }

  report.holds_everywhere = std::all_of(report.entries.begin(), report.entries.end(),
                                        [](const ContinuationEntry& e) { return !e.skipped && e.property_O; });
  std::size_t center = 0;
  for (std::size_t i = 1; i < mus.size(); ++i)
    if (std::abs(mus[i]) < std::abs(mus[center])) center = i;
  auto ok = [&](std::size_t i) { return !report.entries[i].skipped && report.entries[i].property_O; };
  if (ok(center)) {
    std::size_t lo = center, hi = center;
    while (lo > 0 && ok(lo - 1)) --lo;
    while (hi + 1 < mus.size() && ok(hi + 1)) ++hi;
    report.interval = std::make_pair(mus[lo], mus[hi]);
  }
  return report;
}

}  // namespace gapgrad
