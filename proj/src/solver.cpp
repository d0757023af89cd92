#include "gapgrad/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gapgrad/error.hpp"
#include "gapgrad/exponents.hpp"
#include "gapgrad/parallel.hpp"
#include "gapgrad/quadrature.hpp"

namespace gapgrad {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int wrap(int j, int n) { return ((j % n) + n) % n; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Exact solver for the operator with delta replaced by kappa(theta) s(r).
class SeparableSolver {
 public:
  explicit SeparableSolver(const DiskSystem& sys) : grid_(sys.grid) {
    const PolarGrid& g = sys.grid;
    const int nr = g.n_r, nt = g.n_theta;
    const double dr = g.dr(), dt = g.dtheta();
    double kmin = sys.kappa_centers.front(), kmax = kmin;
    for (double k : sys.kappa_centers) kmin = std::min(kmin, k), kmax = std::max(kmax, k);
    for (double k : sys.kappa_faces) kmin = std::min(kmin, k), kmax = std::max(kmax, k);
    const double kmid = std::sqrt(kmin * kmax);
    auto s = [&](double r) { return std::pow(r, sys.m) + sys.eps / kmid; };

    t_.assign(nr + 1, 0.0);
    for (int i = 1; i < nr; ++i) {
      const double rf = i * dr;
      t_[i] = s(rf) * rf * dt / dr;
    }
    t_[nr] = s(g.R0) * g.R0 * dt / (0.5 * dr);
    a_.resize(nr);
    for (int i = 0; i < nr; ++i) a_[i] = s(g.radius(i)) * dr / (g.radius(i) * dt);

    // Angular pencil K~ y = mu M y with K~ the face-weighted cyclic stencil.
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nt, nt);
    Eigen::VectorXd isq(nt);
    for (int j = 0; j < nt; ++j) isq[j] = 1.0 / std::sqrt(sys.kappa_centers[j]);
    for (int j = 0; j < nt; ++j) {
      const int jn = wrap(j + 1, nt);
      const double k = sys.kappa_faces[jn];  // face between j and j+1
      C(j, j) += k * isq[j] * isq[j];
      C(jn, jn) += k * isq[jn] * isq[jn];
      C(j, jn) -= k * isq[j] * isq[jn];
      C(jn, j) -= k * isq[j] * isq[jn];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success) throw ConvergenceError("separable preconditioner: eigensolve failed", {});
    mu_ = eig.eigenvalues();
    for (int k = 0; k < nt; ++k) mu_[k] = std::max(0.0, mu_[k]);
    Y_ = isq.asDiagonal() * eig.eigenvectors();
  }

  void solve(std::span<const double> b, std::span<double> x) const {
    const int nr = grid_.n_r, nt = grid_.n_theta;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> B(b.data(), nr, nt);
    Eigen::MatrixXd Chat = B * Y_;  // column k: mode k across rings
    std::vector<double> cp(nr), dp(nr);
    for (int k = 0; k < nt; ++k) {
      // Thomas algorithm for (Rad + a mu_k) c = rhs.
      for (int i = 0; i < nr; ++i) {
        const double diag = t_[i] + t_[i + 1] + a_[i] * mu_[k];
        const double lower = i > 0 ? -t_[i] : 0.0;
        const double upper = i + 1 < nr ? -t_[i + 1] : 0.0;
        const double denom = diag - (i > 0 ? lower * cp[i - 1] : 0.0);
        cp[i] = upper / denom;
        dp[i] = (Chat(i, k) - (i > 0 ? lower * dp[i - 1] : 0.0)) / denom;
      }
      Chat(nr - 1, k) = dp[nr - 1];
      for (int i = nr - 2; i >= 0; --i) Chat(i, k) = dp[i] - cp[i] * Chat(i + 1, k);
    }
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(x.data(), nr, nt);
    X.noalias() = Chat * Y_.transpose();
  }

 private:
  PolarGrid grid_;
  std::vector<double> t_;
  std::vector<double> a_;
  Eigen::VectorXd mu_;
  Eigen::MatrixXd Y_;
};

// Cubic Lagrange through the four nodes nearest to x.
double lagrange4(const double* xs, const double* ys, double x) {
  double s = 0.0;
  for (int a = 0; a < 4; ++a) {
    double l = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a) l *= (x - xs[b]) / (xs[a] - xs[b]);
    s += l * ys[a];
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

void PolarGrid::validate() const {
  if (n_r < 32 || n_theta < 32) throw InputError("PolarGrid: n_r and n_theta must be at least 32");
  if (n_theta % 2 != 0) throw InputError("PolarGrid: n_theta must be even");
  if (!(R0 > 0.0)) throw InputError("PolarGrid: R0 must be positive");
}

double PolarGrid::dtheta() const { return kTwoPi / n_theta; }

FaceFlux sample_face_flux(const PolarGrid& grid, const VectorField& F) {
  grid.validate();
  const int nr = grid.n_r, nt = grid.n_theta;
  FaceFlux out;
  out.radial.assign(static_cast<std::size_t>(nr + 1) * nt, 0.0);
  out.angular.assign(static_cast<std::size_t>(nr) * nt, 0.0);
  for (int i = 0; i <= nr; ++i) {
    const double r = i * grid.dr();
    for (int j = 0; j < nt; ++j) {
      const double t = grid.theta(j);
      const auto f = F(r * std::cos(t), r * std::sin(t));
      out.radial[static_cast<std::size_t>(i) * nt + j] = f[0] * std::cos(t) + f[1] * std::sin(t);
    }
  }
  for (int i = 0; i < nr; ++i) {
    const double r = grid.radius(i);
    for (int j = 0; j < nt; ++j) {
      const double t = grid.face_theta(j);
      const auto f = F(r * std::cos(t), r * std::sin(t));
      out.angular[static_cast<std::size_t>(i) * nt + j] = -f[0] * std::sin(t) + f[1] * std::cos(t);
    }
  }
  return out;
}

std::vector<double> sample_boundary(const PolarGrid& grid, const std::function<double(double)>& g) {
  std::vector<double> out(grid.n_theta);
  for (int j = 0; j < grid.n_theta; ++j) out[j] = g(grid.theta(j));
  return out;
}

DiskSystem assemble_disk_system(const AngularWeight& kappa, double m, double eps, const PolarGrid& grid,
                                const FaceFlux& F, std::span<const double> g) {
  grid.validate();
  if (!(eps >= 0.0)) throw InputError("assemble_disk_system: eps must be nonnegative");
  if (!(m >= 2.0)) throw InputError("assemble_disk_system: m must be at least 2");
  const int nr = grid.n_r, nt = grid.n_theta;
  if (static_cast<int>(g.size()) != nt) throw InputError("assemble_disk_system: boundary data size mismatch");
  if (!F.radial.empty() && F.radial.size() != static_cast<std::size_t>(nr + 1) * nt)
    throw InputError("assemble_disk_system: radial flux size mismatch");
  if (!F.angular.empty() && F.angular.size() != static_cast<std::size_t>(nr) * nt)
    throw InputError("assemble_disk_system: angular flux size mismatch");

  const double dr = grid.dr(), dt = grid.dtheta();
  DiskSystem sys;
  sys.grid = grid;
  sys.eps = eps;
  sys.m = m;
  sys.boundary.assign(g.begin(), g.end());
  sys.kappa_centers.resize(nt);
  sys.kappa_faces.resize(nt);
  for (int j = 0; j < nt; ++j) {
    sys.kappa_centers[j] = kappa(grid.theta(j));
    sys.kappa_faces[j] = kappa(grid.face_theta(j));
    if (!(sys.kappa_centers[j] > 0.0) || !(sys.kappa_faces[j] > 0.0))
      throw InputError("assemble_disk_system: weight must be positive");
  }

  sys.trans_radial.assign(static_cast<std::size_t>(nr + 1) * nt, 0.0);
  sys.trans_angular.assign(static_cast<std::size_t>(nr) * nt, 0.0);
  sys.min_face_delta = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= nr; ++i) {
    const double rf = i * dr;
    const double spacing = i == nr ? 0.5 * dr : dr;
    for (int j = 0; j < nt; ++j) {
      const double d = eps + sys.kappa_centers[j] * std::pow(rf, m);
      sys.min_face_delta = std::min(sys.min_face_delta, d);
      sys.trans_radial[static_cast<std::size_t>(i) * nt + j] = d * rf * dt / spacing;
    }
  }
  for (int i = 0; i < nr; ++i) {
    const double r = grid.radius(i);
    for (int j = 0; j < nt; ++j) {
      const double d = eps + sys.kappa_faces[j] * std::pow(r, m);
      sys.min_face_delta = std::min(sys.min_face_delta, d);
      sys.trans_angular[static_cast<std::size_t>(i) * nt + j] = d * dr / (r * dt);
    }
  }

  sys.diag.assign(grid.size(), 0.0);
  sys.rhs.assign(grid.size(), 0.0);
  sys.div_flux.assign(grid.size(), 0.0);
  for (int i = 0; i < nr; ++i) {
    const double r_in = i * dr, r_out = (i + 1) * dr;
    for (int j = 0; j < nt; ++j) {
      const int c = grid.index(i, j);
      const std::size_t fin = static_cast<std::size_t>(i) * nt + j;
      const std::size_t fout = static_cast<std::size_t>(i + 1) * nt + j;
      const std::size_t fa = static_cast<std::size_t>(i) * nt + j;
      const std::size_t fb = static_cast<std::size_t>(i) * nt + wrap(j + 1, nt);
      sys.diag[c] = sys.trans_radial[fin] + sys.trans_radial[fout] + sys.trans_angular[fa] +
                    sys.trans_angular[fb];
      double flux = 0.0;
      if (!F.radial.empty()) flux += F.radial[fout] * r_out * dt - F.radial[fin] * r_in * dt;
      if (!F.angular.empty()) flux += (F.angular[fb] - F.angular[fa]) * dr;
      sys.div_flux[c] = flux;
      sys.rhs[c] = -flux;
      if (i == nr - 1) sys.rhs[c] += sys.trans_radial[fout] * g[j];
    }
  }
  return sys;
}

DiskSystem assemble_disk_system(const WeightSpec& spec, double eps, const PolarGrid& grid, const FaceFlux& F,
                                std::span<const double> g) {
  return assemble_disk_system(angular_weight(spec), spec.m, eps, grid, F, g);
}

std::vector<double> DiskSystem::apply(std::span<const double> v) const {
  const int nr = grid.n_r, nt = grid.n_theta;
  if (static_cast<int>(v.size()) != grid.size()) throw InputError("DiskSystem::apply: size mismatch");
  std::vector<double> out(v.size());
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nt; ++j) {
      const int c = i * nt + j;
      double s = diag[c] * v[c];
      if (i > 0) s -= trans_radial[static_cast<std::size_t>(i) * nt + j] * v[c - nt];
      if (i + 1 < nr) s -= trans_radial[static_cast<std::size_t>(i + 1) * nt + j] * v[c + nt];
      s -= trans_angular[static_cast<std::size_t>(i) * nt + j] * v[i * nt + wrap(j - 1, nt)];
      s -= trans_angular[static_cast<std::size_t>(i) * nt + wrap(j + 1, nt)] * v[i * nt + wrap(j + 1, nt)];
      out[c] = s;
    }
  }
  return out;
}

std::vector<MatrixEntry> DiskSystem::entries() const {
  const int nr = grid.n_r, nt = grid.n_theta;
  std::vector<MatrixEntry> out;
  out.reserve(static_cast<std::size_t>(grid.size()) * 5);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      const int c = i * nt + j;
      out.push_back({c, c, diag[c]});
      if (i > 0) out.push_back({c, c - nt, -trans_radial[static_cast<std::size_t>(i) * nt + j]});
      if (i + 1 < nr) out.push_back({c, c + nt, -trans_radial[static_cast<std::size_t>(i + 1) * nt + j]});
      out.push_back({c, i * nt + wrap(j - 1, nt), -trans_angular[static_cast<std::size_t>(i) * nt + j]});
      out.push_back({c, i * nt + wrap(j + 1, nt),
                     -trans_angular[static_cast<std::size_t>(i) * nt + wrap(j + 1, nt)]});
    }
  return out;
}

// ---------------------------------------------------------------------------

DiskField solve_disk(const DiskSystem& system, const SolveOptions& options) {
  const int n = system.grid.size();
  DiskField field;
  field.grid = system.grid;
  field.eps = system.eps;
  field.boundary = system.boundary;
  field.kappa_centers = system.kappa_centers;

  std::vector<double> x(n, 0.0);
  if (!options.initial_guess.empty()) {
    if (static_cast<int>(options.initial_guess.size()) != n)
      throw InputError("solve_disk: initial guess size mismatch");
    x = options.initial_guess;
  }
  const double bnorm = std::sqrt(dot(system.rhs, system.rhs));
  if (bnorm == 0.0) {
    field.values.assign(n, 0.0);
    return field;
  }

  std::optional<SeparableSolver> separable;
  if (options.preconditioner == Preconditioner::separable) separable.emplace(system);
  auto precondition = [&](std::span<const double> r, std::span<double> z) {
    if (separable) {
      separable->solve(r, z);
    } else {
      for (int i = 0; i < n; ++i) z[i] = r[i] / system.diag[i];
    }
  };

  std::vector<double> r(n), z(n), p(n);
  {
    const auto Ax = system.apply(x);
    for (int i = 0; i < n; ++i) r[i] = system.rhs[i] - Ax[i];
  }
  std::vector<double> history;
  double rel = std::sqrt(dot(r, r)) / bnorm;
  history.push_back(rel);
  int it = 0;
  if (rel > options.tol) {
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    while (it < options.max_iter) {
      ++it;
      const auto Ap = system.apply(p);
      const double pAp = dot(p, Ap);
      if (!(pAp > 0.0)) break;
      const double a = rz / pAp;
      for (int i = 0; i < n; ++i) {
        x[i] += a * p[i];
        r[i] -= a * Ap[i];
      }
      // Periodic true-residual refresh keeps the recursion honest on ill-conditioned systems.
      if (it % 50 == 0) {
        const auto Ax = system.apply(x);
        for (int i = 0; i < n; ++i) r[i] = system.rhs[i] - Ax[i];
      }
      rel = std::sqrt(dot(r, r)) / bnorm;
      history.push_back(rel);
      if (rel <= options.tol) break;
      precondition(r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }
  // Report the true residual.
  {
    const auto Ax = system.apply(x);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (system.rhs[i] - Ax[i]) * (system.rhs[i] - Ax[i]);
    rel = std::sqrt(s) / bnorm;
  }
  if (!(rel <= options.tol)) {
    std::ostringstream os;
    os << "solve_disk: relative residual " << rel << " above " << options.tol << " after " << it
       << " iterations";
    throw ConvergenceError(os.str(), history);
  }
  field.values = std::move(x);
  field.solve_residual = rel;
  field.iterations = it;
  return field;
}

DiskField sample_field(const PolarGrid& grid, const std::function<double(double, double)>& f,
                       std::vector<double> boundary) {
  grid.validate();
  DiskField field;
  field.grid = grid;
  field.values.resize(grid.size());
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j) field.values[grid.index(i, j)] = f(grid.radius(i), grid.theta(j));
  if (boundary.empty()) boundary.assign(grid.n_theta, 0.0);
  if (static_cast<int>(boundary.size()) != grid.n_theta) throw InputError("sample_field: boundary size mismatch");
  field.boundary = std::move(boundary);
  field.kappa_centers.assign(grid.n_theta, 1.0);
  return field;
}

double DiskField::on_circle(double rho, int j) const {
  const int nr = grid.n_r, nt = grid.n_theta;
  if (!(rho > 0.0) || rho > grid.R0) throw DomainError("DiskField::on_circle: radius outside the grid");
  const double dr = grid.dr();
  const int jo = wrap(j + nt / 2, nt);
  // Extended ray: two mirrored cells across the origin, the cells, then the boundary.
  auto node_r = [&](int k) {
    if (k == 0) return -grid.radius(1);
    if (k == 1) return -grid.radius(0);
    if (k == nr + 2) return grid.R0;
    return grid.radius(k - 2);
  };
  auto node_v = [&](int k) {
    if (k == 0) return at(1, jo);
    if (k == 1) return at(0, jo);
    if (k == nr + 2) return boundary[j];
    return at(k - 2, j);
  };
  // Index of the last node at or below rho.
  int k = static_cast<int>(std::floor(rho / dr - 0.5)) + 2;
  k = std::clamp(k, 1, nr + 1);
  const int start = std::clamp(k - 1, 0, nr + 2 - 3);
  double xs[4], ys[4];
  for (int a = 0; a < 4; ++a) {
    xs[a] = node_r(start + a);
    ys[a] = node_v(start + a);
  }
  return lagrange4(xs, ys, rho);
}

std::vector<double> gradient_magnitude(const DiskField& field) {
  const PolarGrid& g = field.grid;
  const int nr = g.n_r, nt = g.n_theta;
  const double dr = g.dr(), dt = g.dtheta();
  std::vector<double> out(g.size());
  for (int i = 0; i < nr; ++i) {
    const double r = g.radius(i);
    for (int j = 0; j < nt; ++j) {
      double dv_dr;
      if (i == nr - 1) {
        const double h1 = dr, h2 = 0.5 * dr;
        const double vm = i > 0 ? field.at(i - 1, j) : field.at(0, wrap(j + nt / 2, nt));
        dv_dr = -h2 / (h1 * (h1 + h2)) * vm + (h2 - h1) / (h1 * h2) * field.at(i, j) +
                h1 / (h2 * (h1 + h2)) * field.boundary[j];
      } else {
        const double vm = i > 0 ? field.at(i - 1, j) : field.at(0, wrap(j + nt / 2, nt));
        dv_dr = (field.at(i + 1, j) - vm) / (2.0 * dr);
      }
      const double dv_dt = (field.at(i, wrap(j + 1, nt)) - field.at(i, wrap(j - 1, nt))) / (2.0 * dt * r);
      out[g.index(i, j)] = std::hypot(dv_dr, dv_dt);
    }
  }
  return out;
}

double center_value(const DiskField& field) {
  double num = 0.0, den = 0.0;
  for (int j = 0; j < field.grid.n_theta; ++j) {
    const double k = field.kappa_centers.empty() ? 1.0 : field.kappa_centers[j];
    num += k * field.at(0, j);
    den += k;
  }
  return num / den;
}

DecayProfile omega_profile(const DiskField& field, std::span<const double> rho_list, const OmegaOptions& options) {
  const PolarGrid& g = field.grid;
  const int nt = g.n_theta;
  auto kap = [&](int j) { return field.kappa_centers.empty() ? 1.0 : field.kappa_centers[j]; };
  DecayProfile out;
  for (std::size_t q = 0; q < rho_list.size(); ++q) {
    const double rho = rho_list[q];
    if (q > 0 && !(rho > rho_list[q - 1])) throw InputError("omega_profile: rho must be strictly increasing");
    if (!(rho > 0.0) || rho >= g.R0) throw DomainError("omega_profile: rho outside the grid");
    double omega2 = 0.0;
    if (options.form == OmegaForm::circle) {
      const double ref = options.center_value ? *options.center_value : center_value(field);
      for (int j = 0; j < nt; ++j) {
        const double v = field.on_circle(rho, j) - ref;
        omega2 += kap(j) * v * v;
      }
      omega2 /= nt;
    } else {
      const double lo = (1.0 - options.cbar0) * rho, hi = (1.0 + options.cbar0) * rho;
      if (!(options.cbar0 > 0.0) || hi > g.R0) throw DomainError("omega_profile: annulus outside the grid");
      const GaussRule& rule = gauss_legendre(8);
      std::vector<double> rs, ws;
      for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
        const double r = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[a];
        rs.push_back(r);
        ws.push_back(0.5 * (hi - lo) * rule.weights[a] * r);
      }
      double mass = 0.0, mean = 0.0;
      std::vector<double> vals(rs.size() * nt);
      for (std::size_t a = 0; a < rs.size(); ++a)
        for (int j = 0; j < nt; ++j) {
          const double v = field.on_circle(rs[a], j);
          vals[a * nt + j] = v;
          mean += ws[a] * kap(j) * v;
          mass += ws[a] * kap(j);
        }
      mean /= mass;
      double area = 0.0;
      for (std::size_t a = 0; a < rs.size(); ++a)
        for (int j = 0; j < nt; ++j) {
          const double v = vals[a * nt + j] - mean;
          omega2 += ws[a] * kap(j) * v * v;
          area += ws[a];
        }
      omega2 /= area * nt;
    }
    out.rho.push_back(rho);
    out.omega.push_back(std::sqrt(omega2));
  }
  return out;
}

RateFit verify_oscillation_decay(const DecayProfile& profile, double predicted_alpha) {
  if (profile.rho.size() != profile.omega.size()) throw InputError("verify_oscillation_decay: length mismatch");
  if (profile.rho.size() < 4) throw InputError("verify_oscillation_decay: need at least 4 points");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < profile.rho.size(); ++i) {
    if (!(profile.omega[i] > 0.0)) throw DomainError("verify_oscillation_decay: omega must be positive");
    pts.emplace_back(profile.rho[i], profile.omega[i]);
  }
  return fit_loglog(pts, predicted_alpha);
}

// ---------------------------------------------------------------------------

MoserReport moser_sup_check(const AngularWeight& kappa, double m, double eps, double sigma,
                            std::span<const int> n_r_levels, const VectorField& F, double tolerance,
                            int n_theta) {
  if (!(1.0 + sigma > 0.0)) throw PreconditionError("moser_sup_check: need 1 + sigma > 0");
  if (n_r_levels.empty()) throw InputError("moser_sup_check: no refinement levels");
  MoserReport report;
  report.tolerance = tolerance;
  report.levels.resize(n_r_levels.size());
  parallel_for(n_r_levels.size(), [&](std::size_t l) {
    const PolarGrid grid{n_r_levels[l], n_theta > 0 ? n_theta : n_r_levels[l], 1.0};
    grid.validate();
    std::vector<FieldSample> samples;
    samples.reserve(grid.size());
    for (int i = 0; i < grid.n_r; ++i)
      for (int j = 0; j < grid.n_theta; ++j) {
        const double r = grid.radius(i), t = grid.theta(j);
        const auto f = F(r * std::cos(t), r * std::sin(t));
        samples.push_back({{r * std::cos(t), r * std::sin(t)}, {f[0], f[1]}});
      }
    MoserLevel level;
    level.n_r = grid.n_r;
    level.F_norm = weighted_norm(samples, NormSpec{eps, sigma, 0.0}, m);
    if (level.F_norm > 0.0) {
      const double scale = 1.0 / level.F_norm;
      const VectorField unit = [&F, scale](double x, double y) {
        auto f = F(x, y);
        return std::array<double, 2>{f[0] * scale, f[1] * scale};
      };
      const std::vector<double> zero(grid.n_theta, 0.0);
      const DiskSystem sys = assemble_disk_system(kappa, m, eps, grid, sample_face_flux(grid, unit), zero);
      const DiskField v = solve_disk(sys);
      for (double x : v.values) level.sup_v = std::max(level.sup_v, std::abs(x));
      level.ratio = level.sup_v;
    }
    report.levels[l] = level;
  });
  report.stable = true;
  for (std::size_t l = 1; l < report.levels.size(); ++l) {
    const double a = report.levels[l - 1].ratio, b = report.levels[l].ratio;
    const double change = std::max(a, b) > 0.0 ? std::abs(b - a) / std::max(std::abs(a), std::abs(b)) : 0.0;
    report.max_relative_change = std::max(report.max_relative_change, change);
    if (change > tolerance) report.stable = false;
  }
  return report;
}

SweepResult gradient_rate_sweep(const AngularWeight& kappa, double m, const std::function<double(double)>& g,
                                std::span<const double> eps_list, double predicted_exponent,
                                const SweepOptions& options) {
  if (eps_list.size() < 5) throw InputError("gradient_rate_sweep: need at least 5 eps values");
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (!(eps_list[k] > 0.0)) throw InputError("gradient_rate_sweep: eps values must be positive");
    if (k > 0 && !(eps_list[k] < eps_list[k - 1]) && !(eps_list[k] > eps_list[k - 1]))
      throw InputError("gradient_rate_sweep: eps values must be distinct");
  }
  const PolarGrid& grid = options.grid;
  grid.validate();
  for (double eps : eps_list) {
    const double probe = options.probe_radius * std::pow(eps, 1.0 / m);
    const int cells = static_cast<int>(std::floor(probe / grid.dr()));
    if (cells < options.min_probe_cells) {
      std::ostringstream os;
      os << "gradient_rate_sweep: grid too coarse at eps = " << eps << " (" << cells
         << " radial cells inside the probe disk; need " << options.min_probe_cells << "); refine n_r";
      throw InputError(os.str());
    }
  }
  const std::vector<double> boundary = sample_boundary(grid, g);

  SweepResult result;
  result.points.resize(eps_list.size());
  parallel_for(eps_list.size(), [&](std::size_t k) {
    const double eps = eps_list[k];
    SweepPoint pt;
    pt.eps = eps;
    pt.probe_radius = options.probe_radius * std::pow(eps, 1.0 / m);
    pt.probe_cells = static_cast<int>(std::floor(pt.probe_radius / grid.dr()));
    pt.asymptotic = pt.probe_radius <= 0.5 * grid.R0;
    SolveOptions so;
    so.tol = options.tol;
    const DiskField v = solve_disk(assemble_disk_system(kappa, m, eps, grid, FaceFlux{}, boundary), so);
    pt.iterations = v.iterations;
    const auto grad = gradient_magnitude(v);
    for (int i = 0; i < grid.n_r && grid.radius(i) <= pt.probe_radius; ++i)
      for (int j = 0; j < grid.n_theta; ++j) pt.max_gradient = std::max(pt.max_gradient, grad[grid.index(i, j)]);
    result.points[k] = pt;
  });
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : result.points) {
    pts.emplace_back(p.eps, p.max_gradient);
    result.all_asymptotic = result.all_asymptotic && p.asymptotic;
  }
  result.fit = fit_loglog(pts, predicted_exponent);
  return result;
}

LowerBoundResult lower_bound_experiment(const WeightSpec& spec, const PolarGrid& grid,
                                        const LowerBoundOptions& options) {
  grid.validate();
  if (options.j0 != 1 && options.j0 != 2) throw InputError("lower_bound_experiment: j0 must be 1 or 2");
  if (!(options.gamma > 0.0 && options.gamma < 1.0))
    throw InputError("lower_bound_experiment: gamma must lie in (0, 1)");
  const AngularWeight kappa = angular_weight(spec);
  const double m = spec.m;
  const int nt = grid.n_theta;

  const Spectrum spectrum = solve_spectrum(assemble_operator(kappa, CircleGrid(nt)), 4);
  if (spectrum.parity.empty())
    throw PreconditionError("lower_bound_experiment: weight is not even in every coordinate");
  if (spectrum.cluster_count() < 2) throw ConvergenceError("lower_bound_experiment: spectrum too short", {});
  const int first = spectrum.cluster_start(1);
  const ClusterParity parity = parity_analysis(spectrum, first);
  if (!parity.property_O()) throw PreconditionError("lower_bound_experiment: property O fails at lambda_1");
  const auto Y = odd_eigenfunction(spectrum, first, options.j0);
  if (!Y)
    throw PreconditionError("lower_bound_experiment: the lambda_1 eigenspace has no member odd in the chosen coordinate");

  LowerBoundResult result;
  result.lambda1 = spectrum.eigenvalues[first];
  result.alpha = alpha_of_lambda(result.lambda1, 3, m);

  std::function<double(double)> g = options.boundary;
  if (!g) g = [j0 = options.j0](double t) { return j0 == 1 ? std::cos(t) : std::sin(t); };
  const std::vector<double> boundary = sample_boundary(grid, g);
  double gnorm2 = 0.0;
  for (int j = 0; j < nt; ++j) {
    result.boundary_projection += spectrum.mass[j] * boundary[j] * (*Y)[j];
    gnorm2 += spectrum.mass[j] * boundary[j] * boundary[j];
  }
  result.boundary_projection /= nt;
  gnorm2 /= nt;
  if (std::abs(result.boundary_projection) <= 1e-8 * std::max(1.0, std::sqrt(gnorm2))) {
    result.degenerate = true;
    result.note = "boundary data has no component on the odd lambda_1 eigenfunction";
    return result;
  }

  FaceFlux F;
  if (options.forcing != 0.0) {
    F.radial.assign(static_cast<std::size_t>(grid.n_r + 1) * nt, 0.0);
    const double power = m - 1.0 + result.alpha + options.gamma;
    for (int i = 1; i <= grid.n_r; ++i) {
      const double rf = i * grid.dr();
      for (int j = 0; j < nt; ++j)
        F.radial[static_cast<std::size_t>(i) * nt + j] =
            options.forcing * std::pow(rf, power) * spectrum.mass[j] * (*Y)[j];
    }
  }
  SolveOptions so;
  so.tol = options.tol;
  const DiskField v = solve_disk(assemble_disk_system(kappa, m, 0.0, grid, F, boundary), so);

  const int npts = options.fit_points;
  if (npts < 8) throw InputError("lower_bound_experiment: need at least 8 fit radii");
  const double lo = std::log(options.fit_r_min), hi = std::log(options.fit_r_max);
  for (int q = 0; q < npts; ++q) {
    const double r = std::exp(lo + (hi - lo) * q / (npts - 1));
    double u = 0.0;
    for (int j = 0; j < nt; ++j) u += spectrum.mass[j] * v.on_circle(r, j) * (*Y)[j];
    result.r.push_back(r);
    result.U.push_back(u / nt);
  }
  result.fit = fit_leading_coefficient(result.r, result.U, result.alpha, options.gamma);
  return result;
}

// ---------------------------------------------------------------------------

RatioReport hardy_trace_ratio(const DiskField& w, double beta, double m) {
  if (!(beta < 1.0)) throw PreconditionError("hardy_trace_ratio: need beta < 1");
  for (double b : w.boundary)
    if (std::abs(b) > 1e-14) throw PreconditionError("hardy_trace_ratio: w must vanish on the outer circle");
  const PolarGrid& g = w.grid;
  const int nt = g.n_theta;
  RatioReport out;
  for (int i = 0; i < g.n_r; ++i) {
    double avg = 0.0;
    for (int j = 0; j < nt; ++j) avg += w.at(i, j) * w.at(i, j);
    out.lhs = std::max(out.lhs, std::pow(g.radius(i), m + 1.0) * avg / nt);
  }
  const auto grad = gradient_magnitude(w);
  for (int i = 0; i < g.n_r; ++i) {
    const double r = g.radius(i);
    const double weight = std::pow(r, m + beta) * r * g.dr() * g.dtheta();
    for (int j = 0; j < nt; ++j) out.rhs += weight * grad[g.index(i, j)] * grad[g.index(i, j)];
  }
  if (out.rhs == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.ratio = out.lhs / out.rhs;
  return out;
}

RatioReport ckn_ratio(const DiskField& u, double m) {
  for (double b : u.boundary)
    if (std::abs(b) > 1e-14) throw PreconditionError("ckn_ratio: u must vanish on the outer circle");
  const PolarGrid& g = u.grid;
  const double p = 2.0 * (m + 2.0) / m;
  const auto grad = gradient_magnitude(u);
  RatioReport out;
  double lp = 0.0, l2 = 0.0;
  for (int i = 0; i < g.n_r; ++i) {
    const double r = g.radius(i);
    const double weight = std::pow(r, m) * r * g.dr() * g.dtheta();
    for (int j = 0; j < g.n_theta; ++j) {
      const int c = g.index(i, j);
      lp += weight * std::pow(std::abs(u.values[c]), p);
      l2 += weight * grad[c] * grad[c];
    }
  }
  out.lhs = std::pow(lp, 1.0 / p);
  out.rhs = std::sqrt(l2);
  if (out.rhs == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.ratio = out.lhs / out.rhs;
  return out;
}

}  // namespace gapgrad
