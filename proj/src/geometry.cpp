#include "gapgrad/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "gapgrad/error.hpp"
#include "gapgrad/regression.hpp"

namespace gapgrad {

namespace {

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// kappa0 (sum_A kappa_i x_i^2)^{m/2} + sum_B kappa_j |x_j|^m, homogeneous of degree m.
double homogeneous_profile(const WeightSpec& spec, std::span<const double> x) {
  double quad = 0.0;
  for (int i : spec.setA) quad += spec.kappa[i - 1] * x[i - 1] * x[i - 1];
  double value = spec.setA.empty() ? 0.0 : spec.kappa0 * std::pow(quad, 0.5 * spec.m);
  for (int j : spec.setB) value += spec.kappa[j - 1] * std::pow(std::abs(x[j - 1]), spec.m);
  return value;
}

void require_dim(const WeightSpec& spec, std::span<const double> x, const char* what) {
  if (static_cast<int>(x.size()) != spec.dim()) {
    std::ostringstream os;
    os << what << ": expected a point in R^" << spec.dim() << ", got " << x.size()
       << " coordinates";
    throw InputError(os.str());
  }
}

// 1 - (1 - u)^{1/m} without cancellation for small u.
double one_minus_root(double u, double m) { return -std::expm1(std::log1p(-u) / m); }

}  // namespace

void WeightSpec::validate() const {
  if (d < 3) throw InputError("WeightSpec: d must be >= 3");
  if (!(m >= 2.0) || !std::isfinite(m)) throw InputError("WeightSpec: m must be >= 2");
  if (!(kappa0 > 0.0)) throw InputError("WeightSpec: kappa0 must be positive");
  if (static_cast<int>(kappa.size()) != d - 1)
    throw InputError("WeightSpec: kappa must have d-1 entries");
  for (double k : kappa)
    if (!(k > 0.0) || !std::isfinite(k)) throw InputError("WeightSpec: kappa entries must be positive");
  std::set<int> seen;
  for (const auto* set : {&setA, &setB}) {
    for (int i : *set) {
      if (i < 1 || i > d - 1) throw InputError("WeightSpec: index sets must lie in {1..d-1}");
      if (!seen.insert(i).second) throw InputError("WeightSpec: setA and setB must be disjoint");
    }
  }
  if (static_cast<int>(seen.size()) != d - 1)
    throw InputError("WeightSpec: setA and setB must cover {1..d-1}");
}

WeightSpec WeightSpec::power_sum(int d, double m, double value) {
  WeightSpec spec;
  spec.d = d;
  spec.m = m;
  spec.kappa.assign(d - 1, value);
  for (int i = 1; i <= d - 1; ++i) spec.setB.push_back(i);
  return spec;
}

WeightSpec WeightSpec::radial(int d, double m, double kappa0, double value) {
  WeightSpec spec;
  spec.d = d;
  spec.m = m;
  spec.kappa0 = kappa0;
  spec.kappa.assign(d - 1, value);
  for (int i = 1; i <= d - 1; ++i) spec.setA.push_back(i);
  return spec;
}

double kappa_weight(const WeightSpec& spec, std::span<const double> xi) {
  require_dim(spec, xi, "kappa_weight");
  if (std::abs(norm2(xi) - 1.0) > 1e-12) throw InputError("kappa_weight: xi must be a unit vector");
  return homogeneous_profile(spec, xi);
}

double kappa_at_angle(const WeightSpec& spec, double theta) {
  if (spec.d != 3) throw UnsupportedError("kappa_at_angle: only d = 3 has an angle parametrization");
  const double xi[2] = {std::cos(theta), std::sin(theta)};
  return homogeneous_profile(spec, xi);
}

DerivedConstants derived_constants(const WeightSpec& spec) {
  spec.validate();
  const double m = spec.m;
  double sumA2 = 0.0, sumA4 = 0.0, minA = std::numeric_limits<double>::infinity();
  for (int i : spec.setA) {
    const double k = spec.kappa[i - 1];
    sumA2 += k * k;
    sumA4 += k * k * k * k;
    minA = std::min(minA, std::pow(k, m / 2.0));
  }
  double sumB2 = 0.0, sumB4 = 0.0, minB = std::numeric_limits<double>::infinity();
  for (int j : spec.setB) {
    const double k = spec.kappa[j - 1];
    sumB2 += k * k;
    sumB4 += k * k * k * k;
    minB = std::min(minB, k);
  }
  const bool hasA = !spec.setA.empty();
  const double k0 = spec.kappa0;

  DerivedConstants c;
  c.theta1 = std::sqrt((hasA ? k0 * k0 * std::pow(sumA2, m / 2.0) : 0.0) + sumB2);
  c.theta2 = std::pow((hasA ? std::pow(k0, 4) * sumA4 * std::pow(sumA2, m - 2.0) : 0.0) + sumB4, 0.25);

  const double b = static_cast<double>(spec.setB.size());
  const double coef_min = std::min(hasA ? k0 * minA : std::numeric_limits<double>::infinity(), minB);
  const double lower = std::pow(2.0, -(m - 2.0) / 2.0) *
                       std::min(std::pow(2.0, -(m - 2.0) * (b - 1.0) / 2.0), 1.0) * coef_min;
  // The printed exponent "1/m-1" is read as (1/m) - 1, so that
  // theta3^{-m/(m-1)} gives back `lower`.
  c.theta3 = std::pow(lower, 1.0 / m - 1.0);
  c.varrho = std::pow(c.theta3, -m / (m - 1.0));

  c.c0 = std::min(1.0 / (4.0 * std::pow(1.0 + c.theta1, 1.0 / m)),
                  1.0 / (std::pow(2.0, m) * m * std::max(c.theta2, 1.0) * std::max(c.theta3, 1.0)));
  c.cbar0 = 2.0 * c.c0 * std::pow(1.0 + c.theta1, 1.0 / m);
  return c;
}

double delta(const WeightSpec& spec, double eps, std::span<const double> x) {
  require_dim(spec, x, "delta");
  return eps + homogeneous_profile(spec, x);
}

Point delta_gradient(const WeightSpec& spec, std::span<const double> x) {
  require_dim(spec, x, "delta_gradient");
  Point g(x.size(), 0.0);
  const double m = spec.m;
  if (!spec.setA.empty()) {
    double quad = 0.0;
    for (int i : spec.setA) quad += spec.kappa[i - 1] * x[i - 1] * x[i - 1];
    if (quad > 0.0) {
      const double scale = m * spec.kappa0 * std::pow(quad, m / 2.0 - 1.0);
      for (int i : spec.setA) g[i - 1] = scale * spec.kappa[i - 1] * x[i - 1];
    }
  }
  for (int j : spec.setB) {
    const double xj = x[j - 1];
    if (xj != 0.0) g[j - 1] = m * spec.kappa[j - 1] * std::pow(std::abs(xj), m - 2.0) * xj;
  }
  return g;
}

// ---------------------------------------------------------------------------

void CubeSpec::validate() const {
  if (!(r1 > 0.0) || !(r2 > 0.0)) throw InputError("CubeSpec: radii must be positive");
  if (!(m >= 2.0)) throw InputError("CubeSpec: m must be >= 2");
}

CubeProfile cube_profile(const CubeSpec& cube, int dim) {
  cube.validate();
  if (dim < 2) throw InputError("cube_profile: horizontal dimension must be >= 2");
  const double m = cube.m;
  auto power_sum = [m](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += std::pow(std::abs(v), m);
    return s;
  };
  auto lower_branch = [m, power_sum](double r, std::span<const double> x) {
    const double u = power_sum(x) / std::pow(r, m);
    if (u > 1.0) throw DomainError("cube_profile: point lies outside the cube's horizontal extent");
    return r * one_minus_root(u, m);
  };

  CubeProfile p;
  p.kappabar = (std::pow(cube.r1, 1.0 - m) + std::pow(cube.r2, 1.0 - m)) / m;
  const double r1 = cube.r1, r2 = cube.r2;
  p.h1 = [r1, lower_branch](std::span<const double> x) { return lower_branch(r1, x); };
  p.h2 = [r2, lower_branch](std::span<const double> x) { return -lower_branch(r2, x); };
  p.gap = [r1, r2, lower_branch](std::span<const double> x) {
    return lower_branch(r1, x) + lower_branch(r2, x);
  };

  const double rmax = 0.5 * std::min(r1, r2);
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  const int n_dirs = dim == 2 ? 96 : 256;
  for (int k = 0; k < n_dirs; ++k) {
    Point dir(dim);
    if (dim == 2) {
      const double t = 2.0 * std::numbers::pi * (k + 0.5) / n_dirs;
      dir = {std::cos(t), std::sin(t)};
    } else {
      for (double& v : dir) v = normal(rng);
      const double n = norm2(dir);
      for (double& v : dir) v /= n;
    }
    for (int s = 0; s < 60; ++s) {
      const double rad = rmax * std::pow(0.02, s / 59.0);
      Point x(dim);
      for (int i = 0; i < dim; ++i) x[i] = rad * dir[i];
      const double rem = std::abs(p.gap(x) - p.kappabar * power_sum(x));
      worst = std::max(worst, rem / std::pow(rad, 2.0 * m));
    }
  }
  p.remainder_bound = worst;
  return p;
}

WeightSpec cube_weight_spec(const CubeSpec& cube, int d) {
  cube.validate();
  WeightSpec spec = WeightSpec::power_sum(d, cube.m, (std::pow(cube.r1, 1.0 - cube.m) +
                                                      std::pow(cube.r2, 1.0 - cube.m)) / cube.m);
  return spec;
}

// ---------------------------------------------------------------------------

double weighted_norm(std::span<const FieldSample> field, const NormSpec& norm, double m) {
  if (field.empty()) throw InputError("weighted_norm: empty sample set");
  if (norm.eps < 0.0) throw InputError("weighted_norm: eps must be >= 0");
  double sup = 0.0;
  for (const auto& s : field) {
    const double r = norm2(s.x);
    const double magnitude = norm2(s.value);
    if (magnitude == 0.0) continue;
    const double w = std::pow(r, -norm.sigma) * std::pow(norm.eps + std::pow(r, m), norm.tau - 1.0);
    if (!std::isfinite(w))
      throw DomainError("weighted_norm: weight is singular at a sample point; sample away from 0");
    sup = std::max(sup, w * magnitude);
  }
  return sup;
}

double weighted_average(const ScalarField& f, const WeightSpec& spec, double rho, Surface surface,
                        double R0, int n_theta) {
  if (spec.d != 3) throw UnsupportedError("weighted_average: quadrature implemented for d = 3");
  if (!(rho > 0.0) || !(rho < R0)) throw DomainError("weighted_average: rho must lie in (0, R0)");
  if (n_theta < 8) throw InputError("weighted_average: n_theta too small");
  const double h = 2.0 * std::numbers::pi / n_theta;

  // Trapezoid in theta (exact for trigonometric polynomials of degree < n_theta).
  std::vector<double> kap(n_theta), cs(n_theta), sn(n_theta);
  for (int j = 0; j < n_theta; ++j) {
    const double t = j * h;
    cs[j] = std::cos(t);
    sn[j] = std::sin(t);
    kap[j] = kappa_at_angle(spec, t);
  }

  double num = 0.0, den = 0.0;
  if (surface == Surface::sphere) {
    for (int j = 0; j < n_theta; ++j) {
      const double x[2] = {rho * cs[j], rho * sn[j]};
      num += kap[j] * f(x);
      den += kap[j];
    }
    return num / den;
  }

  // Gauss-Legendre in r (16 nodes), measure r dr.
  static constexpr std::array<double, 8> nodes = {
      0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
      0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
  static constexpr std::array<double, 8> weights = {
      0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
      0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
  for (int q = 0; q < 16; ++q) {
    const double node = q < 8 ? -nodes[7 - q] : nodes[q - 8];
    const double weight = q < 8 ? weights[7 - q] : weights[q - 8];
    const double r = 0.5 * rho * (node + 1.0);
    const double wr = 0.5 * rho * weight * r;
    for (int j = 0; j < n_theta; ++j) {
      const double x[2] = {r * cs[j], r * sn[j]};
      num += wr * kap[j] * f(x);
      den += wr * kap[j];
    }
  }
  return num / den;
}

// ---------------------------------------------------------------------------

SampledHeight::SampledHeight(std::vector<double> values, int n, double half_width)
    : values_(std::move(values)), n_(n), half_width_(half_width) {
  if (n < 4) throw InputError("SampledHeight: need at least 4 nodes per axis");
  if (static_cast<int>(values_.size()) != n * n) throw InputError("SampledHeight: expected n*n values");
  if (!(half_width > 0.0)) throw InputError("SampledHeight: half width must be positive");
  spacing_ = 2.0 * half_width / (n - 1);
}

SampledHeight SampledHeight::from_function(const HeightFunction& h, int n, double half_width) {
  std::vector<double> v(static_cast<std::size_t>(n) * n);
  const double step = 2.0 * half_width / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x[2] = {-half_width + i * step, -half_width + j * step};
      v[static_cast<std::size_t>(i) * n + j] = h(x);
    }
  return SampledHeight(std::move(v), n, half_width);
}

double SampledHeight::at(int i, int j) const {
  // Linear extrapolation past the edges keeps the 4x4 stencil defined.
  auto v = [this](int p, int q) { return values_[static_cast<std::size_t>(p) * n_ + q]; };
  auto row = [&](int a) {
    if (j < 0) return v(a, 0) + j * (v(a, 1) - v(a, 0));
    if (j > n_ - 1) return v(a, n_ - 1) + (j - n_ + 1) * (v(a, n_ - 1) - v(a, n_ - 2));
    return v(a, j);
  };
  if (i < 0) return row(0) + i * (row(1) - row(0));
  if (i > n_ - 1) return row(n_ - 1) + (i - n_ + 1) * (row(n_ - 1) - row(n_ - 2));
  return row(i);
}

double SampledHeight::operator()(std::span<const double> x) const {
  if (x.size() != 2) throw InputError("SampledHeight: expects a point in R^2");
  const double u = (x[0] + half_width_) / spacing_;
  const double v = (x[1] + half_width_) / spacing_;
  if (u < -1e-12 || v < -1e-12 || u > n_ - 1 + 1e-12 || v > n_ - 1 + 1e-12)
    throw DomainError("SampledHeight: point outside the sampled square");
  const int i = std::clamp(static_cast<int>(std::floor(u)), 0, n_ - 2);
  const int j = std::clamp(static_cast<int>(std::floor(v)), 0, n_ - 2);
  const double fu = u - i, fv = v - j;
  // Keys cubic convolution kernel, a = -1/2.
  auto kernel = [](double t) {
    t = std::abs(t);
    if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
  };
  double sum = 0.0;
  for (int p = -1; p <= 2; ++p) {
    const double wu = kernel(fu - p);
    for (int q = -1; q <= 2; ++q) sum += wu * kernel(fv - q) * at(i + p, j + q);
  }
  return sum;
}

// ---------------------------------------------------------------------------

Point gap_transform(const GapProfile& profile, std::span<const double> x, double delta0) {
  if (!(delta0 > 0.0)) throw InputError("gap_transform: delta0 must be positive");
  if (x.size() < 3) throw InputError("gap_transform: expects a point (x', x_d) with d >= 3");
  const std::span<const double> xh = x.first(x.size() - 1);
  const double xd = x.back();
  const double lower = -0.5 * profile.eps + profile.h2(xh);
  const double upper = 0.5 * profile.eps + profile.h1(xh);
  const double height = upper - lower;
  if (!(height > 0.0)) throw DomainError("gap_transform: the gap has zero height at this x'");
  const double slack = 1e-14 * std::max(1.0, std::abs(height));
  if (xd < lower - slack || xd > upper + slack)
    throw DomainError("gap_transform: point lies outside the gap");
  Point y(xh.begin(), xh.end());
  y.push_back(2.0 * delta0 * ((xd - lower) / height - 0.5));
  return y;
}

HConditionReport validate_H_conditions(const GapProfile& profile, const WeightSpec& spec,
                                       std::span<const Point> samples) {
  spec.validate();
  const double m = spec.m;
  const int dim = spec.dim();
  HConditionReport report;

  double sup_h[2] = {0, 0}, sup_grad[2] = {0, 0}, sup_hess[2] = {0, 0};
  std::vector<double> log_r, log_rem;
  double max_gap = 0.0;
  std::vector<std::pair<double, double>> rem_samples;

  for (const Point& x : samples) {
    if (static_cast<int>(x.size()) != dim) throw InputError("validate_H_conditions: sample dimension mismatch");
    const double r = norm2(x);
    if (r > 2.0 * profile.R0 * (1.0 + 1e-12))
      throw InputError("validate_H_conditions: samples must lie in B'_{2R0}");
    if (r == 0.0) continue;
    ++report.sample_count;

    const HeightFunction* hs[2] = {&profile.h1, &profile.h2};
    for (int k = 0; k < 2; ++k) {
      const auto& h = *hs[k];
      const double step = 1e-4 * r;
      const double hstep = 1e-3 * std::max(r, 1e-2);
      double grad2 = 0.0;
      Point xp = x, xm = x;
      const double h0 = h(x);
      sup_h[k] = std::max(sup_h[k], std::abs(h0));
      for (int i = 0; i < dim; ++i) {
        xp[i] = x[i] + step;
        xm[i] = x[i] - step;
        const double g = (h(xp) - h(xm)) / (2.0 * step);
        grad2 += g * g;
        xp[i] = x[i] + hstep;
        xm[i] = x[i] - hstep;
        const double second = (h(xp) - 2.0 * h0 + h(xm)) / (hstep * hstep);
        sup_hess[k] = std::max(sup_hess[k], std::abs(second));
        xp[i] = xm[i] = x[i];
      }
      for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) {
          auto shifted = [&](double si, double sj) {
            Point y = x;
            y[i] += si;
            y[j] += sj;
            return h(y);
          };
          const double mixed = (shifted(hstep, hstep) - shifted(hstep, -hstep) -
                                shifted(-hstep, hstep) + shifted(-hstep, -hstep)) /
                               (4.0 * hstep * hstep);
          sup_hess[k] = std::max(sup_hess[k], std::abs(mixed));
        }
      const double grad = std::sqrt(grad2);
      sup_grad[k] = std::max(sup_grad[k], grad);
      report.max_gradient_ratio = std::max(report.max_gradient_ratio, grad / std::pow(r, m - 1.0));
    }

    const double gap = profile.h1(x) - profile.h2(x);
    const double rem = std::abs(gap - delta(spec, 0.0, x));
    max_gap = std::max(max_gap, std::abs(gap));
    report.remainder_constant =
        std::max(report.remainder_constant, rem / std::pow(r, m + profile.gamma));
    rem_samples.emplace_back(r, rem);
  }

  report.gradient_ok = report.max_gradient_ratio <= profile.tau1;
  report.c2_norm = sup_h[0] + sup_grad[0] + sup_hess[0] + sup_h[1] + sup_grad[1] + sup_hess[1];
  report.c2_ok = report.c2_norm <= profile.tau2;

  const double zero_level = 1e-13 * std::max(max_gap, std::numeric_limits<double>::min());
  for (const auto& [r, rem] : rem_samples)
    if (rem > zero_level) {
      log_r.push_back(std::log(r));
      log_rem.push_back(std::log(rem));
    }
  if (log_r.size() >= 4) {
    const LineFit fit = fit_line(log_r, log_rem);
    report.remainder_exponent = fit.slope;
    report.remainder_ok = fit.slope >= m + profile.gamma - 0.05;
  } else {
    report.remainder_constant = 0.0;
    report.remainder_ok = true;
  }
  return report;
}

std::string describe(const WeightSpec& spec) {
  std::ostringstream os;
  os << "d=" << spec.d << " m=" << spec.m << " kappa0=" << spec.kappa0 << " kappa=[";
  for (std::size_t i = 0; i < spec.kappa.size(); ++i) os << (i ? "," : "") << spec.kappa[i];
  os << "] A={";
  for (std::size_t i = 0; i < spec.setA.size(); ++i) os << (i ? "," : "") << spec.setA[i];
  os << "} B={";
  for (std::size_t i = 0; i < spec.setB.size(); ++i) os << (i ? "," : "") << spec.setB[i];
  os << "}";
  return os.str();
}

}  // namespace gapgrad
