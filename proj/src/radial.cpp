#include "gapgrad/radial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gapgrad/error.hpp"
#include "gapgrad/exponents.hpp"
#include "gapgrad/quadrature.hpp"
#include "gapgrad/regression.hpp"

namespace gapgrad {

namespace {

constexpr double kPanelRatio = 0.25;
constexpr int kMaxPanels = 400;

double gauss_panel(const std::function<double(double)>& f, double a, double b, int order) {
  const GaussRule& rule = gauss_legendre(order);
  const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
  double s = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) s += rule.weights[q] * f(mid + half * rule.nodes[q]);
  return half * s;
}

// int_0^L f on panels [L q^{k+1}, L q^k], stopping once the panels shrink
// geometrically below tolerance; the remaining tail is summed as a geometric
// series. Panels that stop shrinking mean the integral diverges at 0.
double graded_integral(const std::function<double(double)>& f, double L, int order, double rtol,
                       const char* what) {
  if (L <= 0.0) return 0.0;
  double total = 0.0, prev = 0.0;
  int growing = 0;
  for (int k = 0; k < kMaxPanels; ++k) {
    const double b = L * std::pow(kPanelRatio, k);
    const double a = b * kPanelRatio;
    const double p = gauss_panel(f, a, b, order);
    if (!std::isfinite(p)) throw DomainError(std::string(what) + ": integrand is not finite");
    total += p;
    if (k >= 2) {
      if (p == 0.0 && prev == 0.0) {
        if (k >= 6) return total;
        prev = p;
        continue;
      }
      const double ratio = prev != 0.0 ? std::abs(p / prev) : 0.0;
      if (ratio >= 0.999) {
        if (++growing >= 8) throw DomainError(std::string(what) + ": integral diverges at 0");
      } else {
        growing = 0;
        const double tail = p * ratio / (1.0 - ratio);
        if (std::abs(tail) <= 1e-3 * rtol * std::abs(total) || std::abs(p) <= 1e-300) return total + tail;
      }
    }
    prev = p;
  }
  throw DomainError(std::string(what) + ": integral does not converge at 0");
}

double local_exponent(std::span<const double> r, std::span<const double> v) {
  // Innermost decade of the grid.
  const double r0 = r.front();
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < r.size() && r[i] <= 10.0 * r0; ++i) {
    if (v[i] == 0.0) continue;
    lx.push_back(std::log(r[i]));
    ly.push_back(std::log(std::abs(v[i])));
  }
  if (lx.size() < 2 || lx.front() == lx.back()) return std::numeric_limits<double>::quiet_NaN();
  return fit_line(lx, ly).slope;
}

}  // namespace

double homogeneous_radial(double lambda_k, int d, double m, double rho) {
  if (!(rho > 0.0)) throw DomainError("homogeneous_radial: rho must be positive");
  return std::pow(rho, alpha_pm(lambda_k, d, m).second);
}

RadialSolution solve_radial_ivp(double lambda_k, int d, double m, double r_start, double r_end,
                                double v1, double dv1, int steps) {
  if (!(r_end > 0.0)) throw DomainError("solve_radial_ivp: r_end must be positive (singular point at 0)");
  if (!(r_end < r_start)) throw InputError("solve_radial_ivp: need r_end < r_start");
  if (steps < 100) throw InputError("solve_radial_ivp: need at least 100 steps");
  const auto [am, ap] = alpha_pm(lambda_k, d, m);
  const double c = m + d - 2.0;

  auto rhs = [&](double r, double v, double dv, double& ov, double& odv) {
    ov = dv;
    odv = -c / r * dv + lambda_k / (r * r) * v;
  };

  const double h = (r_end - r_start) / steps;
  std::vector<double> rs(steps + 1), vs(steps + 1);
  double r = r_start, v = v1, dv = dv1;
  rs[steps] = r;
  vs[steps] = v;
  for (int s = 1; s <= steps; ++s) {
    double k1v, k1d, k2v, k2d, k3v, k3d, k4v, k4d;
    rhs(r, v, dv, k1v, k1d);
    rhs(r + 0.5 * h, v + 0.5 * h * k1v, dv + 0.5 * h * k1d, k2v, k2d);
    rhs(r + 0.5 * h, v + 0.5 * h * k2v, dv + 0.5 * h * k2d, k3v, k3d);
    rhs(r + h, v + h * k3v, dv + h * k3d, k4v, k4d);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    dv += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    r = s == steps ? r_end : r_start + s * h;
    rs[steps - s] = r;
    vs[steps - s] = v;
  }

  RadialSolution out;
  out.r = std::move(rs);
  out.values = std::move(vs);
  out.source = RadialSource::rk4;
  if (v1 != 0.0) {
    const double slope = dv1 / v1 * r_start;
    if (std::abs(slope - ap) <= 1e-12 * std::max(1.0, std::abs(ap))) out.closed_form_exponent = ap;
    else if (std::abs(slope - am) <= 1e-12 * std::max(1.0, std::abs(am))) out.closed_form_exponent = am;
  }
  const double e = local_exponent(out.r, out.values);
  if (std::isfinite(e)) {
    out.observed_exponent = e;
    out.singular_branch = e < -1e-8;
  }
  return out;
}

RadialSolution variation_of_parameters(const std::function<double(double)>& H, double alpha, int d,
                                       double m, std::span<const double> r_grid, double rtol) {
  if (r_grid.empty()) throw InputError("variation_of_parameters: empty grid");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0) || r_grid[i] > 1.0)
      throw DomainError("variation_of_parameters: grid must lie in (0, 1]");
    if (i > 0 && !(r_grid[i] > r_grid[i - 1]))
      throw InputError("variation_of_parameters: grid must be strictly increasing");
  }
  const double p_outer = d + m + 2.0 * alpha - 2.0;
  const double p_inner = d + m + alpha - 2.0;

  auto inner = [&](double s, int order) {
    return graded_integral([&](double t) { return std::pow(t, p_inner) * H(t); }, s, order, rtol,
                           "variation_of_parameters (inner integral)");
  };
  auto w_at = [&](double r, int order) {
    return graded_integral([&](double s) { return std::pow(s, -p_outer) * inner(s, order); }, r, order,
                           rtol, "variation_of_parameters (outer integral)");
  };

  RadialSolution out;
  out.source = RadialSource::variation_of_parameters;
  out.r.assign(r_grid.begin(), r_grid.end());
  for (double r : r_grid) {
    double prev = w_at(r, 12);
    double cur = prev;
    bool converged = false;
    std::vector<double> history;
    for (int order = 20; order <= 60; order += 8) {
      cur = w_at(r, order);
      const double change = std::abs(cur - prev);
      history.push_back(change);
      if (change <= rtol * std::abs(cur) || (cur == 0.0 && prev == 0.0)) {
        converged = true;
        break;
      }
      prev = cur;
    }
    if (!converged) {
      std::ostringstream os;
      os << "variation_of_parameters: quadrature did not settle at r = " << r;
      throw ConvergenceError(os.str(), history);
    }
    out.w.push_back(cur);
    out.values.push_back(std::pow(r, alpha) * cur);
  }
  return out;
}

std::vector<double> apply_radial_operator(std::span<const double> r, std::span<const double> v,
                                          double lambda, int d, double m) {
  if (r.size() != v.size() || r.size() < 3) throw InputError("apply_radial_operator: need >= 3 matching samples");
  const double c = m + d - 2.0;
  std::vector<double> out;
  out.reserve(r.size() - 2);
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    const double h1 = r[i] - r[i - 1], h2 = r[i + 1] - r[i];
    const double d1 = (-h2 / (h1 * (h1 + h2))) * v[i - 1] + ((h2 - h1) / (h1 * h2)) * v[i] +
                      (h1 / (h2 * (h1 + h2))) * v[i + 1];
    const double d2 = 2.0 * (v[i - 1] / (h1 * (h1 + h2)) - v[i] / (h1 * h2) + v[i + 1] / (h2 * (h1 + h2)));
    out.push_back(d2 + c / r[i] * d1 - lambda / (r[i] * r[i]) * v[i]);
  }
  return out;
}

LeadingFit fit_leading_coefficient(std::span<const double> r, std::span<const double> U, double alpha,
                                   double gamma) {
  if (r.size() != U.size()) throw InputError("fit_leading_coefficient: r and U differ in length");
  if (r.size() < 8) throw InputError("fit_leading_coefficient: need at least 8 samples");
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  if (!(*lo > 0.0)) throw DomainError("fit_leading_coefficient: radii must be positive");
  if (*hi < 10.0 * *lo * (1.0 - 1e-12)) throw InputError("fit_leading_coefficient: radii must span a decade");

  std::vector<double> x(r.size()), y(r.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    x[i] = std::pow(r[i], gamma);
    y[i] = U[i] / std::pow(r[i], alpha);
    scale = std::max(scale, std::abs(U[i]));
  }
  const LineFit line = fit_line(x, y);
  LeadingFit fit;
  fit.C1 = line.intercept;
  fit.C1_stderr = line.intercept_stderr;
  fit.correction = line.slope;
  fit.correction_stderr = line.slope_stderr;
  fit.count = static_cast<int>(r.size());

  std::vector<double> lr, lres;
  double worst_res = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double ra = std::pow(r[i], alpha);
    const double model = ra * (fit.C1 + fit.correction * x[i]);
    fit.max_relative_residual = std::max(fit.max_relative_residual, std::abs(U[i] - model));
    const double res = U[i] - fit.C1 * ra;
    worst_res = std::max(worst_res, std::abs(res));
    if (res != 0.0) {
      lr.push_back(std::log(r[i]));
      lres.push_back(std::log(std::abs(res)));
    }
  }
  if (scale > 0.0) fit.max_relative_residual /= scale;
  if (worst_res > 1e-12 * scale && lr.size() >= 2) fit.residual_exponent = fit_line(lr, lres).slope;
  return fit;
}

}  // namespace gapgrad
