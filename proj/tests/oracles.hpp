#pragma once

// Independent reference computations for the test suites. None of these call
// into the library: they use long double closed forms, a Fourier-Galerkin
// discretization of the circle problem, and a shooting ODE for single modes.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline constexpr long double pi = std::numbers::pi_v<long double>;

// Frozen values. The first comes from a fine finite-volume run (n = 8192) of
// the weight cos^2 + 2 sin^2, cross-checked by fourier_galerkin_eigenvalues.
inline constexpr double lambda1_cos2_2sin2_n8192 = 0.6986416759485973;
inline constexpr double lambda1_cos2_2sin2_continuum = 0.698641709;
inline constexpr double lambda1_cube_m4_continuum = 0.92563905;

// Positive root of a^2 + (d+m-3) a - lambda = 0 in long double.
inline long double alpha_plus(long double lambda, int d, long double m) {
  const long double b = d + m - 3.0L;
  return 2.0L * lambda / (b + std::sqrt(b * b + 4.0L * lambda));
}

inline long double alpha_minus(long double lambda, int d, long double m) {
  const long double b = d + m - 3.0L;
  return (-b - std::sqrt(b * b + 4.0L * lambda)) / 2.0L;
}

// Eigenvalues of -(k u')' = lambda k u on the circle in the trigonometric basis
// {1, cos j t, sin j t : j <= modes}; integrals by the periodic trapezoid rule,
// exact for the band-limited products when k is a trigonometric polynomial.
inline std::vector<double> fourier_galerkin_eigenvalues(const std::function<double(double)>& k, int modes,
                                                        int quad = 0) {
  const int nb = 2 * modes + 1;
  if (quad <= 0) quad = 16 * modes + 64;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nb, nb), M = Eigen::MatrixXd::Zero(nb, nb);
  std::vector<double> phi(nb), dphi(nb);
  for (int q = 0; q < quad; ++q) {
    const double t = 2.0 * std::numbers::pi * q / quad;
    const double w = k(t) * 2.0 * std::numbers::pi / quad;
    phi[0] = 1.0;
    dphi[0] = 0.0;
    for (int j = 1; j <= modes; ++j) {
      phi[2 * j - 1] = std::cos(j * t);
      dphi[2 * j - 1] = -j * std::sin(j * t);
      phi[2 * j] = std::sin(j * t);
      dphi[2 * j] = j * std::cos(j * t);
    }
    for (int a = 0; a < nb; ++a)
      for (int b = 0; b < nb; ++b) {
        K(a, b) += w * dphi[a] * dphi[b];
        M(a, b) += w * phi[a] * phi[b];
      }
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

// Radial profile V of the cos-mode solution v = V(r) cos t of
// div((eps + r^m) grad v) = 0 on the unit disk with V(1) = 1:
//   (eps + r^m)(V'' + V'/r - V/r^2) + m r^{m-1} V' = 0.
// Shooting from the regular branch V ~ r near 0 with long double RK4.
class ModeShooter {
 public:
  ModeShooter(long double eps, long double m, int steps = 200000) {
    const long double r0 = 1e-6L;
    const long double h = (1.0L - r0) / steps;
    r_.resize(steps + 1);
    v_.resize(steps + 1);
    long double r = r0, v = r0, dv = 1.0L;
    auto rhs = [&](long double rr, long double vv, long double dd, long double& ov, long double& od) {
      const long double del = eps + std::pow(rr, m);
      ov = dd;
      od = -dd / rr + vv / (rr * rr) - m * std::pow(rr, m - 1.0L) * dd / del;
    };
    r_[0] = r;
    v_[0] = v;
    for (int s = 1; s <= steps; ++s) {
      long double a1, b1, a2, b2, a3, b3, a4, b4;
      rhs(r, v, dv, a1, b1);
      rhs(r + h / 2, v + h / 2 * a1, dv + h / 2 * b1, a2, b2);
      rhs(r + h / 2, v + h / 2 * a2, dv + h / 2 * b2, a3, b3);
      rhs(r + h, v + h * a3, dv + h * b3, a4, b4);
      v += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
      dv += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
      r = r0 + s * h;
      r_[s] = r;
      v_[s] = v;
    }
    scale_ = v_.back();
    h_ = h;
    r0_ = r0;
  }

  // V(r) by linear interpolation on the fine shooting grid.
  double operator()(double r) const {
    if (r <= static_cast<double>(r0_)) return static_cast<double>(r / r0_ * v_[0] / scale_);
    const long double pos = (r - r0_) / h_;
    std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= r_.size()) return static_cast<double>(v_.back() / scale_);
    const long double f = pos - i;
    return static_cast<double>(((1 - f) * v_[i] + f * v_[i + 1]) / scale_);
  }

 private:
  std::vector<long double> r_, v_;
  long double scale_ = 1, h_ = 0, r0_ = 0;
};

// Composite Simpson rule in long double.
inline long double simpson(const std::function<long double(long double)>& f, long double a, long double b,
                           int n = 20000) {
  if (n % 2) ++n;
  const long double h = (b - a) / n;
  long double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0L : 2.0L) * f(a + i * h);
  return s * h / 3.0L;
}

}  // namespace oracle
