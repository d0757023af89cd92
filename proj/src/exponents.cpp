#include "gapgrad/exponents.hpp"

#include <algorithm>
#include <cmath>

#include "gapgrad/error.hpp"
#include "gapgrad/spectral.hpp"

namespace gapgrad {

namespace {

void check_inputs(double lambda, int d, double m) {
  if (!(lambda >= 0.0)) throw InputError("exponents: lambda must be nonnegative");
  if (d < 3) throw InputError("exponents: d must be at least 3");
  if (!(m >= 2.0)) throw InputError("exponents: m must be at least 2");
}

bool all_equal(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) {
    return std::abs(x - v.front()) <= 1e-12 * std::max(std::abs(x), std::abs(v.front()));
  });
}

}  // namespace

double alpha_of_lambda(double lambda1, int d, double m) { return alpha_pm(lambda1, d, m).second; }

std::pair<double, double> alpha_pm(double lambda_k, int d, double m) {
  check_inputs(lambda_k, d, m);
  const double b = d + m - 3.0;
  const double root = std::sqrt(b * b + 4.0 * lambda_k);
  // Cancellation-free pair: alpha_plus * alpha_minus = -lambda.
  const double minus = 0.5 * (-b - root);
  const double plus = lambda_k == 0.0 ? 0.0 : -lambda_k / minus;
  return {minus, plus};
}

BetaResult beta_of_lambda(double lambda1, int d, double m, double eta) {
  const double alpha = alpha_of_lambda(lambda1, d, m);
  const double gap = m - (d + 2.0 * alpha - 3.0);
  if (std::abs(gap) <= 1e-12) return {1.0 - eta, BetaCase::m_equal};
  if (gap > 0.0) return {(2.0 * alpha + d + m - 3.0) / (2.0 * m), BetaCase::m_greater};
  return {1.0, BetaCase::m_less};
}

std::optional<double> lambda1_shortcut(const WeightSpec& spec) {
  spec.validate();
  const double exact = spec.d - 2.0;
  const int dim = spec.dim();
  const bool b_empty = spec.setB.empty();
  const bool b_full = static_cast<int>(spec.setB.size()) == dim;

  std::vector<double> kappa_a, kappa_b;
  for (int i : spec.setA) kappa_a.push_back(spec.kappa[i - 1]);
  for (int j : spec.setB) kappa_b.push_back(spec.kappa[j - 1]);

  if (spec.m == 2.0) {
    if (b_empty && all_equal(kappa_a)) return exact;
    if (b_full && all_equal(kappa_b)) return exact;
    if (!b_empty && !b_full) {
      std::vector<double> coeffs = kappa_b;
      for (double k : kappa_a) coeffs.push_back(spec.kappa0 * k);
      if (all_equal(coeffs)) return exact;
    }
    return std::nullopt;
  }
  if (!b_empty) return exact;
  if (!all_equal(kappa_a)) return exact;
  // B empty with equal coefficients: kappa is constant.
  return exact;
}

ExponentReport exponents_for(double lambda1, int d, double m, LambdaSource source, double eta) {
  ExponentReport r;
  r.d = d;
  r.m = m;
  r.lambda1 = lambda1;
  r.alpha = alpha_of_lambda(lambda1, d, m);
  const BetaResult b = beta_of_lambda(lambda1, d, m, eta);
  r.beta = b.beta;
  r.beta_case = b.which;
  r.gradient_exponent_touching = r.alpha - 1.0;
  r.gradient_exponent_eps = (r.alpha - 1.0) / m;
  r.lambda1_source = source;
  return r;
}

ExponentReport predict_rates(const WeightSpec& spec, const PredictOptions& options) {
  spec.validate();
  if (options.lambda1_override)
    return exponents_for(*options.lambda1_override, spec.d, spec.m, LambdaSource::override_value,
                         options.eta);

  auto computed = [&]() {
    if (spec.d != 3)
      throw UnsupportedError("predict_rates: lambda1 for d > 3 needs an override (no S^{d-2} solver)");
    return first_nonzero_eigenvalue(angular_weight(spec), options.grid_cells);
  };

  if (const auto shortcut = lambda1_shortcut(spec)) {
    ExponentReport r = exponents_for(*shortcut, spec.d, spec.m, LambdaSource::shortcut,
                                     options.eta);
    if (options.cross_check && spec.d == 3) {
      r.lambda1_computed = computed();
      r.shortcut_consistent = std::abs(*r.lambda1_computed - *shortcut) <= options.cross_check_tol;
    }
    return r;
  }
  return exponents_for(computed(), spec.d, spec.m, LambdaSource::computed, options.eta);
}

std::string to_string(BetaCase c) {
  switch (c) {
    case BetaCase::m_greater: return "m_greater";
    case BetaCase::m_equal: return "m_equal";
    case BetaCase::m_less: return "m_less";
  }
  return "unknown";
}

std::string to_string(LambdaSource s) {
  switch (s) {
    case LambdaSource::computed: return "computed";
    case LambdaSource::shortcut: return "shortcut";
    case LambdaSource::override_value: return "override";
  }
  return "unknown";
}

}  // namespace gapgrad
