#pragma once

#include <optional>
#include <string>
#include <utility>

#include "gapgrad/geometry.hpp"

namespace gapgrad {

/// Nonnegative root of a^2 + (d+m-3) a - lambda1 = 0.
double alpha_of_lambda(double lambda1, int d, double m);

/// Both indicial roots (alpha_minus, alpha_plus) of the radial Euler equation.
std::pair<double, double> alpha_pm(double lambda_k, int d, double m);

enum class BetaCase { m_greater, m_equal, m_less };

struct BetaResult {
  double beta = 0.0;
  BetaCase which = BetaCase::m_greater;
};

/// eta is the stand-in for "any value below 1" on the borderline branch.
BetaResult beta_of_lambda(double lambda1, int d, double m, double eta = 1e-6);

enum class LambdaSource { computed, shortcut, override_value };

struct ExponentReport {
  int d = 3;
  double m = 2.0;
  double lambda1 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  BetaCase beta_case = BetaCase::m_greater;
  double gradient_exponent_touching = 0.0;  // alpha - 1, power of |x'|
  double gradient_exponent_eps = 0.0;       // (alpha - 1)/m, power of (eps + |x'|^m)
  LambdaSource lambda1_source = LambdaSource::computed;
  // Present when the shortcut fired and a d = 3 spectral cross-check was requested.
  std::optional<double> lambda1_computed;
  std::optional<bool> shortcut_consistent;
};

/// lambda1 = d - 2 whenever the closed-form decision table for the weight
/// applies; empty otherwise.
std::optional<double> lambda1_shortcut(const WeightSpec& spec);

struct PredictOptions {
  std::optional<double> lambda1_override;
  int grid_cells = 2048;      // circle grid used when lambda1 must be computed (d = 3)
  bool cross_check = false;   // also solve when the shortcut fires
  double cross_check_tol = 1e-4;
  double eta = 1e-6;
};

ExponentReport predict_rates(const WeightSpec& spec, const PredictOptions& options = {});

/// Report for a given lambda1 without any weight lookup.
ExponentReport exponents_for(double lambda1, int d, double m, LambdaSource source,
                             double eta = 1e-6);

std::string to_string(BetaCase c);
std::string to_string(LambdaSource s);

}  // namespace gapgrad
