#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gapgrad {

/// Straight-line least squares y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  std::size_t count = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Slope of log y against log x, compared with an optional predicted slope.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int point_count = 0;
  double predicted = 0.0;
  double relative_error = 0.0;  // |slope - predicted| / |predicted|; 0 without prediction
  bool has_prediction = false;
};

/// Needs at least 4 points with x, y > 0; throws InputError otherwise.
RateFit fit_loglog(std::span<const std::pair<double, double>> points,
                   std::optional<double> predicted = std::nullopt);

}  // namespace gapgrad
