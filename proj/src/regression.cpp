#include "gapgrad/regression.hpp"

#include <cmath>

#include "gapgrad/error.hpp"

namespace gapgrad {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("fit_line: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw InputError("fit_line: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InputError("fit_line: x values are all equal");

  LineFit fit;
  fit.count = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    sse += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::max(0.0, std::min(1.0, 1.0 - sse / syy)) : 1.0;
  if (n > 2) {
    const double s2 = sse / (n - 2);
    fit.slope_stderr = std::sqrt(s2 / sxx);
    fit.intercept_stderr = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return fit;
}

RateFit fit_loglog(std::span<const std::pair<double, double>> points, std::optional<double> predicted) {
  if (points.size() < 4) throw InputError("fit_loglog: need at least 4 points");
  std::vector<double> lx, ly;
  lx.reserve(points.size());
  ly.reserve(points.size());
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw InputError("fit_loglog: values must be positive");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const LineFit line = fit_line(lx, ly);
  RateFit fit;
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.r_squared = line.r_squared;
  fit.point_count = static_cast<int>(points.size());
  if (predicted) {
    fit.has_prediction = true;
    fit.predicted = *predicted;
    fit.relative_error = *predicted != 0.0 ? std::abs(fit.slope - *predicted) / std::abs(*predicted)
                                           : std::abs(fit.slope);
  }
  return fit;
}

}  // namespace gapgrad
