#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gapgrad/error.hpp"
#include "gapgrad/harness.hpp"

namespace gapgrad {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 80, kRight = 24, kTop = 40, kBottom = 60;

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_svg(const PlotSeries& series) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < series.x.size() && i < series.y.size(); ++i)
    if (series.x[i] > 0.0 && series.y[i] > 0.0) {
      lx.push_back(std::log10(series.x[i]));
      ly.push_back(std::log10(series.y[i]));
    }
  if (lx.empty()) throw InputError("render_svg: no positive points to plot");

  double x0 = *std::min_element(lx.begin(), lx.end()), x1 = *std::max_element(lx.begin(), lx.end());
  double y0 = *std::min_element(ly.begin(), ly.end()), y1 = *std::max_element(ly.begin(), ly.end());
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  const double px = 0.05 * (x1 - x0), py = 0.08 * (y1 - y0);
  x0 -= px, x1 += px, y0 -= py, y1 += py;

  auto sx = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * (kWidth - kLeft - kRight); };
  auto sy = [&](double v) { return kHeight - kBottom - (v - y0) / (y1 - y0) * (kHeight - kTop - kBottom); };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(series.name)
     << "</text>\n";
  // Frame and decade ticks.
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
     << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = static_cast<int>(std::ceil(x0)); t <= static_cast<int>(std::floor(x1)); ++t)
    os << "<text x=\"" << sx(t) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">1e" << t
       << "</text>\n";
  for (int t = static_cast<int>(std::ceil(y0)); t <= static_cast<int>(std::floor(y1)); ++t)
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(t) + 4 << "\" text-anchor=\"end\">1e" << t << "</text>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
     << escape(series.x_label) << " (log)</text>\n";
  os << "<text x=\"18\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << kHeight / 2 << ")\">" << escape(series.y_label) << " (log)</text>\n";

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
  mx /= lx.size();
  my /= ly.size();

  int legend = 0;
  auto line = [&](double slope, double at_x, double at_y, const char* color, const char* dash,
                  const std::string& label) {
    const double ya = at_y + slope * (x0 - at_x), yb = at_y + slope * (x1 - at_x);
    os << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(ya) << "\" x2=\"" << sx(x1) << "\" y2=\"" << sy(yb)
       << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"" << (dash[0] ? " stroke-dasharray=\"" : "") << dash
       << (dash[0] ? "\"" : "") << "/>\n";
    os << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 16 + 16 * legend++ << "\" fill=\"" << color << "\">"
       << escape(label) << "</text>\n";
  };
  os << "<clipPath id=\"plot\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
     << kWidth - kLeft - kRight << "\" height=\"" << kHeight - kTop - kBottom << "\"/></clipPath>\n";
  os << "<g clip-path=\"url(#plot)\">\n";
  if (series.fitted_slope && series.fitted_intercept)
    line(*series.fitted_slope, 0.0, *series.fitted_intercept / std::log(10.0), "#1f5fbf", "",
         "fitted slope " + fmt(*series.fitted_slope, 5));
  if (series.predicted_slope)
    line(*series.predicted_slope, mx, my, "#c0392b", "6 4", "predicted slope " + fmt(*series.predicted_slope, 5));
  for (std::size_t i = 0; i < lx.size(); ++i)
    os << "<circle cx=\"" << sx(lx[i]) << "\" cy=\"" << sy(ly[i]) << "\" r=\"3\" fill=\"black\"/>\n";
  os << "</g>\n</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> emit_plots(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  if (bundle.plots.empty()) return written;
  std::filesystem::create_directories(dir);
  for (const auto& series : bundle.plots) {
    std::string stem = series.name;
    for (char& c : stem)
      if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    const auto path = dir / (stem + ".svg");
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << render_svg(series);
    written.push_back(path);
  }
  return written;
}

}  // namespace gapgrad
