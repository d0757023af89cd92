#include "gapgrad/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "gapgrad/error.hpp"
#include "gapgrad/exponents.hpp"
#include "gapgrad/radial.hpp"
#include "gapgrad/spectral.hpp"

namespace gapgrad {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json weight_json(const WeightSpec& w) {
  return {{"d", w.d}, {"m", w.m}, {"kappa0", w.kappa0}, {"kappa", w.kappa}, {"setA", w.setA}, {"setB", w.setB}};
}

json grid_json(const PolarGrid& g) { return {{"n_r", g.n_r}, {"n_theta", g.n_theta}, {"R0", g.R0}}; }

json fit_json(const RateFit& f) {
  json j = {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"point_count", f.point_count}};
  if (f.has_prediction) {
    j["predicted"] = f.predicted;
    j["relative_error"] = f.relative_error;
  }
  return j;
}

json exponent_json(const ExponentReport& r) {
  json j = {{"d", r.d},
            {"m", r.m},
            {"lambda1", r.lambda1},
            {"alpha", r.alpha},
            {"beta", r.beta},
            {"beta_case", to_string(r.beta_case)},
            {"gradient_exponent_touching", r.gradient_exponent_touching},
            {"gradient_exponent_eps", r.gradient_exponent_eps},
            {"lambda1_source", to_string(r.lambda1_source)}};
  if (r.lambda1_computed) j["lambda1_computed"] = *r.lambda1_computed;
  if (r.shortcut_consistent) j["shortcut_consistent"] = *r.shortcut_consistent;
  return j;
}

Verdict relative_verdict(const std::string& name, double observed, double predicted, double tol) {
  const double rel = std::abs(observed - predicted) / std::max(std::abs(predicted), 1e-300);
  return {name, rel <= tol, observed, predicted, tol, "relative error"};
}

Verdict absolute_verdict(const std::string& name, double observed, double predicted, double tol) {
  return {name, std::abs(observed - predicted) <= tol, observed, predicted, tol, "absolute error"};
}

Verdict bound_verdict(const std::string& name, double observed, double bound, bool upper) {
  const bool ok = upper ? observed <= bound : observed >= bound;
  return {name, ok, observed, bound, 0.0, upper ? "observed <= predicted" : "observed >= predicted"};
}

template <typename T>
T param(const ExperimentConfig& c, const char* key, T fallback) {
  if (!c.params.contains(key)) return fallback;
  try {
    return c.params.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("experiment.") + key + " has the wrong type");
  }
}

// Boundary data on theta_j: eigenmode k of the circle operator (kappa-normalized,
// odd in xi_1 when such a member exists), a coordinate function, or samples.
struct Boundary {
  std::vector<double> values;
  std::string label;
  std::optional<int> mode;
  double lambda_mode = 0.0;
};

Boundary make_boundary(const ExperimentConfig& c, const AngularWeight& kappa, int n_theta, json& provenance) {
  const std::string kind = param<std::string>(c, "boundary", "eigenmode");
  Boundary b;
  if (kind == "eigenmode") {
    const int k = param<int>(c, "mode", 1);
    if (k < 1) throw InputError("experiment.mode must be >= 1");
    const Spectrum s = solve_spectrum(assemble_operator(kappa, CircleGrid(n_theta)), 2 * k + 3);
    if (s.cluster_count() <= k) throw InputError("experiment.mode exceeds the computed spectrum");
    const int first = s.cluster_start(k);
    std::optional<std::vector<double>> odd;
    if (!s.parity.empty()) odd = odd_eigenfunction(s, first, 1);
    b.values = odd ? *odd : s.eigenfunctions[first];
    b.mode = k;
    b.lambda_mode = s.eigenvalues[first];
    b.label = "eigenmode " + std::to_string(k);
    provenance["boundary_spectrum_residual"] = *std::max_element(s.residuals.begin(), s.residuals.end());
  } else if (kind == "coordinate") {
    const int j = param<int>(c, "coordinate", 1);
    if (j != 1 && j != 2) throw InputError("experiment.coordinate must be 1 or 2");
    const PolarGrid g{32, n_theta, 1.0};
    b.values = sample_boundary(g, [j](double t) { return j == 1 ? std::cos(t) : std::sin(t); });
    b.label = j == 1 ? "xi_1" : "xi_2";
  } else if (kind == "cos2") {
    const PolarGrid g{32, n_theta, 1.0};
    b.values = sample_boundary(g, [](double t) { return std::cos(2.0 * t); });
    b.label = "cos 2theta";
  } else if (kind == "custom") {
    b.values = param<std::vector<double>>(c, "samples", {});
    if (static_cast<int>(b.values.size()) != n_theta)
      throw InputError("experiment.samples must have n_theta entries");
    b.label = "custom samples";
  } else {
    throw InputError("experiment.boundary must be eigenmode, coordinate, cos2 or custom");
  }
  return b;
}

std::vector<double> geometric_list(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw InputError("invalid geometric range");
  std::vector<double> out;
  for (int q = 0; q < count; ++q) out.push_back(lo * std::pow(hi / lo, static_cast<double>(q) / (count - 1)));
  return out;
}

// ---------------------------------------------------------------------------

void run_exponents(const ExperimentConfig& c, ReportBundle& b) {
  PredictOptions opt;
  if (c.params.contains("lambda1_override")) opt.lambda1_override = param<double>(c, "lambda1_override", 0.0);
  opt.grid_cells = param<int>(c, "grid_cells", 2048);
  opt.cross_check = param<bool>(c, "cross_check", c.weight.d == 3);
  opt.cross_check_tol = c.tolerance("shortcut", 1e-4);
  opt.eta = param<double>(c, "eta", 1e-6);
  const ExponentReport r = predict_rates(c.weight, opt);
  b.results["exponents"] = exponent_json(r);
  const auto [am, ap] = alpha_pm(r.lambda1, r.d, r.m);
  b.results["alpha_minus"] = am;
  b.results["alpha_plus"] = ap;

  const double indicial = r.alpha * r.alpha + (r.d + r.m - 3.0) * r.alpha - r.lambda1;
  b.verdicts.push_back(absolute_verdict("indicial_residual", indicial, 0.0, c.tolerance("indicial", 1e-12)));
  b.verdicts.push_back(
      absolute_verdict("eps_exponent_identity", r.gradient_exponent_eps, (r.alpha - 1.0) / r.m, 1e-15));
  if (r.lambda1_computed)
    b.verdicts.push_back(absolute_verdict("shortcut_vs_computed_lambda1", *r.lambda1_computed, r.lambda1,
                                          opt.cross_check_tol));
}

void run_eigensolve(const ExperimentConfig& c, ReportBundle& b) {
  const AngularWeight kappa = angular_weight(c.weight);
  const int n = param<int>(c, "cells", 2048);
  const int k = param<int>(c, "count", 7);
  const Spectrum s = solve_spectrum(assemble_operator(kappa, CircleGrid(n)), k);
  if (s.cluster_count() < 2) throw ConvergenceError("eigensolve: spectrum too short", {});
  const int first = s.cluster_start(1);
  const double lambda1 = s.eigenvalues[first];

  json parity = json::array();
  for (const auto& p : s.parity) {
    json entries = json::array();
    for (const auto& e : p.entries)
      entries.push_back({{"coordinate", e.coordinate}, {"projected_norm", e.projected_norm}, {"odd_member", e.odd_member}});
    parity.push_back({{"first", p.first}, {"size", p.size}, {"property_O", p.property_O()}, {"entries", entries}});
  }
  const double worst = *std::max_element(s.residuals.begin(), s.residuals.end());
  b.results["eigenvalues"] = s.eigenvalues;
  b.results["multiplicities"] = s.multiplicities;
  b.results["parity"] = parity;
  b.results["lambda1"] = lambda1;
  b.results["lambda1_multiplicity"] = s.multiplicities[1];
  b.provenance["cells"] = n;
  b.provenance["max_eigen_residual"] = worst;

  std::vector<int> sizes = param<std::vector<int>>(c, "richardson", {n / 4, n / 2, n});
  if (sizes.size() >= 2) {
    const RichardsonResult rr = richardson_lambda1(kappa, sizes);
    b.results["richardson"] = {{"sizes", rr.sizes}, {"values", rr.values}, {"extrapolated", rr.extrapolated},
                               {"estimate", rr.estimate}};
    PlotSeries plot{"lambda1 grid convergence", "cells n", "|lambda1(n) - extrapolated|", {}, {}, {}, {}, -2.0};
    CsvTable table{{"n", "lambda1", "error"}, {}};
    for (std::size_t i = 0; i < rr.sizes.size(); ++i) {
      const double err = std::abs(rr.values[i] - rr.estimate);
      table.rows.push_back({static_cast<double>(rr.sizes[i]), rr.values[i], err});
      if (err > 0.0) {
        plot.x.push_back(rr.sizes[i]);
        plot.y.push_back(err);
      }
    }
    b.tables["richardson"] = table;
    if (plot.x.size() >= 2) b.plots.push_back(plot);
  }

  CsvTable ef{{"theta"}, {}};
  const int shown = std::min<int>(5, static_cast<int>(s.eigenfunctions.size()));
  for (int e = 0; e < shown; ++e) ef.columns.push_back("Y" + std::to_string(e));
  const CircleGrid grid(n);
  for (int j = 0; j < n; ++j) {
    std::vector<double> row{grid.centers[j]};
    for (int e = 0; e < shown; ++e) row.push_back(s.eigenfunctions[e][j]);
    ef.rows.push_back(std::move(row));
  }
  b.tables["eigenfunctions"] = ef;

  b.verdicts.push_back(bound_verdict("eigen_residual", worst, 1e-8, true));
  b.verdicts.push_back(bound_verdict("lambda1_at_most_d_minus_2", lambda1, c.weight.d - 2.0 + 1e-6, true));
  if (const auto shortcut = lambda1_shortcut(c.weight))
    b.verdicts.push_back(absolute_verdict("lambda1_vs_shortcut", lambda1, *shortcut, c.tolerance("shortcut", 1e-4)));
}

void run_decay(const ExperimentConfig& c, ReportBundle& b) {
  const AngularWeight kappa = angular_weight(c.weight);
  const Boundary g = make_boundary(c, kappa, c.grid.n_theta, b.provenance);
  const DiskSystem sys = assemble_disk_system(kappa, c.weight.m, c.eps, c.grid, FaceFlux{}, g.values);
  SolveOptions so;
  so.tol = param<double>(c, "solver_tol", 1e-10);
  const DiskField v = solve_disk(sys, so);

  const auto rho = geometric_list(param<double>(c, "rho_min", 0.05), param<double>(c, "rho_max", 0.4),
                                  param<int>(c, "rho_count", 12));
  OmegaOptions oo;
  const std::string form = param<std::string>(c, "form", c.eps > 0.0 ? "annulus" : "circle");
  if (form == "annulus") {
    oo.form = OmegaForm::annulus;
    oo.cbar0 = derived_constants(c.weight).cbar0;
  } else if (form != "circle") {
    throw InputError("experiment.form must be circle or annulus");
  }
  const DecayProfile profile = omega_profile(v, rho, oo);

  // Predicted exponent: alpha(lambda_1) for the first mode, alpha_+(lambda_k) otherwise.
  double predicted;
  if (g.mode && *g.mode == 1) {
    predicted = predict_rates(c.weight).alpha;
  } else if (g.mode) {
    predicted = alpha_pm(g.lambda_mode, c.weight.d, c.weight.m).second;
  } else {
    predicted = predict_rates(c.weight).alpha;
  }
  const RateFit fit = verify_oscillation_decay(profile, predicted);
  b.results["boundary"] = g.label;
  b.results["fit"] = fit_json(fit);
  b.results["omega"] = {{"rho", profile.rho}, {"omega", profile.omega}, {"form", form}};
  if (g.mode) {
    b.results["lambda_mode_discrete"] = g.lambda_mode;
    b.results["alpha_from_discrete_lambda"] = alpha_pm(g.lambda_mode, c.weight.d, c.weight.m).second;
  }
  b.provenance["grid"] = grid_json(c.grid);
  b.provenance["solve_residual"] = v.solve_residual;
  b.provenance["iterations"] = v.iterations;

  CsvTable t{{"rho", "omega"}, {}};
  for (std::size_t i = 0; i < profile.rho.size(); ++i) t.rows.push_back({profile.rho[i], profile.omega[i]});
  b.tables["decay"] = t;
  b.plots.push_back({"oscillation decay", "rho", "omega(rho)", profile.rho, profile.omega, fit.slope, fit.intercept,
                     predicted});
  b.verdicts.push_back(relative_verdict("decay_slope", fit.slope, predicted, c.tolerance("decay", 0.02)));
}

void run_rate_sweep(const ExperimentConfig& c, ReportBundle& b) {
  const AngularWeight kappa = angular_weight(c.weight);
  const Boundary g = make_boundary(c, kappa, c.grid.n_theta, b.provenance);
  const ExponentReport pred = predict_rates(c.weight);
  SweepOptions opt;
  opt.grid = c.grid;
  opt.probe_radius = param<double>(c, "probe_radius", 2.0);
  opt.tol = param<double>(c, "solver_tol", 1e-10);
  opt.min_probe_cells = param<int>(c, "min_probe_cells", 8);
  const PolarGrid& grid = c.grid;
  const std::vector<double> values = g.values;
  // Boundary as a function of theta: piecewise constant per cell is exact on theta_j.
  auto boundary = [&values, &grid](double t) {
    const int j = static_cast<int>(std::floor(t / grid.dtheta()));
    return values[((j % grid.n_theta) + grid.n_theta) % grid.n_theta];
  };
  const SweepResult r = gradient_rate_sweep(kappa, c.weight.m, boundary, c.eps_list, pred.gradient_exponent_eps, opt);

  json pts = json::array();
  CsvTable t{{"eps", "max_gradient", "probe_radius", "probe_cells", "asymptotic", "iterations"}, {}};
  std::vector<double> xs, ys;
  for (const auto& p : r.points) {
    pts.push_back({{"eps", p.eps}, {"max_gradient", p.max_gradient}, {"probe_radius", p.probe_radius},
                   {"probe_cells", p.probe_cells}, {"asymptotic", p.asymptotic}, {"iterations", p.iterations}});
    t.rows.push_back({p.eps, p.max_gradient, p.probe_radius, static_cast<double>(p.probe_cells),
                      p.asymptotic ? 1.0 : 0.0, static_cast<double>(p.iterations)});
    xs.push_back(p.eps);
    ys.push_back(p.max_gradient);
  }
  b.results["boundary"] = g.label;
  b.results["points"] = pts;
  b.results["fit"] = fit_json(r.fit);
  b.results["all_asymptotic"] = r.all_asymptotic;
  b.results["exponents"] = exponent_json(pred);
  b.provenance["grid"] = grid_json(c.grid);
  b.tables["rate_sweep"] = t;
  b.plots.push_back({"gradient rate sweep", "eps", "max |grad v|", xs, ys, r.fit.slope, r.fit.intercept,
                     pred.gradient_exponent_eps});
  b.verdicts.push_back(
      relative_verdict("gradient_rate_slope", r.fit.slope, pred.gradient_exponent_eps, c.tolerance("rate", 0.07)));
}

void run_lower_bound(const ExperimentConfig& c, ReportBundle& b) {
  LowerBoundOptions opt;
  opt.j0 = param<int>(c, "j0", 1);
  opt.gamma = param<double>(c, "gamma", 0.9);
  opt.forcing = param<double>(c, "forcing", 0.25);
  opt.fit_r_min = param<double>(c, "fit_r_min", 0.02);
  opt.fit_r_max = param<double>(c, "fit_r_max", 0.5);
  opt.fit_points = param<int>(c, "fit_points", 24);
  opt.tol = param<double>(c, "solver_tol", 1e-10);
  const std::string boundary = param<std::string>(c, "boundary", "coordinate");
  if (boundary == "cos2") opt.boundary = [](double t) { return std::cos(2.0 * t); };
  else if (boundary != "coordinate") throw InputError("experiment.boundary must be coordinate or cos2 here");

  const LowerBoundResult r = lower_bound_experiment(c.weight, c.grid, opt);
  b.results["degenerate"] = r.degenerate;
  b.results["lambda1"] = r.lambda1;
  b.results["alpha"] = r.alpha;
  b.results["boundary_projection"] = r.boundary_projection;
  b.provenance["grid"] = grid_json(c.grid);
  if (r.degenerate) {
    b.results["note"] = r.note;
    b.verdicts.push_back(bound_verdict("boundary_projection_nonzero", std::abs(r.boundary_projection), 1e-8, false));
    return;
  }
  json fit = {{"C1", r.fit.C1}, {"C1_stderr", r.fit.C1_stderr}, {"correction", r.fit.correction},
              {"correction_stderr", r.fit.correction_stderr}, {"max_relative_residual", r.fit.max_relative_residual},
              {"count", r.fit.count}};
  if (r.fit.residual_exponent) fit["residual_exponent"] = *r.fit.residual_exponent;
  b.results["fit"] = fit;
  CsvTable t{{"r", "U"}, {}};
  for (std::size_t i = 0; i < r.r.size(); ++i) t.rows.push_back({r.r[i], r.U[i]});
  b.tables["lower_bound"] = t;
  if (std::all_of(r.U.begin(), r.U.end(), [](double u) { return u > 0.0; }))
    b.plots.push_back({"odd mode projection", "r", "U(r)", r.r, r.U, {}, {}, r.alpha});

  b.verdicts.push_back(bound_verdict("C1_positive", r.fit.C1, 0.0, false));
  b.verdicts.push_back(bound_verdict("C1_over_stderr", r.fit.C1_stderr > 0.0 ? r.fit.C1 / r.fit.C1_stderr : INFINITY,
                                     c.tolerance("c1_significance", 10.0), false));
  const double need = r.alpha + 0.5 * opt.gamma;
  b.verdicts.push_back(bound_verdict("residual_exponent", r.fit.residual_exponent.value_or(INFINITY), need, false));
}

void run_moser(const ExperimentConfig& c, ReportBundle& b) {
  const AngularWeight kappa = angular_weight(c.weight);
  const double sigma = param<double>(c, "sigma", 0.5);
  const std::vector<int> levels = param<std::vector<int>>(c, "levels", {128, 256, 512});
  const int n_theta = param<int>(c, "n_theta", 0);
  const std::string family = param<std::string>(c, "family", "power_x");
  const double m = c.weight.m;
  VectorField F;
  if (family == "power_x") {
    F = [sigma, m](double x, double y) { return std::array<double, 2>{std::pow(std::hypot(x, y), sigma + m), 0.0}; };
  } else if (family == "power_radial") {
    F = [sigma, m](double x, double y) {
      const double r = std::hypot(x, y);
      if (r == 0.0) return std::array<double, 2>{0.0, 0.0};
      const double s = std::pow(r, sigma + m) / r;
      return std::array<double, 2>{s * x, s * y};
    };
  } else if (family == "zero") {
    F = [](double, double) { return std::array<double, 2>{0.0, 0.0}; };
  } else {
    throw InputError("experiment.family must be power_x, power_radial or zero");
  }
  const MoserReport r = moser_sup_check(kappa, m, c.eps, sigma, levels, F, c.tolerance("moser", 0.1), n_theta);
  json lv = json::array();
  CsvTable t{{"n_r", "F_norm", "sup_v", "ratio"}, {}};
  for (const auto& l : r.levels) {
    lv.push_back({{"n_r", l.n_r}, {"F_norm", l.F_norm}, {"sup_v", l.sup_v}, {"ratio", l.ratio}});
    t.rows.push_back({static_cast<double>(l.n_r), l.F_norm, l.sup_v, l.ratio});
  }
  b.results["levels"] = lv;
  b.results["max_relative_change"] = r.max_relative_change;
  b.results["stable"] = r.stable;
  b.tables["moser"] = t;
  b.verdicts.push_back(bound_verdict("sup_ratio_relative_change", r.max_relative_change, r.tolerance, true));
}

void run_constants(const ExperimentConfig& c, ReportBundle& b) {
  const DerivedConstants k = derived_constants(c.weight);
  b.results["constants"] = {{"theta1", k.theta1}, {"theta2", k.theta2}, {"theta3", k.theta3},
                            {"c0", k.c0},         {"cbar0", k.cbar0},   {"varrho", k.varrho}};
  const int samples = param<int>(c, "samples", 10000);
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal;
  int violations = 0;
  double lo = INFINITY, hi = 0.0;
  const int dim = c.weight.dim();
  for (int s = 0; s < samples; ++s) {
    std::vector<double> xi(dim);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& v : xi) v = normal(rng), n2 += v * v;
    } while (n2 == 0.0);
    for (double& v : xi) v /= std::sqrt(n2);
    const double w = kappa_weight(c.weight, xi);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    if (w < k.varrho || w > k.theta1) ++violations;
  }
  b.results["sampled_kappa_min"] = lo;
  b.results["sampled_kappa_max"] = hi;
  b.results["samples"] = samples;
  b.verdicts.push_back(absolute_verdict("sandwich_violations", violations, 0.0, 0.0));
  b.verdicts.push_back(bound_verdict("cbar0_at_most_half", k.cbar0, 0.5, true));
  b.verdicts.push_back(bound_verdict("varrho_at_most_theta1", k.varrho, k.theta1, true));
}

void run_cube(const ExperimentConfig& c, ReportBundle& b) {
  if (!c.cube) throw InputError("cube experiment needs a [cube] table");
  const CubeSpec& cube = *c.cube;
  const CubeProfile prof = cube_profile(cube, c.weight.dim());
  b.results["kappabar"] = prof.kappabar;
  b.results["kappabar_formula"] = (std::pow(cube.r1, 1.0 - cube.m) + std::pow(cube.r2, 1.0 - cube.m)) / cube.m;
  b.results["remainder_bound"] = prof.remainder_bound;
  b.results["weight"] = weight_json(c.weight);
  b.results["exponents"] = exponent_json(predict_rates(c.weight));

  GapProfile gp;
  gp.eps = c.eps;
  gp.R0 = 0.25 * std::min(cube.r1, cube.r2);
  gp.h1 = prof.h1;
  gp.h2 = prof.h2;
  gp.gamma = param<double>(c, "gamma", 0.5);
  // Heights behave like unit multiples of |x|^m, so |grad h| <= m |x|^{m-1} is the natural scale.
  gp.tau1 = param<double>(c, "tau1", cube.m);
  gp.tau2 = param<double>(c, "tau2", 1e3);
  const int count = param<int>(c, "samples", 400);
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> pts;
  const double rmax = 2.0 * gp.R0 * 0.999;
  for (int s = 0; s < count; ++s) {
    const double t = 2.0 * std::numbers::pi * unit(rng);
    const double r = rmax * std::pow(10.0, -2.0 * unit(rng));
    Point x(c.weight.dim(), 0.0);
    x[0] = r * std::cos(t);
    x[1] = r * std::sin(t);
    pts.push_back(x);
  }
  const HConditionReport h = validate_H_conditions(gp, c.weight, pts);
  json hj = {{"max_gradient_ratio", h.max_gradient_ratio}, {"gradient_ok", h.gradient_ok},
             {"remainder_constant", h.remainder_constant}, {"remainder_ok", h.remainder_ok},
             {"c2_norm", h.c2_norm},                       {"c2_ok", h.c2_ok},
             {"sample_count", h.sample_count}};
  if (h.remainder_exponent) hj["remainder_exponent"] = *h.remainder_exponent;
  b.results["H_conditions"] = hj;
  b.verdicts.push_back(absolute_verdict("kappabar_formula", prof.kappabar, b.results["kappabar_formula"].get<double>(),
                                        1e-14));
  b.verdicts.push_back(bound_verdict("gradient_condition", h.max_gradient_ratio, gp.tau1, true));
  b.verdicts.push_back(bound_verdict("remainder_exponent", h.remainder_exponent.value_or(INFINITY),
                                     cube.m + gp.gamma - 0.05, false));
}

void write_csv(const CsvTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n' << std::setprecision(17);
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentKind parse_kind(const std::string& name) {
  std::string k = name;
  std::replace(k.begin(), k.end(), '-', '_');
  if (k == "exponents") return ExperimentKind::exponents;
  if (k == "eigensolve") return ExperimentKind::eigensolve;
  if (k == "decay") return ExperimentKind::decay;
  if (k == "rate_sweep") return ExperimentKind::rate_sweep;
  if (k == "lower_bound") return ExperimentKind::lower_bound;
  if (k == "moser") return ExperimentKind::moser;
  if (k == "constants") return ExperimentKind::constants;
  if (k == "cube") return ExperimentKind::cube;
  throw InputError("unknown experiment kind '" + name + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::exponents: return "exponents";
    case ExperimentKind::eigensolve: return "eigensolve";
    case ExperimentKind::decay: return "decay";
    case ExperimentKind::rate_sweep: return "rate_sweep";
    case ExperimentKind::lower_bound: return "lower_bound";
    case ExperimentKind::moser: return "moser";
    case ExperimentKind::constants: return "constants";
    case ExperimentKind::cube: return "cube";
  }
  return "unknown";
}

double ExperimentConfig::tolerance(const std::string& name, double fallback) const {
  const auto it = tolerances.find(name);
  return it == tolerances.end() ? fallback : it->second;
}

void ExperimentConfig::validate() const {
  weight.validate();
  if (cube) cube->validate();
  if (!(eps >= 0.0)) throw InputError("eps must be nonnegative");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw InputError("eps_list entries must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]) && !(eps_list[i] > eps_list[i - 1]))
      throw InputError("eps_list entries must be distinct");
    if (i > 1 && ((eps_list[i] > eps_list[i - 1]) != (eps_list[i - 1] > eps_list[i - 2])))
      throw InputError("eps_list must be sorted");
  }
  switch (kind) {
    case ExperimentKind::rate_sweep:
      if (eps_list.size() < 5) throw InputError("rate_sweep needs eps_list with at least 5 values");
      [[fallthrough]];
    case ExperimentKind::decay:
    case ExperimentKind::lower_bound:
      grid.validate();
      [[fallthrough]];
    case ExperimentKind::eigensolve:
    case ExperimentKind::moser:
      if (weight.d != 3) throw UnsupportedError(to_string(kind) + " is implemented for d = 3");
      break;
    case ExperimentKind::cube:
      if (!cube) throw InputError("cube experiment needs a [cube] table");
      break;
    default:
      break;
  }
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InputError("config must be a table/object");
  ExperimentConfig c;
  try {
    if (!doc.contains("kind")) throw InputError("config needs 'kind'");
    c.kind = parse_kind(doc.at("kind").get<std::string>());
    c.seed = doc.value("seed", std::uint64_t{1});
    c.output_dir = doc.value("output_dir", std::string());
    c.eps = doc.value("eps", 0.0);
    if (doc.contains("eps_list")) c.eps_list = doc.at("eps_list").get<std::vector<double>>();
    if (doc.contains("cube")) {
      const auto& j = doc.at("cube");
      CubeSpec cube;
      cube.r1 = j.value("r1", 1.0);
      cube.r2 = j.value("r2", 1.0);
      cube.m = j.value("m", 2.0);
      cube.validate();
      c.cube = cube;
      c.weight = cube_weight_spec(cube, j.value("d", 3));
    }
    if (doc.contains("weight")) {
      if (c.cube) throw InputError("give either [weight] or [cube], not both");
      const auto& j = doc.at("weight");
      WeightSpec w;
      w.d = j.value("d", 3);
      w.m = j.value("m", 2.0);
      w.kappa0 = j.value("kappa0", 1.0);
      w.kappa = j.value("kappa", std::vector<double>(w.d - 1, 1.0));
      w.setA = j.value("setA", std::vector<int>{});
      if (j.contains("setB")) {
        w.setB = j.at("setB").get<std::vector<int>>();
      } else {
        for (int i = 1; i <= w.d - 1; ++i)
          if (std::find(w.setA.begin(), w.setA.end(), i) == w.setA.end()) w.setB.push_back(i);
      }
      c.weight = w;
    }
    if (doc.contains("grid")) {
      const auto& j = doc.at("grid");
      c.grid.n_r = j.value("n_r", c.grid.n_r);
      c.grid.n_theta = j.value("n_theta", c.grid.n_theta);
      c.grid.R0 = j.value("R0", c.grid.R0);
    }
    if (doc.contains("tolerances"))
      for (const auto& [k, v] : doc.at("tolerances").items()) c.tolerances[k] = v.get<double>();
    if (doc.contains("experiment")) c.params = doc.at("experiment");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

bool ReportBundle::all_passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
}

nlohmann::json ReportBundle::to_json() const {
  json v = json::array();
  for (const auto& x : verdicts)
    v.push_back({{"name", x.name}, {"passed", x.passed}, {"observed", x.observed}, {"predicted", x.predicted},
                 {"tolerance", x.tolerance}, {"comparison", x.comparison}});
  return {{"kind", to_string(kind)}, {"config", config_echo}, {"results", results},
          {"verdicts", v},           {"provenance", provenance}, {"all_passed", all_passed()}};
}

ReportBundle run_experiment(const ExperimentConfig& config) {
  config.validate();
  ReportBundle b;
  b.kind = config.kind;
  b.config_echo = {{"kind", to_string(config.kind)}, {"weight", weight_json(config.weight)},
                   {"grid", grid_json(config.grid)}, {"eps", config.eps},
                   {"eps_list", config.eps_list},    {"seed", config.seed},
                   {"tolerances", config.tolerances}, {"experiment", config.params}};
  if (config.cube)
    b.config_echo["cube"] = {{"r1", config.cube->r1}, {"r2", config.cube->r2}, {"m", config.cube->m}};
  const auto t0 = Clock::now();
  try {
    switch (config.kind) {
      case ExperimentKind::exponents: run_exponents(config, b); break;
      case ExperimentKind::eigensolve: run_eigensolve(config, b); break;
      case ExperimentKind::decay: run_decay(config, b); break;
      case ExperimentKind::rate_sweep: run_rate_sweep(config, b); break;
      case ExperimentKind::lower_bound: run_lower_bound(config, b); break;
      case ExperimentKind::moser: run_moser(config, b); break;
      case ExperimentKind::constants: run_constants(config, b); break;
      case ExperimentKind::cube: run_cube(config, b); break;
    }
  } catch (const Error& e) {
    throw std::runtime_error(to_string(config.kind) + " experiment failed: " + e.what());
  }
  b.timings["total_seconds"] = seconds_since(t0);
  return b;
}

std::vector<std::filesystem::path> write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  {
    const auto path = dir / "report.json";
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << bundle.to_json().dump(2) << '\n';
    written.push_back(path);
  }
  {
    const auto path = dir / "metadata.json";
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << json{{"timings", bundle.timings}}.dump(2) << '\n';
    written.push_back(path);
  }
  for (const auto& [stem, table] : bundle.tables) {
    const auto path = dir / (stem + ".csv");
    write_csv(table, path);
    written.push_back(path);
  }
  for (const auto& p : emit_plots(bundle, dir)) written.push_back(p);
  return written;
}

std::string format_summary(const ReportBundle& bundle) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "experiment: " << to_string(bundle.kind) << '\n';
  for (const auto& [key, value] : bundle.results.items()) {
    if (value.is_primitive()) {
      os << "  " << std::left << std::setw(30) << key << ' ' << value.dump() << '\n';
    } else if (value.is_object()) {
      for (const auto& [k2, v2] : value.items())
        if (v2.is_primitive()) os << "  " << std::left << std::setw(30) << (key + "." + k2) << ' ' << v2.dump() << '\n';
    }
  }
  for (const auto& v : bundle.verdicts) {
    os << (v.passed ? "PASS " : "FAIL ") << v.name << ": observed " << v.observed << ", predicted " << v.predicted;
    if (v.tolerance > 0.0) os << ", tolerance " << v.tolerance;
    os << " (" << v.comparison << ")\n";
  }
  return os.str();
}

}  // namespace gapgrad
