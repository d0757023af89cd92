#pragma once

// Experiment orchestration: config -> module calls -> report bundle with
// verdicts, CSV tables and SVG plots.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gapgrad/geometry.hpp"
#include "gapgrad/solver.hpp"

namespace gapgrad {

enum class ExperimentKind { exponents, eigensolve, decay, rate_sweep, lower_bound, moser, constants, cube };

/// Accepts both "rate_sweep" and "rate-sweep" spellings.
ExperimentKind parse_kind(const std::string& name);
std::string to_string(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::exponents;
  WeightSpec weight = WeightSpec::power_sum(3, 2.0);
  std::optional<CubeSpec> cube;  // when present, the weight is the cube weight
  PolarGrid grid{256, 256, 1.0};
  double eps = 0.0;
  std::vector<double> eps_list;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  std::map<std::string, double> tolerances;
  nlohmann::json params = nlohmann::json::object();  // kind-specific keys from [experiment]

  /// Throws InputError for missing or inconsistent kind-specific fields.
  void validate() const;
  double tolerance(const std::string& name, double fallback) const;
};

/// Builds a config from parsed TOML/JSON. Keys: kind, seed, output_dir,
/// [weight] {d, m, kappa0, kappa, setA, setB}, [cube] {r1, r2, m},
/// [grid] {n_r, n_theta, R0}, eps, eps_list, [tolerances], [experiment].
ExperimentConfig config_from_json(const nlohmann::json& doc);

struct Verdict {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double predicted = 0.0;
  double tolerance = 0.0;
  std::string comparison;  // how observed is compared with predicted
};

struct PlotSeries {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  std::optional<double> fitted_slope;
  std::optional<double> fitted_intercept;
  std::optional<double> predicted_slope;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ReportBundle {
  ExperimentKind kind = ExperimentKind::exponents;
  nlohmann::json config_echo;
  nlohmann::json results = nlohmann::json::object();
  std::vector<Verdict> verdicts;
  nlohmann::json provenance = nlohmann::json::object();  // grids, residuals, iterations
  std::map<std::string, double> timings;                  // seconds; kept out of report.json
  std::vector<PlotSeries> plots;
  std::map<std::string, CsvTable> tables;                 // file stem -> table

  bool all_passed() const;
  /// Deterministic report (no timings).
  nlohmann::json to_json() const;
};

ReportBundle run_experiment(const ExperimentConfig& config);

/// Writes report.json, metadata.json (timings), one CSV per table and the SVG
/// plots. Returns the written paths.
std::vector<std::filesystem::path> write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir);

/// One SVG per plot series; an empty bundle writes nothing.
std::vector<std::filesystem::path> emit_plots(const ReportBundle& bundle, const std::filesystem::path& dir);

/// SVG text for one series (log-log axes, fitted line, predicted-slope guide).
std::string render_svg(const PlotSeries& series);

/// Human-readable summary: results table and verdict lines.
std::string format_summary(const ReportBundle& bundle);

}  // namespace gapgrad
