#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gapgrad/config.hpp"
#include "gapgrad/error.hpp"
#include "gapgrad/exponents.hpp"
#include "gapgrad/geometry.hpp"
#include "gapgrad/harness.hpp"
#include "gapgrad/parallel.hpp"

using namespace gapgrad;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gapgrad_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig from_toml(const std::string& text) { return config_from_json(parse_toml(text)); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GAPGRAD_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("parse_toml: tables, arrays, numbers and errors") {
  const auto j = parse_toml(R"(
kind = "decay"   # trailing comment
seed = 7
eps_list = [1e-2, 1e-3,
            1e-4]
[weight]
d = 3
m = 4.0
setB = [1, 2]
[experiment]
boundary = "eigenmode"
flag = true
)");
  CHECK(j["kind"] == "decay");
  CHECK(j["seed"] == 7);
  CHECK(j["eps_list"].size() == 3);
  CHECK(j["weight"]["m"] == 4.0);
  CHECK(j["experiment"]["flag"] == true);
  CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), InputError);
  CHECK_THROWS_AS(parse_toml("a = [1, 2\n"), InputError);
  CHECK_THROWS_AS(parse_toml("= 3\n"), InputError);
}

TEST_CASE("config_from_json: kinds, cube weights and validation") {
  CHECK(parse_kind("rate-sweep") == ExperimentKind::rate_sweep);
  CHECK(parse_kind("lower_bound") == ExperimentKind::lower_bound);
  CHECK_THROWS_AS(parse_kind("nonsense"), InputError);
  for (auto k : {ExperimentKind::exponents, ExperimentKind::eigensolve, ExperimentKind::decay,
                 ExperimentKind::rate_sweep, ExperimentKind::lower_bound, ExperimentKind::moser,
                 ExperimentKind::constants, ExperimentKind::cube})
    CHECK(parse_kind(to_string(k)) == k);

  const auto c = from_toml("kind = \"constants\"\n[cube]\nr1 = 1.0\nr2 = 1.0\nm = 4.0\n");
  REQUIRE(c.cube);
  CHECK(c.weight.kappa[0] == doctest::Approx(0.5));
  CHECK(c.weight.setB.size() == 2);

  CHECK_THROWS_AS(from_toml("kind = \"rate_sweep\"\neps_list = [0.1, 0.01]\n"), InputError);
  CHECK_THROWS_AS(from_toml("kind = \"decay\"\neps = -1.0\n"), InputError);
  CHECK_THROWS_AS(from_toml("kind = \"decay\"\n[weight]\nd = 4\nm = 2.0\n"), UnsupportedError);
  CHECK_THROWS_AS(from_toml("kind = \"cube\"\n"), InputError);
  CHECK_THROWS_AS(from_toml("kind = \"exponents\"\n[weight]\nm = \"two\"\n"), InputError);
  CHECK_THROWS_AS(from_toml("seed = 1\n"), InputError);
}

TEST_CASE("run_experiment: exponents report for the constant weight") {
  const auto b = run_experiment(from_toml("kind = \"exponents\"\n[weight]\nsetA = [1, 2]\n"));
  const double alpha = b.results["exponents"]["alpha"].get<double>();
  CHECK(std::abs(alpha - (std::sqrt(2.0) - 1.0)) <= 1e-12);
  CHECK(b.results["exponents"]["gradient_exponent_eps"].get<double>() ==
        doctest::Approx((std::sqrt(2.0) - 2.0) / 2.0));
  CHECK(b.all_passed());
}

TEST_CASE("run_experiment: constants table matches the geometry module") {
  const auto c = from_toml("kind = \"constants\"\nseed = 3\n[cube]\nr1 = 1.0\nr2 = 1.0\nm = 4.0\n");
  const auto b = run_experiment(c);
  const auto k = derived_constants(c.weight);
  CHECK(b.results["constants"]["theta1"].get<double>() == k.theta1);
  CHECK(b.results["constants"]["theta3"].get<double>() == k.theta3);
  CHECK(b.results["constants"]["cbar0"].get<double>() == k.cbar0);
  CHECK(b.all_passed());
}

TEST_CASE("run_experiment: decay with constant weight passes and predictions are re-derived") {
  const auto c = from_toml(R"(
kind = "decay"
[weight]
setA = [1, 2]
[grid]
n_r = 256
n_theta = 256
)");
  const auto b = run_experiment(c);
  REQUIRE(b.verdicts.size() == 1);
  CHECK(b.verdicts[0].passed);
  CHECK(b.verdicts[0].predicted == predict_rates(c.weight).alpha);
  CHECK(b.plots.size() == 1);
  CHECK(b.tables.count("decay") == 1);
}

TEST_CASE("determinism: identical configs give byte-identical reports") {
  const std::string text = R"(
kind = "lower-bound"
seed = 11
[weight]
setA = [1, 2]
[grid]
n_r = 128
n_theta = 128
)";
  const auto a = run_experiment(from_toml(text));
  const auto b = run_experiment(from_toml(text));
  const auto da = scratch_dir("det_a"), db = scratch_dir("det_b");
  write_bundle(a, da);
  write_bundle(b, db);
  CHECK(slurp(da / "report.json") == slurp(db / "report.json"));
  CHECK(slurp(da / "lower_bound.csv") == slurp(db / "lower_bound.csv"));
  CHECK(slurp(da / "report.json").find("seconds") == std::string::npos);
  CHECK(slurp(da / "metadata.json").find("total_seconds") != std::string::npos);

  const auto c1 = run_experiment(from_toml("kind = \"constants\"\nseed = 5\n"));
  const auto c2 = run_experiment(from_toml("kind = \"constants\"\nseed = 5\n"));
  CHECK(c1.to_json().dump() == c2.to_json().dump());
}

TEST_CASE("emit_plots: empty bundle is a no-op, series render as SVG") {
  const auto dir = scratch_dir("plots");
  ReportBundle empty;
  CHECK(emit_plots(empty, dir).empty());
  CHECK(fs::is_empty(dir));

  ReportBundle b;
  b.plots.push_back({"rate sweep", "eps", "max |grad v|", {1e-4, 1e-3, 1e-2}, {10, 5, 2.5}, -0.3, 0.0, -0.29289});
  const auto files = emit_plots(b, dir);
  REQUIRE(files.size() == 1);
  const std::string svg = slurp(files[0]);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("predicted slope -0.29289") != std::string::npos);
  CHECK(svg.find("fitted slope -0.3") != std::string::npos);
  CHECK(svg.find("&lt;") == std::string::npos);
  PlotSeries bad{"neg", "x", "y", {-1.0}, {-1.0}, {}, {}, {}};
  CHECK_THROWS_AS(render_svg(bad), InputError);
}

TEST_CASE("format_summary lists every verdict") {
  ReportBundle b;
  b.verdicts.push_back({"one", true, 1.0, 1.0, 0.1, "relative error"});
  b.verdicts.push_back({"two", false, 2.0, 1.0, 0.1, "relative error"});
  const auto s = format_summary(b);
  CHECK(s.find("PASS one") != std::string::npos);
  CHECK(s.find("FAIL two") != std::string::npos);
  CHECK_FALSE(b.all_passed());
}

TEST_CASE("parallel_for: every index once, first exception rethrown") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK(thread_count() >= 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
    if (i == 3) throw DomainError("boom");
  }), DomainError);
}

TEST_CASE("CLI: exit codes and outputs") {
  const auto dir = scratch_dir("cli");
  const auto pass_cfg = dir / "pass.toml";
  std::ofstream(pass_cfg) << "kind = \"exponents\"\n[weight]\nsetA = [1, 2]\n";
  CHECK(run_cli("exponents --config " + pass_cfg.string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(run_cli("exponents --json --config " + pass_cfg.string()) == 0);

  const auto fail_cfg = dir / "fail.toml";
  std::ofstream(fail_cfg) << "kind = \"decay\"\n[weight]\nsetA = [1, 2]\n[grid]\nn_r = 64\nn_theta = 64\n"
                             "[tolerances]\ndecay = 1e-9\n";
  CHECK(run_cli("decay --config " + fail_cfg.string()) == 1);

  CHECK(run_cli("decay --config " + (dir / "missing.toml").string()) == 2);
  CHECK(run_cli("exponents --config " + fail_cfg.string()) == 2);  // kind mismatch
  CHECK(run_cli("nonsense") == 2);
  CHECK(run_cli("") == 2);
}
