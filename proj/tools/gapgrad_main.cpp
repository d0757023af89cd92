// gapgrad <kind> --config <file> [--json] [--out <dir>]
// Exit status: 0 all verdicts pass, 1 some verdict fails, 2 input or runtime error.

#include <iostream>

#include "CLI11.hpp"

#include "gapgrad/config.hpp"
#include "gapgrad/error.hpp"
#include "gapgrad/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gradient estimates for degenerate weights: experiment runner"};
  std::string kind;
  std::string config_path;
  std::string out_dir;
  bool as_json = false;
  app.add_option("kind", kind,
                 "exponents | eigensolve | decay | rate-sweep | lower-bound | moser | constants | cube")
      ->required();
  app.add_option("-c,--config", config_path, "TOML or JSON experiment file");
  app.add_option("-o,--out", out_dir, "write report.json, CSV and SVG files here");
  app.add_flag("--json", as_json, "print the report as JSON instead of a summary");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : gapgrad::load_config_file(config_path);
    const gapgrad::ExperimentKind requested = gapgrad::parse_kind(kind);
    if (doc.contains("kind") && gapgrad::parse_kind(doc.at("kind").get<std::string>()) != requested)
      throw gapgrad::InputError("config kind '" + doc.at("kind").get<std::string>() + "' does not match '" + kind +
                                "'");
    doc["kind"] = gapgrad::to_string(requested);
    const gapgrad::ExperimentConfig config = gapgrad::config_from_json(doc);
    const gapgrad::ReportBundle bundle = gapgrad::run_experiment(config);

    const std::filesystem::path dir = !out_dir.empty() ? std::filesystem::path(out_dir) : config.output_dir;
    if (!dir.empty()) gapgrad::write_bundle(bundle, dir);
    if (as_json) std::cout << bundle.to_json().dump(2) << '\n';
    else std::cout << gapgrad::format_summary(bundle);
    return bundle.all_passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
