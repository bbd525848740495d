// segdyn: run one pipeline stage from a JSON config.
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "segdyn/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"segment description of chaotic flows"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", segdyn::kToolVersion);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> jobs;
  bool check = false;
  std::vector<std::string> sets;

  const std::map<std::string, std::string> blurbs{
      {"calibrate", "collocate centers, calibrate radii, build the cover"},
      {"segments", "integrate one segment per cell, compute M_d"},
      {"transitions", "sample Gamma, p, tensors and predicates"},
      {"encode", "draw initial points and encode their orbits"},
      {"shadow", "check pseudo-orbit shadowing and commutation"},
      {"enumerate", "enumerate admissible words"},
      {"entropy", "cell measure, metric and KS entropies"},
      {"bounds", "quantity bounds over reachable sets"},
      {"report", "collect everything into report.json"}};
  for (const auto& name : segdyn::stage_names()) {
    auto* sub = app.add_subcommand(name, blurbs.at(name));
    sub->add_option("--config", config, "pipeline configuration (JSON)")->required();
    sub->add_option("--seed", seed, "override rng_seed");
    sub->add_option("--out", out, "override output_dir");
    sub->add_option("--jobs", jobs, "worker threads (0 = all cores)");
    sub->add_flag("--check", check, "re-validate existing artifacts only");
    sub->add_option("--set", sets, "override a config field, e.g. --set calibration.rel_tol=0.01");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string stage = app.get_subcommands().front()->get_name();

  if (seed) sets.push_back("rng_seed=" + std::to_string(*seed));
  if (out) sets.push_back("output_dir=" + segdyn::io::json(*out).dump());
  if (jobs) sets.push_back("jobs=" + std::to_string(*jobs));
  const auto cfg = segdyn::load_config(config, sets);

  const auto result = check ? segdyn::check_stage(stage, cfg) : segdyn::run_stage(stage, cfg);
  std::cout << result.summary << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const segdyn::ValidationError& e) {
    std::cerr << "segdyn: " << e.what() << '\n';
    return 1;
  } catch (const segdyn::MissingArtifactError& e) {
    std::cerr << "segdyn: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "segdyn: " << e.what() << '\n';
    return 2;
  }
}
