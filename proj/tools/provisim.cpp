// provisim: run, compare, sweep and replay provisioning experiments.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "provisim/experiment.hpp"

namespace {

void add_common(CLI::App* cmd, provisim::CommonOptions& opts) {
  cmd->add_option("--set", opts.sets, "Override a scenario key (key=value), repeatable");
  cmd->add_option("--out", opts.out, "Output directory (overrides run.out)");
  cmd->add_option("--seed", opts.seed, "Workload seed (overrides workload.seed)");
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  for (auto item : provisim::detail::split(s, ',')) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust dynamic CPU provisioning simulator"};
  app.require_subcommand(1);

  provisim::CommonOptions opts;
  std::string scenario, trace, filters = "kalman,hinf,mcc", topologies = "siso,mimo", param, values;
  std::optional<std::string> replay_scenario;

  auto* run = app.add_subcommand("run", "Run one scenario and write trace.csv, metrics.csv, timeline.svg");
  run->add_option("scenario", scenario, "Scenario file")->required();
  add_common(run, opts);

  auto* compare = app.add_subcommand("compare", "Run several controllers on one workload");
  compare->add_option("scenario", scenario, "Scenario file")->required();
  compare->add_option("--filters", filters, "Comma-separated filters (kalman,hinf,mcc)");
  compare->add_option("--topologies", topologies, "Comma-separated topologies (siso,mimo)");
  add_common(compare, opts);

  auto* sweep = app.add_subcommand("sweep", "Sweep one controller parameter");
  sweep->add_option("scenario", scenario, "Scenario file")->required();
  sweep->add_option("--param", param, "Parameter: c, theta, sigma or T")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  add_common(sweep, opts);

  auto* replay = app.add_subcommand("replay", "Replay recorded observations through a controller");
  replay->add_option("trace", trace, "Trace CSV")->required();
  replay->add_option("--scenario", replay_scenario, "Scenario file supplying the controller settings");
  add_common(replay, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return provisim::kExitUsage;
  }

  if (run->parsed()) return provisim::cmd_run(scenario, opts, std::cout, std::cerr);
  if (compare->parsed()) {
    return provisim::cmd_compare(scenario, opts, split_names(filters), split_names(topologies), std::cout,
                                 std::cerr);
  }
  if (sweep->parsed()) {
    provisim::Vec vals;
    try {
      for (const auto& v : split_names(values)) vals.push_back(provisim::detail::parse_double(v, "--values"));
    } catch (const provisim::UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return provisim::kExitUsage;
    }
    return provisim::cmd_sweep(scenario, opts, param, vals, std::cout, std::cerr);
  }
  return provisim::cmd_replay(trace, replay_scenario, opts, std::cout, std::cerr);
}
