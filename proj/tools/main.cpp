#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cascade/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "cascade_forward: forwarding-controller synthesis, simulation and "
      "stability audits for transport/ODE cascades"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string trace_path;
  std::string controller_path;
  std::string grids_arg = "100,200,400";
  std::string probe_method;
  int probe_modes = 16;
  cascade::cli::RunOptions options;
  std::string out_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_flag("--lenient", options.lenient,
                  "warn on unknown scenario keys instead of rejecting");
    cmd->add_option("--seed", options.seed,
                    "seed for sampling-based validation");
  };

  CLI::App* run_cmd =
      app.add_subcommand("run", "check, synthesize, simulate and audit");
  run_cmd->add_option("scenario", scenario_path, "scenario file")
      ->required();
  run_cmd->add_flag("--force", options.force,
                    "continue even if the standing assumptions fail");
  run_cmd->add_flag("--sabotage", options.sabotage,
                    "flip the feedback sign (audit falsification hook)");
  run_cmd->add_option("--profiles", options.profiles,
                      "dump this many w profiles to profiles.txt");
  add_common(run_cmd);

  CLI::App* converge_cmd =
      app.add_subcommand("converge", "grid-refinement convergence study");
  converge_cmd->add_option("scenario", scenario_path, "scenario file")
      ->required();
  converge_cmd->add_option("--grids", grids_arg,
                           "comma-separated ascending cell counts");
  add_common(converge_cmd);

  CLI::App* audit_cmd =
      app.add_subcommand("audit", "re-run the decay audit from a trace.csv");
  audit_cmd->add_option("trace", trace_path, "trace.csv produced by run")
      ->required();
  audit_cmd->add_option("--controller", controller_path,
                        "controller.txt (default: next to the trace)");
  add_common(audit_cmd);

  CLI::App* probe_cmd = app.add_subcommand(
      "probe", "observability pairing table over transport eigenmodes");
  probe_cmd->add_option("scenario", scenario_path, "scenario file")
      ->required();
  probe_cmd->add_option("--modes", probe_modes, "mode cap K (probes -K..K)");
  probe_cmd->add_option("--method", probe_method,
                        "gain route for the probe (default bvp)");
  add_common(probe_cmd);

  CLI11_PARSE(app, argc, argv);
  options.out_dir = out_dir;

  if (run_cmd->parsed()) {
    return cascade::cli::cmd_run(scenario_path, options);
  }
  if (converge_cmd->parsed()) {
    std::vector<int> grids;
    std::stringstream ss(grids_arg);
    std::string token;
    while (std::getline(ss, token, ',')) {
      try {
        grids.push_back(std::stoi(token));
      } catch (...) {
        std::cerr << "config error: bad grid list '" << grids_arg << "'\n";
        return cascade::cli::kExitConfig;
      }
    }
    return cascade::cli::cmd_converge(scenario_path, grids, options);
  }
  if (audit_cmd->parsed()) {
    return cascade::cli::cmd_audit(trace_path, controller_path, options);
  }
  if (probe_cmd->parsed()) {
    return cascade::cli::cmd_probe(scenario_path, probe_modes, probe_method,
                                   options);
  }
  return cascade::cli::kExitConfig;
}
