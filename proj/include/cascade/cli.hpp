#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cascade/verify.hpp"

namespace cascade::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;      // invalid scenario or flags
inline constexpr int kExitAssumption = 3;  // standing assumptions failed
inline constexpr int kExitNumerical = 4;   // NaN abort or singular solve

struct ParsedScenario {
  ScenarioSpec spec;
  std::vector<std::string> warnings;
};

/// Parses the key = value sectioned scenario format. Strict mode rejects
/// unknown keys; lenient mode downgrades them to warnings.
ParsedScenario parse_scenario(const std::filesystem::path& path,
                              bool lenient = false);
ParsedScenario parse_scenario_text(const std::string& text,
                                   bool lenient = false,
                                   const std::string& origin = "<inline>");

/// Canonical serialization; parsing it back yields an equivalent scenario.
std::string serialize_scenario(const ScenarioSpec& spec);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: env CASCADE_FORWARD_OUT or ./out
  bool force = false;
  bool lenient = false;
  bool sabotage = false;
  std::uint64_t seed = 0;
  int profiles = 0;  // when > 0, dump this many w profiles to profiles.txt
};

/// --out flag, else CASCADE_FORWARD_OUT, else ./out.
std::filesystem::path resolve_out_dir(const RunOptions& options);

/// check -> synthesize -> simulate -> audit; writes trace.csv,
/// controller.txt and audits.txt under the output directory.
int cmd_run(const std::filesystem::path& scenario_path,
            const RunOptions& options);

/// Grid-refinement study; writes convergence.csv and convergence.txt.
int cmd_converge(const std::filesystem::path& scenario_path,
                 const std::vector<int>& grids, const RunOptions& options);

/// Re-runs the decay checks from an exported trace.csv (plus the grid
/// spacing recorded in controller.txt); writes reaudit.txt.
int cmd_audit(const std::filesystem::path& trace_csv,
              const std::filesystem::path& controller_txt,
              const RunOptions& options);

/// Observability pairing table over transport eigenmodes; writes probe.csv.
int cmd_probe(const std::filesystem::path& scenario_path, int modes,
              const std::string& method_override, const RunOptions& options);

void write_trace_csv(std::ostream& os, const SimulationTrace& trace);

}  // namespace cascade::cli
