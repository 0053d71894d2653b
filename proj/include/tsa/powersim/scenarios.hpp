#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsa/dataset.hpp"
#include "tsa/powersim/case.hpp"

namespace tsa::powersim {

struct ScenarioConfig {
  std::vector<double> load_levels;  // fractions of the base load
  int dispatches_per_level = 5;
  std::vector<int> fault_buses;     // bus ids
  double t_clear = 0.1;
  double horizon = 5.0;
  double dt = 0.005;
  std::uint64_t seed = 1;
  double share_low = 0.5;   // dispatch share multiplier range
  double share_high = 1.5;

  void validate() const;
};

ScenarioConfig parse_scenarios(const std::string& json_text);
ScenarioConfig load_scenarios(const std::filesystem::path& path);

struct ScenarioInfo {
  double load_level = 0.0;
  int dispatch = 0;
  int fault_bus = 0;
};

struct SkippedScenario {
  ScenarioInfo scenario;
  std::string reason;
};

struct GeneratedData {
  Dataset data;                      // rows in level x dispatch x fault order
  std::vector<ScenarioInfo> rows;
  std::vector<SkippedScenario> skipped;
};

/// Case with loads scaled by `level` and generator set points redrawn for
/// dispatch number `dispatch`. Deterministic in (seed, level index, dispatch).
PowerCase dispatch_case(const PowerCase& base, const ScenarioConfig& cfg, std::size_t level_index,
                        int dispatch);

/// Simulates every scenario of the grid. Throws DataError if none is feasible.
GeneratedData generate_dataset(const PowerCase& base, const ScenarioConfig& cfg,
                               unsigned threads = 1);

std::string skipped_to_json(const std::vector<SkippedScenario>& skipped);

}  // namespace tsa::powersim
