#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "armtest/io.hpp"
#include "armtest/perception.hpp"
#include "armtest/scene.hpp"
#include "armtest/search.hpp"
#include "armtest/simulator.hpp"

namespace armtest {

struct DatasetConfig {
  int count = 1200;
  std::uint64_t seed = 7;
  double train_fraction = 0.8;
  ParameterRanges ranges;  // rotation narrower than the search space
};

struct StatsConfig {
  int permutations = kDefaultPermutations;
  std::uint64_t seed = 0;
};

struct Config {
  std::string profile = "uc1-suction";
  ParameterRanges ranges;
  WorkspaceConfig workspace;
  RequirementThresholds thresholds;
  SyntheticPerceptionParams perception;
  SearchConfig search;
  DatasetConfig dataset;
  StatsConfig stats;
  double repair_learning_rate = kDefaultLearningRate;

  // Throws ConfigError naming the first offending section.
  void validate() const;
};

inline constexpr std::string_view kProfileUc1 = "uc1-suction";
inline constexpr std::string_view kProfileUc2 = "uc2-parallel";

// The operating model shipped with both profiles.
SyntheticPerceptionParams default_operating_model();

// Built-in profile; throws ConfigError for an unknown name.
Config profile_config(std::string_view name);

json config_to_json(const Config& c);
// Overlays `patch` on the defaults of the profile named in the patch (or
// `profile` when the patch names none). Unknown keys are rejected.
Config config_from_json(const json& patch, std::string_view profile = kProfileUc1);

// Sections, `key = value` pairs with numbers, booleans, quoted strings and
// flat arrays, `#` comments, and `[[section]]` arrays of tables.
json parse_toml_subset(std::string_view text);

Config load_config(const std::filesystem::path& path, std::string_view profile = {});

}  // namespace armtest
