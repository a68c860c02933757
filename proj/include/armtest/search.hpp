#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "armtest/perception.hpp"
#include "armtest/rng.hpp"
#include "armtest/scene.hpp"
#include "armtest/simulator.hpp"

namespace armtest {

enum class Strategy { ga, rs };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct SearchConfig {
  int population_size = 40;
  int eval_budget = 220;
  double p_cross = 0.9;
  double p_mut = 0.4;
  double dup_threshold = 0.1;
  double w1 = 0.5;
  double w2 = 0.5;
  double k_p = 0.01;
  double k_r = 1.0;
  Strategy strategy = Strategy::ga;
  std::uint64_t seed = 0;
  int run = 0;

  bool valid() const;
  bool operator==(const SearchConfig&) const = default;
};

// Fitness assigned to offspring that violate the scene constraints.
inline constexpr double kPenaltyFitness = -1.0;

// Deviations charged for a box that was never detected.
struct FitnessCaps {
  double position_cap = 0.0;  // camera FOV diagonal, meters
  double rotation_cap = 0.0;  // rotation range width, degrees
};

FitnessCaps fitness_caps(const ParameterRanges& ranges, const WorkspaceConfig& workspace);

// F = (w1 / k_p) * max_n |p_n - p'_n| + (w2 / k_r) * max_n |r_n - r'_n|
double fitness(const TestRecord& record, const SearchConfig& config, const FitnessCaps& caps);

// ---- variation operators ----

std::pair<Chromosome, Chromosome> crossover_one_point(const Chromosome& a, const Chromosome& b,
                                                      Rng& rng);

// Scales k random distinct genes by 1.1 or 0.9, k uniform in [1, len];
// the result is clamped to the ranges.
Chromosome mutate_rm(const Chromosome& chromosome, const ParameterRanges& ranges, Rng& rng);

inline constexpr int kReplaceAttempts = 100;

// Resamples one box pose until it clears every other box; returns the input
// unchanged if no collision-free pose turns up.
Chromosome mutate_replace(const Chromosome& chromosome, const ParameterRanges& ranges,
                          const WorkspaceConfig& workspace, Rng& rng);

// ---- duplicate removal ----

using Embedding = std::function<std::vector<double>(const Chromosome&)>;

// Genes rescaled to [-1, 1] over their ranges. Raw genes are dominated by
// the luminosity gene, which would make every pair a near-duplicate.
std::vector<double> normalized_genes(const Chromosome& chromosome, const ParameterRanges& ranges);
Embedding range_embedding(const ParameterRanges& ranges);

// Genes rescaled to [0, 1] over their ranges; the feature space used for
// sparseness.
std::vector<double> unit_genes(const Chromosome& chromosome, const ParameterRanges& ranges);
Embedding identity_embedding();

// Greedy scan in population order. An individual closer than `threshold`
// (cosine distance) to one already kept is dropped, or replaced by
// refill() when a refill source is supplied.
std::vector<Chromosome> dedup(std::vector<Chromosome> population, double threshold,
                              const Embedding& embed,
                              const std::function<Chromosome()>& refill = {});

// ---- evaluation ----

struct EvaluationContext {
  const ParameterRanges& ranges;
  const WorkspaceConfig& workspace;
  PerceptionModel& perception;
  const RequirementThresholds& thresholds;
  const SearchConfig& config;
};

// One episode per chromosome with the matching seed; fitness filled in.
// Runs across the worker pool when the perception model allows it.
std::vector<TestRecord> evaluate_population(std::span<const Chromosome> population,
                                            std::span<const std::uint64_t> seeds,
                                            const EvaluationContext& ctx);

// Reference single-threaded evaluation.
std::vector<TestRecord> evaluate_population_serial(std::span<const Chromosome> population,
                                                   std::span<const std::uint64_t> seeds,
                                                   const EvaluationContext& ctx);

// Seed of the i-th evaluated episode of a run.
std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t eval_index);

// ---- strategies ----

struct Archive {
  std::vector<TestRecord> records;

  std::vector<const TestRecord*> with_outcome(Outcome o) const;
  std::size_t count(Outcome o) const;
};

// Index of the selected parent.
using SelectionOperator = std::function<std::size_t(std::span<const double> fitness, Rng& rng)>;

// Two uniform picks, higher fitness wins, lower index on ties.
std::size_t binary_tournament(std::span<const double> fitness, Rng& rng);

Archive run_ga(const SearchConfig& config, const ParameterRanges& ranges,
               const WorkspaceConfig& workspace, PerceptionModel& perception,
               const RequirementThresholds& thresholds, const std::string& manifest = {},
               const SelectionOperator& select = binary_tournament);

Archive run_rs(const SearchConfig& config, const ParameterRanges& ranges,
               const WorkspaceConfig& workspace, PerceptionModel& perception,
               const RequirementThresholds& thresholds, const std::string& manifest = {});

// Dispatches on config.strategy.
Archive run_search(const SearchConfig& config, const ParameterRanges& ranges,
                   const WorkspaceConfig& workspace, PerceptionModel& perception,
                   const RequirementThresholds& thresholds, const std::string& manifest = {});

}  // namespace armtest
