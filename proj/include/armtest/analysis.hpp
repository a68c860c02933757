#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "armtest/scene.hpp"
#include "armtest/simulator.hpp"

namespace armtest {

// 1 - a.b / (|a| |b|), in [0, 2]. Throws UndefinedDistance on a zero-norm
// operand and std::invalid_argument on a length mismatch.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Symmetric distance between items i and j.
using PairDistance = std::function<double(std::size_t i, std::size_t j)>;

// Mean over i of max over j (self included) of dist(i, j); 0 for n = 0.
// Rows run across the worker pool, the final sum is serial in row order.
double sparseness(std::size_t n, const PairDistance& dist);
double sparseness_serial(std::size_t n, const PairDistance& dist);

// Jaccard distance; 0 when both sets are empty.
double severity_distance(FailureModeSet a, FailureModeSet b);

// Cosine distance for feature vectors. A zero vector is at distance
// 0 from another zero vector and 1 from anything else.
double feature_distance(const std::vector<double>& a, const std::vector<double>& b);

struct SparsenessReport {
  double s_avf = 0.0;
  double s_avs = 0.0;
  int n_unique_fm_combos = 0;
  int n_items = 0;
};

// Sparseness of the given records (typically the failures of one run).
// Features are the genes rescaled to [0, 1].
SparsenessReport sparseness_report(std::span<const TestRecord* const> records,
                                   const ParameterRanges& ranges);

// Failures of one archive.
std::vector<const TestRecord*> failures(std::span<const TestRecord> records);

struct PermutationResult {
  double statistic = 0.0;  // mean(a) - mean(b)
  double p_value = 1.0;
  bool exact = false;
  std::uint64_t permutations = 0;
};

inline constexpr std::uint64_t kExactPermutationLimit = 20000;
inline constexpr int kDefaultPermutations = 10000;

// Two-sided difference-of-means permutation test. All splits are enumerated
// when C(n_a + n_b, n_a) <= kExactPermutationLimit; otherwise `iterations`
// seeded random splits are drawn and p = (1 + hits) / (1 + iterations).
PermutationResult permutation_test(std::span<const double> a, std::span<const double> b,
                                   int iterations = kDefaultPermutations, std::uint64_t seed = 0);

// Always uses random splits; exposed to check against the exact path.
PermutationResult permutation_test_monte_carlo(std::span<const double> a,
                                               std::span<const double> b, int iterations,
                                               std::uint64_t seed);

std::uint64_t binomial(int n, int k, std::uint64_t cap);

enum class EffectMagnitude { negligible, small, medium, large };
std::string_view to_string(EffectMagnitude m);
EffectMagnitude effect_magnitude(double delta);

struct CliffsDelta {
  double delta = 0.0;
  EffectMagnitude magnitude = EffectMagnitude::negligible;
};

CliffsDelta cliffs_delta(std::span<const double> a, std::span<const double> b);

struct Tally {
  int pass = 0;
  int fail = 0;
  int near_fail = 0;
  int soft = 0;
  int hard = 0;

  int total() const { return pass + fail + near_fail; }
  Tally& operator+=(const Tally& o);
  bool operator==(const Tally&) const = default;
};

Tally tally(std::span<const TestRecord> records);
// Keyed by provenance strategy.
std::map<std::string, Tally> tally_by_strategy(std::span<const TestRecord> records);

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double cliffs_delta = 0.0;
  EffectMagnitude magnitude = EffectMagnitude::negligible;
};

StatResult compare_samples(std::span<const double> a, std::span<const double> b,
                           int iterations = kDefaultPermutations, std::uint64_t seed = 0);

}  // namespace armtest
