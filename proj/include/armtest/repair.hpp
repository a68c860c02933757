#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "armtest/perception.hpp"
#include "armtest/scene.hpp"
#include "armtest/simulator.hpp"

namespace armtest {

// Observed prediction error on one box of an archived episode.
struct BoxObservation {
  int box_id = 0;
  ObbPose truth;
  double luminosity = 0.0;
  double gap = 0.0;
  double center_err = 0.0;  // meters
  double rot_err = 0.0;     // degrees, absolute
};

struct RepairSample {
  std::string key;
  int record_id = 0;
  bool from_failure = false;  // S_F, otherwise S_NF
  Scene scene;
  std::vector<Annotation> annotations;
  std::vector<BoxObservation> observations;
  std::uint64_t seed = 0;
};

struct RepairDataset {
  std::vector<RepairSample> samples;
  // Indices into samples.
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  // Scenes of the original offline validation split, merged into validation.
  std::vector<DatasetSample> original_validation;

  bool empty() const { return samples.empty(); }
  std::vector<std::string> provenance() const;
};

// Every failed and near-failed record, ordered by (strategy, run, id). One
// failure in five goes to validation; near-fails only ever train. Empty when
// there is nothing to learn from.
RepairDataset assemble(std::span<const TestRecord> records,
                       std::span<const DatasetSample> original_validation = {});

inline constexpr double kDefaultLearningRate = 0.8;

struct ValidationError {
  double center = 0.0;  // mean meters
  double rotation = 0.0;  // mean degrees
  double combined = 0.0;  // center / center_unit + rotation / rot_unit
  int boxes = 0;
};

// Re-predicts the validation scenes with fixed seeds; misses do not hide a
// box's error because the noise is drawn for every box.
ValidationError validation_error(const SyntheticPerceptionParams& params,
                                 const RepairDataset& dataset);

struct RefitResult {
  SyntheticPerceptionParams params;
  // Gains fitted on the training split, before shrinkage.
  double fitted_rot_err_slope = 0.0;
  double fitted_lum_err_gain = 0.0;
  double fitted_prox_err_gain = 0.0;
  std::vector<double> fitted_region_excess;
  ValidationError before;
  ValidationError after;
};

// Least-squares fit of the degradation gains on the training split; each
// gain (and each weak-region excess multiplier - 1) moves toward zero by
// eta times its fitted value, clamped to [0, old]. Throws RefitRejected if
// the validation error grows, std::invalid_argument on an empty dataset.
RefitResult refit(const SyntheticPerceptionParams& operating, const RepairDataset& dataset,
                  double eta = kDefaultLearningRate);

inline constexpr int kReruns = 5;
inline constexpr int kRerunFailMajority = 3;

struct ReplayCase {
  std::string key;
  FailureKind original_kind = FailureKind::none;
  FailureModeSet original_modes;
  bool repaired = false;
  FailureModeSet first_replay_modes;
  int rerun_failures = 0;  // out of kReruns, 0 when the first replay passed
};

struct RepairReport {
  int n_replayed = 0;
  std::vector<std::string> s_r;
  std::vector<std::string> s_nr;
  // Failure modes still present in the non-repaired cases.
  std::map<std::string, int> residual_modes;
  int soft_total = 0;
  int soft_repaired = 0;
  int hard_total = 0;
  int hard_repaired = 0;
  int reruns_per_nonrepaired = kReruns;
  std::vector<ReplayCase> cases;
};

// First replay uses the archived seed; a case still failing is rerun
// kReruns times with derived seeds and stays non-repaired if it fails in
// at least kRerunFailMajority of them.
RepairReport replay(std::span<const TestRecord* const> failed, PerceptionModel& repaired,
                    const WorkspaceConfig& workspace, const RequirementThresholds& thresholds,
                    std::uint64_t base_seed);

std::uint64_t rerun_seed(std::uint64_t base_seed, const std::string& key, int rerun);

}  // namespace armtest
