#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "armtest/geometry.hpp"
#include "armtest/scene.hpp"

namespace armtest {

struct Annotation {
  int box_id = 0;
  Quad polygon{};
  ObbPose obb;
};

struct Detection {
  ObbPose obb;
  double confidence = 1.0;
};

enum class SceneFeature { abs_rotation, luminosity, nearest_gap, x, y };

// Error multiplier applied when lo <= feature < hi.
struct WeakRegion {
  SceneFeature feature = SceneFeature::abs_rotation;
  double lo = 0.0;
  double hi = 0.0;
  double multiplier = 1.0;

  bool operator==(const WeakRegion&) const = default;
};

// Parametric stand-in for the deployed detector; this is the state that
// repair modifies.
//
//   center noise sd = base_center_noise_sd
//                   + lum_err_gain  * max(0, lum_nominal - luminosity)
//                   + prox_err_gain * max(0, gap_nominal - nearest_gap)
//   rotation noise sd = base_rot_noise_sd + rot_err_slope * |rotation|
//
// Both are scaled by every matching weak region. The degradation score
// center_sd / center_unit + rot_sd / rot_unit sets the confidence
// 1 / (1 + score), and above miss_cutoff the box is dropped with
// probability miss_rate.
struct SyntheticPerceptionParams {
  double rot_err_slope = 0.0;
  double lum_err_gain = 0.0;
  double prox_err_gain = 0.0;
  double base_center_noise_sd = 0.0;
  double base_rot_noise_sd = 0.0;
  double miss_rate = 0.0;
  double miss_cutoff = 1.0;
  double lum_nominal = 3000.0;
  double gap_nominal = 0.03;
  double center_unit = 0.01;
  double rot_unit = 5.0;
  std::vector<WeakRegion> weak_regions;

  bool valid() const;
  bool operator==(const SyntheticPerceptionParams&) const = default;
};

// A model with every gain and noise term at zero.
SyntheticPerceptionParams perfect_perception();

struct Degradation {
  double center_sd = 0.0;
  double rot_sd = 0.0;
  double multiplier = 1.0;
  double score = 0.0;
};

Degradation degradation(const SyntheticPerceptionParams& params, const ObbPose& box,
                        double luminosity, double gap);

std::vector<Annotation> annotate(const Scene& scene);

struct BoxPrediction {
  Detection detection;
  bool missed = false;
};

// Noise for every box, including the ones the model then misses; entry k
// belongs to scene box k.
std::vector<BoxPrediction> predict_per_box(const SyntheticPerceptionParams& params,
                                           const Scene& scene, std::uint64_t rng_seed);

// One detection per box unless missed, in box order. Box k of the scene
// draws from derive_seed(rng_seed, k), so results do not depend on how
// many boxes precede it.
std::vector<Detection> predict(const SyntheticPerceptionParams& params, const Scene& scene,
                               std::uint64_t rng_seed);

class PerceptionModel {
 public:
  virtual ~PerceptionModel() = default;
  virtual std::vector<Detection> detect(const Scene& scene, std::uint64_t seed) = 0;
  // Whether detect() may be called concurrently.
  virtual bool thread_safe() const { return false; }
};

class SyntheticPerception final : public PerceptionModel {
 public:
  explicit SyntheticPerception(SyntheticPerceptionParams params) : params_(std::move(params)) {}

  std::vector<Detection> detect(const Scene& scene, std::uint64_t seed) override {
    return predict(params_, scene, seed);
  }
  bool thread_safe() const override { return true; }
  const SyntheticPerceptionParams& params() const { return params_; }

 private:
  SyntheticPerceptionParams params_;
};

// ---- offline evaluation ----

inline constexpr std::array<double, 10> kIouThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                          0.75, 0.80, 0.85, 0.90, 0.95};

struct EvalResult {
  double map_50_95 = 0.0;
  double f1 = 0.0;
  std::array<double, 10> ap{};
};

// Average precision at one IoU threshold: greedy matching in descending
// confidence order, all-point interpolated precision-recall area.
double average_precision(std::span<const std::vector<Detection>> preds,
                         std::span<const std::vector<Annotation>> gts, double iou_threshold);

EvalResult eval_offline(std::span<const std::vector<Detection>> preds,
                        std::span<const std::vector<Annotation>> gts);

// ---- datasets ----

struct DatasetSample {
  int id = 0;
  Chromosome chromosome;
  Scene scene;
  std::vector<Annotation> annotations;
};

struct DatasetSplit {
  std::vector<int> train;
  std::vector<int> validation;
};

// Sample i is drawn from derive_seed(rng_seed, i).
std::vector<DatasetSample> generate_dataset(const ParameterRanges& ranges,
                                            const WorkspaceConfig& workspace, int count,
                                            std::uint64_t rng_seed);

// First floor(count * train_fraction) ids train, the rest validate.
DatasetSplit split_dataset(int count, double train_fraction = 0.8);

// `class x1 y1 x2 y2 x3 y3 x4 y4`, corners normalized to the camera FOV.
std::string label_line(const Annotation& annotation, const Rect& camera_fov, int class_index = 0);

}  // namespace armtest
