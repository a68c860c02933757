#include "armtest/perception.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "armtest/parallel.hpp"

namespace armtest {

bool SyntheticPerceptionParams::valid() const {
  const bool gains = rot_err_slope >= 0.0 && lum_err_gain >= 0.0 && prox_err_gain >= 0.0 &&
                     base_center_noise_sd >= 0.0 && base_rot_noise_sd >= 0.0;
  const bool units = center_unit > 0.0 && rot_unit > 0.0;
  const bool masks = std::all_of(weak_regions.begin(), weak_regions.end(),
                                 [](const WeakRegion& w) { return w.multiplier >= 0.0; });
  return gains && units && masks && miss_rate >= 0.0 && miss_rate <= 1.0;
}

SyntheticPerceptionParams perfect_perception() { return {}; }

namespace {

double feature_value(SceneFeature f, const ObbPose& box, double luminosity, double gap) {
  switch (f) {
    case SceneFeature::abs_rotation:
      return std::abs(box.rot_deg);
    case SceneFeature::luminosity:
      return luminosity;
    case SceneFeature::nearest_gap:
      return gap;
    case SceneFeature::x:
      return box.cx;
    case SceneFeature::y:
      return box.cy;
  }
  return 0.0;
}

}  // namespace

Degradation degradation(const SyntheticPerceptionParams& params, const ObbPose& box,
                        double luminosity, double gap) {
  Degradation d;
  for (const WeakRegion& w : params.weak_regions) {
    const double v = feature_value(w.feature, box, luminosity, gap);
    if (v >= w.lo && v < w.hi) d.multiplier *= w.multiplier;
  }
  const double lum_deficit = std::max(0.0, params.lum_nominal - luminosity);
  const double gap_deficit = std::isfinite(gap) ? std::max(0.0, params.gap_nominal - gap) : 0.0;
  d.center_sd = d.multiplier * (params.base_center_noise_sd + params.lum_err_gain * lum_deficit +
                                params.prox_err_gain * gap_deficit);
  d.rot_sd = d.multiplier * (params.base_rot_noise_sd + params.rot_err_slope * std::abs(box.rot_deg));
  d.score = d.center_sd / params.center_unit + d.rot_sd / params.rot_unit;
  return d;
}

std::vector<Annotation> annotate(const Scene& scene) {
  std::vector<Annotation> out;
  out.reserve(scene.boxes.size());
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    out.push_back({static_cast<int>(i), obb_corners(scene.boxes[i]), scene.boxes[i]});
  }
  return out;
}

std::vector<BoxPrediction> predict_per_box(const SyntheticPerceptionParams& params,
                                           const Scene& scene, std::uint64_t rng_seed) {
  std::vector<BoxPrediction> out;
  out.reserve(scene.boxes.size());
  for (std::size_t k = 0; k < scene.boxes.size(); ++k) {
    const ObbPose& truth = scene.boxes[k];
    const Degradation d = degradation(params, truth, scene.luminosity, nearest_gap(scene, k));

    // Fixed draw order so a change of parameters never shifts the stream.
    Rng rng(derive_seed(rng_seed, k));
    const double u_miss = rng.uniform();
    const double nx = rng.normal();
    const double ny = rng.normal();
    const double nr = rng.normal();

    BoxPrediction bp;
    const double effective_miss = d.score > params.miss_cutoff ? params.miss_rate : 0.0;
    bp.missed = u_miss < effective_miss;
    bp.detection.obb = truth;
    bp.detection.obb.cx += d.center_sd * nx;
    bp.detection.obb.cy += d.center_sd * ny;
    bp.detection.obb.rot_deg = canonical_deg(truth.rot_deg + d.rot_sd * nr);
    bp.detection.confidence = 1.0 / (1.0 + d.score);
    out.push_back(bp);
  }
  return out;
}

std::vector<Detection> predict(const SyntheticPerceptionParams& params, const Scene& scene,
                               std::uint64_t rng_seed) {
  std::vector<Detection> out;
  out.reserve(scene.boxes.size());
  for (const BoxPrediction& bp : predict_per_box(params, scene, rng_seed)) {
    if (!bp.missed) out.push_back(bp.detection);
  }
  return out;
}

namespace {

struct Ranked {
  double confidence;
  std::size_t scene;
  std::size_t det;
};

struct MatchCounts {
  std::vector<bool> tp;  // in ranked order
  std::size_t total_gt = 0;
};

std::vector<Ranked> rank_detections(std::span<const std::vector<Detection>> preds) {
  std::vector<Ranked> ranked;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    for (std::size_t d = 0; d < preds[s].size(); ++d) ranked.push_back({preds[s][d].confidence, s, d});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });
  return ranked;
}

MatchCounts greedy_match(std::span<const std::vector<Detection>> preds,
                         std::span<const std::vector<Annotation>> gts,
                         const std::vector<Ranked>& ranked, double threshold) {
  MatchCounts m;
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t s = 0; s < gts.size(); ++s) {
    used[s].assign(gts[s].size(), false);
    m.total_gt += gts[s].size();
  }
  m.tp.reserve(ranked.size());
  for (const Ranked& r : ranked) {
    const ObbPose& det = preds[r.scene][r.det].obb;
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < gts[r.scene].size(); ++g) {
      if (used[r.scene][g]) continue;
      const double iou = obb_iou(det, gts[r.scene][g].obb);
      if (iou >= threshold && iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best >= 0.0) {
      used[r.scene][best_g] = true;
      m.tp.push_back(true);
    } else {
      m.tp.push_back(false);
    }
  }
  return m;
}

double ap_from_matches(const MatchCounts& m) {
  if (m.total_gt == 0) return m.tp.empty() ? 1.0 : 0.0;
  const std::size_t n = m.tp.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(m.total_gt);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

}  // namespace

double average_precision(std::span<const std::vector<Detection>> preds,
                         std::span<const std::vector<Annotation>> gts, double iou_threshold) {
  const std::vector<Ranked> ranked = rank_detections(preds);
  return ap_from_matches(greedy_match(preds, gts, ranked, iou_threshold));
}

EvalResult eval_offline(std::span<const std::vector<Detection>> preds,
                        std::span<const std::vector<Annotation>> gts) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("eval_offline: prediction and ground-truth scene counts differ");
  }
  EvalResult result;
  const std::vector<Ranked> ranked = rank_detections(preds);
  parallel_for(kIouThresholds.size(), [&](std::size_t t) {
    result.ap[t] = ap_from_matches(greedy_match(preds, gts, ranked, kIouThresholds[t]));
  });
  result.map_50_95 =
      std::accumulate(result.ap.begin(), result.ap.end(), 0.0) / static_cast<double>(result.ap.size());

  const MatchCounts m50 = greedy_match(preds, gts, ranked, kIouThresholds.front());
  const auto tp = static_cast<double>(std::count(m50.tp.begin(), m50.tp.end(), true));
  const auto n_pred = static_cast<double>(m50.tp.size());
  const auto n_gt = static_cast<double>(m50.total_gt);
  if (n_gt == 0.0 && n_pred == 0.0) {
    result.f1 = 1.0;
  } else if (tp > 0.0) {
    const double p = tp / n_pred;
    const double r = tp / n_gt;
    result.f1 = 2.0 * p * r / (p + r);
  }
  return result;
}

std::vector<DatasetSample> generate_dataset(const ParameterRanges& ranges,
                                            const WorkspaceConfig& workspace, int count,
                                            std::uint64_t rng_seed) {
  if (count < 1) throw std::invalid_argument("dataset count must be at least 1");
  std::vector<DatasetSample> samples(static_cast<std::size_t>(count));
  parallel_for(samples.size(), [&](std::size_t i) {
    DatasetSample& s = samples[i];
    s.id = static_cast<int>(i);
    s.chromosome = sample_random(ranges, workspace, derive_seed(rng_seed, i));
    s.scene = decode(s.chromosome, workspace);
    s.annotations = annotate(s.scene);
  });
  return samples;
}

DatasetSplit split_dataset(int count, double train_fraction) {
  DatasetSplit split;
  const int n_train = static_cast<int>(std::floor(count * train_fraction + 1e-9));
  for (int i = 0; i < count; ++i) (i < n_train ? split.train : split.validation).push_back(i);
  return split;
}

std::string label_line(const Annotation& annotation, const Rect& camera_fov, int class_index) {
  std::string line = std::to_string(class_index);
  char buf[64];
  for (const Vec2& p : annotation.polygon) {
    const double u = (p.x - camera_fov.x_min) / camera_fov.width();
    const double v = (p.y - camera_fov.y_min) / camera_fov.height();
    std::snprintf(buf, sizeof buf, " %.6f %.6f", u, v);
    line += buf;
  }
  return line;
}

}  // namespace armtest
