#include "armtest/repair.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "armtest/errors.hpp"
#include "armtest/parallel.hpp"
#include "armtest/rng.hpp"

namespace armtest {

namespace {

constexpr std::uint64_t kValidationStream = 0x7A11D;
constexpr std::uint64_t kRerunStream = 0x2E2;

// Per-box sd from one draw: |e| of a 1-D normal has mean sd * sqrt(2/pi),
// the norm of an isotropic 2-D normal has mean sd * sqrt(pi/2).
double rot_sd_estimate(double abs_err) { return abs_err * std::sqrt(std::numbers::pi / 2.0); }
double center_sd_estimate(double norm_err) { return norm_err / std::sqrt(std::numbers::pi / 2.0); }

double weak_multiplier(const SyntheticPerceptionParams& p, const BoxObservation& o,
                       int skip = -1) {
  double m = 1.0;
  for (std::size_t w = 0; w < p.weak_regions.size(); ++w) {
    if (static_cast<int>(w) == skip) continue;
    SyntheticPerceptionParams one;
    one.weak_regions = {p.weak_regions[w]};
    m *= degradation(one, o.truth, o.luminosity, o.gap).multiplier;
  }
  return m;
}

bool inside(const WeakRegion& w, const BoxObservation& o) {
  SyntheticPerceptionParams one;
  one.weak_regions = {w};
  one.weak_regions[0].multiplier = 2.0;
  return degradation(one, o.truth, o.luminosity, o.gap).multiplier != 1.0;
}

// Ridge-stabilized least squares; returns zeros when there are no rows.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) return Eigen::VectorXd::Zero(X.cols());
  Eigen::MatrixXd A = X.transpose() * X;
  const double ridge = 1e-9 * std::max(1.0, A.trace());
  A.diagonal().array() += ridge;
  return A.ldlt().solve(X.transpose() * y);
}

double shrink(double old_gain, double fitted, double eta) {
  const double f = std::clamp(fitted, 0.0, old_gain);
  return std::max(0.0, old_gain - eta * f);
}

std::tuple<std::string, int, int> order_key(const TestRecord& r) {
  return {r.provenance.strategy, r.provenance.run, r.id};
}

}  // namespace

std::vector<std::string> RepairDataset::provenance() const {
  std::vector<std::string> out;
  out.reserve(samples.size());
  for (const RepairSample& s : samples) out.push_back(s.key);
  return out;
}

RepairDataset assemble(std::span<const TestRecord> records,
                       std::span<const DatasetSample> original_validation) {
  std::vector<const TestRecord*> picked;
  for (const TestRecord& r : records) {
    if (r.outcome == Outcome::fail || r.outcome == Outcome::near_fail) picked.push_back(&r);
  }
  std::sort(picked.begin(), picked.end(), [](const TestRecord* a, const TestRecord* b) {
    return order_key(*a) < order_key(*b);
  });

  RepairDataset ds;
  if (picked.empty()) return ds;
  ds.original_validation.assign(original_validation.begin(), original_validation.end());
  int failure_index = 0;
  for (const TestRecord* r : picked) {
    RepairSample s;
    s.key = r->key();
    s.record_id = r->id;
    s.from_failure = r->outcome == Outcome::fail;
    s.scene = r->scene;
    s.annotations = annotate(r->scene);
    s.seed = r->seed;
    for (const BoxEvent& ev : r->boxes) {
      if (!ev.predicted) continue;
      BoxObservation o;
      o.box_id = ev.box_id;
      o.truth = ev.truth;
      o.luminosity = r->scene.luminosity;
      o.gap = ev.nearest_gap;
      o.center_err = norm(ev.predicted->center() - ev.truth.center());
      o.rot_err = std::abs(half_turn_error_deg(ev.truth.rot_deg, ev.predicted->rot_deg));
      s.observations.push_back(o);
    }
    const std::size_t idx = ds.samples.size();
    if (s.from_failure && failure_index++ % 5 == 4) {
      ds.validation.push_back(idx);
    } else {
      ds.train.push_back(idx);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

ValidationError validation_error(const SyntheticPerceptionParams& params,
                                 const RepairDataset& dataset) {
  ValidationError e;
  auto add_scene = [&](const Scene& scene, std::uint64_t seed) {
    const std::vector<BoxPrediction> preds = predict_per_box(params, scene, seed);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      const ObbPose& truth = scene.boxes[k];
      const ObbPose& p = preds[k].detection.obb;
      e.center += norm(p.center() - truth.center());
      e.rotation += std::abs(half_turn_error_deg(truth.rot_deg, p.rot_deg));
      ++e.boxes;
    }
  };
  for (std::size_t i : dataset.validation) {
    const RepairSample& s = dataset.samples[i];
    add_scene(s.scene, derive_seed(s.seed, kValidationStream));
  }
  for (const DatasetSample& s : dataset.original_validation) {
    add_scene(s.scene, derive_seed(kValidationStream, static_cast<std::uint64_t>(s.id)));
  }
  if (e.boxes > 0) {
    e.center /= e.boxes;
    e.rotation /= e.boxes;
  }
  e.combined = e.center / params.center_unit + e.rotation / params.rot_unit;
  return e;
}

RefitResult refit(const SyntheticPerceptionParams& operating, const RepairDataset& dataset,
                  double eta) {
  if (dataset.empty()) throw std::invalid_argument("refit needs a nonempty repair dataset");
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("learning rate must lie in [0, 1]");

  std::vector<const BoxObservation*> obs;
  for (std::size_t i : dataset.train) {
    for (const BoxObservation& o : dataset.samples[i].observations) obs.push_back(&o);
  }

  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd Xr(n, 2);
  Eigen::VectorXd yr(n);
  Eigen::MatrixXd Xc(n, 3);
  Eigen::VectorXd yc(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const BoxObservation& o = *obs[i];
    const double m = weak_multiplier(operating, o);
    const double scale = m > 0.0 ? 1.0 / m : 0.0;
    const double lum_def = std::max(0.0, operating.lum_nominal - o.luminosity);
    const double gap_def = std::isfinite(o.gap) ? std::max(0.0, operating.gap_nominal - o.gap) : 0.0;
    Xr.row(i) << 1.0, std::abs(o.truth.rot_deg);
    yr(i) = rot_sd_estimate(o.rot_err) * scale;
    Xc.row(i) << 1.0, lum_def, gap_def;
    yc(i) = center_sd_estimate(o.center_err) * scale;
  }
  const Eigen::VectorXd br = least_squares(Xr, yr);
  const Eigen::VectorXd bc = least_squares(Xc, yc);

  RefitResult res;
  res.fitted_rot_err_slope = br(1);
  res.fitted_lum_err_gain = bc(1);
  res.fitted_prox_err_gain = bc(2);
  res.params = operating;
  res.params.rot_err_slope = shrink(operating.rot_err_slope, br(1), eta);
  res.params.lum_err_gain = shrink(operating.lum_err_gain, bc(1), eta);
  res.params.prox_err_gain = shrink(operating.prox_err_gain, bc(2), eta);

  // Weak-region multipliers: ratio of the observed sd to what the operating
  // model predicts without that region, averaged over both channels.
  for (std::size_t w = 0; w < operating.weak_regions.size(); ++w) {
    const WeakRegion& region = operating.weak_regions[w];
    double ratio_sum = 0.0;
    int ratio_n = 0;
    for (const BoxObservation* o : obs) {
      if (!inside(region, *o)) continue;
      SyntheticPerceptionParams without = operating;
      without.weak_regions.erase(without.weak_regions.begin() + static_cast<long>(w));
      const Degradation d = degradation(without, o->truth, o->luminosity, o->gap);
      if (d.rot_sd > 0.0) {
        ratio_sum += rot_sd_estimate(o->rot_err) / d.rot_sd;
        ++ratio_n;
      }
      if (d.center_sd > 0.0) {
        ratio_sum += center_sd_estimate(o->center_err) / d.center_sd;
        ++ratio_n;
      }
    }
    const double fitted_excess = ratio_n > 0 ? ratio_sum / ratio_n - 1.0 : 0.0;
    res.fitted_region_excess.push_back(fitted_excess);
    const double old_excess = region.multiplier - 1.0;
    if (old_excess > 0.0) {
      res.params.weak_regions[w].multiplier = 1.0 + shrink(old_excess, fitted_excess, eta);
    }
  }

  res.before = validation_error(operating, dataset);
  res.after = validation_error(res.params, dataset);
  if (res.after.combined > res.before.combined) {
    throw RefitRejected(res.before.combined, res.after.combined);
  }
  return res;
}

std::uint64_t rerun_seed(std::uint64_t base_seed, const std::string& key, int rerun) {
  return derive_seed(derive_seed(base_seed, kRerunStream), derive_seed(0, key),
                     static_cast<std::uint64_t>(rerun));
}

RepairReport replay(std::span<const TestRecord* const> failed, PerceptionModel& repaired,
                    const WorkspaceConfig& workspace, const RequirementThresholds& thresholds,
                    std::uint64_t base_seed) {
  RepairReport rep;
  rep.cases.resize(failed.size());
  auto run_case = [&](std::size_t i) {
    const TestRecord& rec = *failed[i];
    ReplayCase& c = rep.cases[i];
    c.key = rec.key();
    c.original_kind = rec.failure_kind;
    c.original_modes = rec.failure_modes;
    const TestRecord first = run_episode(rec.scene, repaired, workspace, thresholds, rec.seed);
    c.first_replay_modes = first.failure_modes;
    if (first.outcome != Outcome::fail) {
      c.repaired = true;
      return;
    }
    for (int k = 0; k < kReruns; ++k) {
      const TestRecord again = run_episode(rec.scene, repaired, workspace, thresholds,
                                           rerun_seed(base_seed, c.key, k));
      if (again.outcome == Outcome::fail) ++c.rerun_failures;
    }
    c.repaired = c.rerun_failures < kRerunFailMajority;
  };
  if (repaired.thread_safe()) {
    parallel_for(failed.size(), run_case);
  } else {
    for (std::size_t i = 0; i < failed.size(); ++i) run_case(i);
  }

  rep.n_replayed = static_cast<int>(failed.size());
  for (const ReplayCase& c : rep.cases) {
    const bool soft = c.original_kind == FailureKind::soft;
    (soft ? rep.soft_total : rep.hard_total)++;
    if (c.repaired) {
      rep.s_r.push_back(c.key);
      (soft ? rep.soft_repaired : rep.hard_repaired)++;
    } else {
      rep.s_nr.push_back(c.key);
      for (const std::string& name : c.first_replay_modes.names()) ++rep.residual_modes[name];
    }
  }
  return rep;
}

}  // namespace armtest
