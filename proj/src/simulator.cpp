#include "armtest/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "armtest/errors.hpp"

namespace armtest {

namespace {

constexpr std::uint64_t kDetectStream = 0xD7EC7;
constexpr std::uint64_t kShakeStream = 0x5A4E;

constexpr std::string_view kModeNames[kFailureModeCount] = {"FM1", "FM2", "FM3", "FM4", "FM5"};

void record_prediction(BoxEvent& ev, const Detection& det, double gap, bool acted, bool& has_acted) {
  const double c_dev = norm(det.obb.center() - ev.truth.center());
  const double r_dev = std::abs(half_turn_error_deg(ev.truth.rot_deg, det.obb.rot_deg));
  ev.detected = true;
  if (acted) {
    if (has_acted) {
      ev.center_dev = std::max(ev.center_dev, c_dev);
      ev.rot_dev = std::max(ev.rot_dev, r_dev);
    } else {
      ev.center_dev = c_dev;
      ev.rot_dev = r_dev;
      has_acted = true;
    }
  } else if (has_acted) {
    return;
  } else {
    ev.center_dev = c_dev;
    ev.rot_dev = r_dev;
  }
  ev.predicted = det.obb;
  ev.confidence = det.confidence;
  ev.nearest_gap = gap;
}

}  // namespace

bool RequirementThresholds::valid() const {
  return place_rot_tol_deg > 0.0 && place_pos_tol_frac > 0.0 && near_fail_rot_deg > 0.0 &&
         near_fail_center_m > 0.0;
}

std::string_view failure_mode_name(FailureMode m) { return kModeNames[static_cast<int>(m)]; }

FailureMode failure_mode_from_name(std::string_view name) {
  for (int i = 0; i < kFailureModeCount; ++i) {
    if (kModeNames[i] == name) return static_cast<FailureMode>(i);
  }
  throw std::invalid_argument("unknown failure mode '" + std::string(name) + "'");
}

std::string FailureModeSet::label() const {
  std::string out;
  for (int i = 0; i < kFailureModeCount; ++i) {
    if (!contains(static_cast<FailureMode>(i))) continue;
    if (!out.empty()) out += '+';
    out += kModeNames[i];
  }
  return out;
}

std::vector<std::string> FailureModeSet::names() const {
  std::vector<std::string> out;
  for (int i = 0; i < kFailureModeCount; ++i) {
    if (contains(static_cast<FailureMode>(i))) out.emplace_back(kModeNames[i]);
  }
  return out;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::pass:
      return "pass";
    case Outcome::fail:
      return "fail";
    case Outcome::near_fail:
      return "near_fail";
  }
  return "pass";
}

std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::none:
      return "none";
    case FailureKind::soft:
      return "soft";
    case FailureKind::hard:
      return "hard";
  }
  return "none";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "pass") return Outcome::pass;
  if (s == "fail") return Outcome::fail;
  if (s == "near_fail") return Outcome::near_fail;
  throw std::invalid_argument("unknown outcome '" + std::string(s) + "'");
}

FailureKind failure_kind_from_string(std::string_view s) {
  if (s == "none") return FailureKind::none;
  if (s == "soft") return FailureKind::soft;
  if (s == "hard") return FailureKind::hard;
  throw std::invalid_argument("unknown failure kind '" + std::string(s) + "'");
}

std::string TestRecord::key() const {
  return provenance.strategy + ":" + std::to_string(provenance.run) + ":" + std::to_string(id);
}

Classification classify(const TestRecord& record, const RequirementThresholds& t) {
  Classification c;
  for (const BoxEvent& ev : record.boxes) {
    if (!ev.detected || ev.center_dev > t.near_fail_center_m) {
      c.failure_modes.insert(FailureMode::center_misprediction);
    }
    if (ev.detected && ev.rot_dev > t.near_fail_rot_deg) {
      c.failure_modes.insert(FailureMode::rotation_misprediction);
    }
    if (!ev.placed || std::abs(ev.placed_offset_x) > t.place_pos_tol_frac * ev.truth.width ||
        std::abs(ev.placed_offset_y) > t.place_pos_tol_frac * ev.truth.height) {
      c.failure_modes.insert(FailureMode::not_placed);
    }
    if (ev.placed && std::abs(ev.placed_rot_err) > t.place_rot_tol_deg) {
      c.failure_modes.insert(FailureMode::placed_misoriented);
    }
    if (ev.stuck_count > 0) c.failure_modes.insert(FailureMode::stuck);
  }
  if (record.infrastructure_error) c.failure_modes.insert(FailureMode::stuck);

  const FailureModeSet task = FailureModeSet::from_bits(0b11100);
  const FailureModeSet perception = FailureModeSet::from_bits(0b00011);
  const bool failed = !(c.failure_modes & task).empty();
  const bool mispredicted = !(c.failure_modes & perception).empty();
  if (failed) {
    c.outcome = Outcome::fail;
    c.failure_kind = mispredicted ? FailureKind::soft : FailureKind::hard;
  } else {
    c.outcome = mispredicted ? Outcome::near_fail : Outcome::pass;
    c.failure_kind = FailureKind::none;
  }
  return c;
}

void apply_classification(TestRecord& record, const RequirementThresholds& thresholds) {
  const Classification c = classify(record, thresholds);
  record.outcome = c.outcome;
  record.failure_kind = c.failure_kind;
  record.failure_modes = c.failure_modes;
}

std::array<ObbPose, 2> finger_footprints(const ObbPose& grasp, const GripperSpec& gripper) {
  // Jaws close across the short side.
  const bool across_height = grasp.height <= grasp.width;
  const double half_short = 0.5 * (across_height ? grasp.height : grasp.width);
  const double reach = half_short + 0.5 * gripper.finger_gap;
  const Vec2 axis = across_height ? Vec2{0.0, 1.0} : Vec2{1.0, 0.0};
  std::array<ObbPose, 2> out;
  for (int s = 0; s < 2; ++s) {
    const double sign = s == 0 ? 1.0 : -1.0;
    const Vec2 c = grasp.center() + rotate((sign * reach) * axis, grasp.rot_deg);
    out[s] = {c.x, c.y, grasp.rot_deg, across_height ? gripper.finger_width : gripper.finger_gap,
              across_height ? gripper.finger_gap : gripper.finger_width};
  }
  return out;
}

TestRecord run_episode(const Scene& scene, PerceptionModel& perception,
                       const WorkspaceConfig& workspace, const RequirementThresholds& thresholds,
                       std::uint64_t seed, std::vector<CycleTrace>* trace) {
  const auto t0 = std::chrono::steady_clock::now();
  TestRecord rec;
  rec.chromosome = encode(scene);
  rec.scene = scene;
  rec.seed = seed;

  const int n = static_cast<int>(scene.boxes.size());
  rec.boxes.resize(n);
  for (int i = 0; i < n; ++i) {
    rec.boxes[i].box_id = i;
    rec.boxes[i].truth = scene.boxes[i];
  }
  std::vector<int> remaining(n);
  for (int i = 0; i < n; ++i) remaining[i] = i;
  std::vector<bool> abandoned(n, false);
  std::vector<bool> acted(n, false);
  std::vector<bool> seen(n, false);
  auto available = [&](int b) { return !abandoned[b]; };

  auto fail_attempt = [&](int b) {
    if (++rec.boxes[b].attempts >= kAttemptsPerBox) abandoned[b] = true;
  };

  const int max_cycles = 2 * n;
  int cycle = 0;
  for (; cycle < max_cycles && !remaining.empty(); ++cycle) {
    Scene view;
    view.luminosity = scene.luminosity;
    for (int b : remaining) view.boxes.push_back(scene.boxes[b]);

    CycleTrace ct;
    ct.cycle = cycle;
    std::vector<Detection> dets;
    try {
      dets = perception.detect(view, derive_seed(seed, kDetectStream, static_cast<std::uint64_t>(cycle)));
    } catch (const ProtocolError& e) {
      rec.infrastructure_error = true;
      rec.infrastructure_message = e.what();
      ct.action = "protocol_error";
      if (trace) trace->push_back(ct);
      ++cycle;
      break;
    }
    ct.detections = static_cast<int>(dets.size());

    std::fill(seen.begin(), seen.end(), false);
    // Match every detection to the remaining box it overlaps most.
    std::vector<int> match(dets.size(), -1);
    std::vector<double> match_iou(dets.size(), 0.0);
    for (std::size_t d = 0; d < dets.size(); ++d) {
      for (std::size_t k = 0; k < remaining.size(); ++k) {
        const double iou = obb_iou(dets[d].obb, view.boxes[k]);
        if (iou > match_iou[d]) {
          match_iou[d] = iou;
          match[d] = static_cast<int>(k);
        }
      }
      if (match_iou[d] > kMinMatchIou) {
        const int b = remaining[match[d]];
        seen[b] = true;
        bool has_acted = acted[b];
        record_prediction(rec.boxes[b], dets[d], nearest_gap(view, match[d]), false, has_acted);
      }
    }

    // Empty-space picks are charged to the nearest box still in play.
    auto target_of = [&](std::size_t d) -> int {
      if (match_iou[d] > kMinMatchIou) {
        const int b = remaining[match[d]];
        return available(b) ? b : -1;
      }
      int best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (int b : remaining) {
        if (!available(b)) continue;
        const double dist = norm(dets[d].obb.center() - scene.boxes[b].center());
        if (dist < best_dist) {
          best_dist = dist;
          best = b;
        }
      }
      return best;
    };

    int chosen = -1;
    int box = -1;
    for (std::size_t d = 0; d < dets.size(); ++d) {
      const int b = target_of(d);
      if (b < 0) continue;
      if (chosen < 0 || dets[d].confidence > dets[chosen].confidence ||
          (dets[d].confidence == dets[chosen].confidence && b < box)) {
        chosen = static_cast<int>(d);
        box = b;
      }
    }
    if (chosen < 0) {
      ct.action = dets.empty() ? "no_detections" : "nothing_selectable";
      if (trace) trace->push_back(ct);
      // A box the detector lost before it was picked counts as a miss.
      for (int b : remaining) {
        if (available(b) && !seen[b]) rec.boxes[b].detected = false;
      }
      ++cycle;
      break;
    }

    const Detection& det = dets[chosen];
    BoxEvent& ev = rec.boxes[box];
    ct.box = box;
    ct.confidence = det.confidence;
    ct.iou = match_iou[chosen];
    const std::size_t view_index =
        static_cast<std::size_t>(std::find(remaining.begin(), remaining.end(), box) - remaining.begin());
    bool has_acted = acted[box];
    record_prediction(ev, det, nearest_gap(view, view_index), true, has_acted);
    acted[box] = true;

    if (match_iou[chosen] <= kMinMatchIou) {
      fail_attempt(box);
      ct.action = "empty_pick";
      if (trace) trace->push_back(ct);
      continue;
    }

    const ObbPose& truth = scene.boxes[box];
    if (norm(det.obb.center() - truth.center()) > workspace.gripper.suction_tol) {
      fail_attempt(box);
      ct.action = "grasp_missed";
      if (trace) trace->push_back(ct);
      continue;
    }

    if (workspace.gripper.kind == GripperKind::parallel) {
      const ObbPose grasp{det.obb.cx, det.obb.cy, det.obb.rot_deg, workspace.box_width,
                          workspace.box_height};
      bool collides = false;
      for (const ObbPose& finger : finger_footprints(grasp, workspace.gripper)) {
        for (int other : remaining) {
          if (other != box && obb_intersect(finger, scene.boxes[other])) collides = true;
        }
      }
      if (collides) {
        ev.blocked = true;
        fail_attempt(box);
        ct.action = "blocked";
        if (trace) trace->push_back(ct);
        continue;
      }
    }
    ev.grasped = true;

    double jitter = 0.0;
    if (workspace.singularity_region && workspace.singularity_region->contains(det.obb.center())) {
      Rng rng(derive_seed(seed, kShakeStream, static_cast<std::uint64_t>(cycle)));
      jitter = rng.uniform(-workspace.shake_deg, workspace.shake_deg);
      const bool stuck = rng.bernoulli(workspace.p_stuck);
      ev.shaken = true;
      if (stuck) {
        ++ev.stuck_count;
        ct.action = "stuck";
        if (trace) trace->push_back(ct);
        continue;
      }
    }

    double disturbance = 0.0;
    if (workspace.transport_collision) {
      const ObbPose swept = inflate(truth, workspace.transport_margin);
      for (int other : remaining) {
        if (other != box && obb_intersect(swept, scene.boxes[other])) {
          ev.disturbed = true;
          disturbance = workspace.transport_disturbance_deg;
          break;
        }
      }
    }

    const double rot_err = half_turn_error_deg(truth.rot_deg, det.obb.rot_deg) + jitter + disturbance;
    const Vec2 in_gripper = rotate(truth.center() - det.obb.center(), -det.obb.rot_deg);
    const Vec2 in_box = rotate(in_gripper, -rot_err);
    ev.placed = true;
    ev.placed_rot_err = rot_err;
    ev.placed_offset_x = in_box.x;
    ev.placed_offset_y = in_box.y;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(view_index));

    ct.action = "placed";
    ct.placed_rot_err = rot_err;
    if (trace) trace->push_back(ct);
  }
  rec.cycles = cycle;
  apply_classification(rec, thresholds);
  rec.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace armtest
