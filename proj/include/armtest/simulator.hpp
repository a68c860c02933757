#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armtest/geometry.hpp"
#include "armtest/perception.hpp"
#include "armtest/scene.hpp"

namespace armtest {

// Requirement and misprediction thresholds. Every comparison is strict:
// a deviation equal to its threshold does not trigger the mode.
struct RequirementThresholds {
  double place_rot_tol_deg = 5.0;    // FM4
  double place_pos_tol_frac = 0.5;   // FM3, fraction of the box side
  double near_fail_rot_deg = 5.0;    // FM2
  double near_fail_center_m = 0.01;  // FM1

  bool valid() const;
  bool operator==(const RequirementThresholds&) const = default;
};

enum class FailureMode : std::uint8_t {
  center_misprediction = 0,    // FM1
  rotation_misprediction = 1,  // FM2
  not_placed = 2,              // FM3
  placed_misoriented = 3,      // FM4
  stuck = 4,                   // FM5
};

inline constexpr int kFailureModeCount = 5;

class FailureModeSet {
 public:
  constexpr FailureModeSet() = default;
  static constexpr FailureModeSet from_bits(std::uint8_t bits) {
    FailureModeSet s;
    s.bits_ = bits & 0x1f;
    return s;
  }

  void insert(FailureMode m) { bits_ |= bit(m); }
  bool contains(FailureMode m) const { return (bits_ & bit(m)) != 0; }
  bool empty() const { return bits_ == 0; }
  int size() const { return __builtin_popcount(bits_); }
  std::uint8_t bits() const { return bits_; }

  FailureModeSet operator|(FailureModeSet o) const { return from_bits(bits_ | o.bits_); }
  FailureModeSet operator&(FailureModeSet o) const { return from_bits(bits_ & o.bits_); }
  FailureModeSet operator^(FailureModeSet o) const { return from_bits(bits_ ^ o.bits_); }
  bool operator==(const FailureModeSet&) const = default;

  // "FM1+FM4"; empty string for the empty set.
  std::string label() const;
  std::vector<std::string> names() const;

 private:
  static constexpr std::uint8_t bit(FailureMode m) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(m));
  }
  std::uint8_t bits_ = 0;
};

std::string_view failure_mode_name(FailureMode m);
FailureMode failure_mode_from_name(std::string_view name);

enum class Outcome { pass, fail, near_fail };
enum class FailureKind { none, soft, hard };

std::string_view to_string(Outcome o);
std::string_view to_string(FailureKind k);
Outcome outcome_from_string(std::string_view s);
FailureKind failure_kind_from_string(std::string_view s);

struct BoxEvent {
  int box_id = 0;
  ObbPose truth;
  bool detected = false;
  // Prediction the controller acted on, or the last one seen if the box
  // was never picked.
  std::optional<ObbPose> predicted;
  double confidence = 0.0;
  // Largest deviation over the predictions acted on.
  double center_dev = 0.0;
  double rot_dev = 0.0;
  // Nearest-neighbour gap when the prediction was made.
  double nearest_gap = 0.0;
  int attempts = 0;
  bool blocked = false;
  bool grasped = false;
  bool placed = false;
  int stuck_count = 0;
  bool shaken = false;
  bool disturbed = false;
  // Placement residuals in the placed box frame.
  double placed_offset_x = 0.0;
  double placed_offset_y = 0.0;
  double placed_rot_err = 0.0;
};

struct Provenance {
  std::string strategy;
  int run = 0;
  int generation = 0;
  std::string manifest;
};

struct TestRecord {
  int id = 0;
  Chromosome chromosome;
  Scene scene;
  std::vector<BoxEvent> boxes;
  FailureModeSet failure_modes;
  Outcome outcome = Outcome::pass;
  FailureKind failure_kind = FailureKind::none;
  double fitness = 0.0;
  int cycles = 0;
  bool infrastructure_error = false;
  std::string infrastructure_message;
  std::uint64_t seed = 0;
  Provenance provenance;
  double wall_clock_s = 0.0;

  // "strategy:run:id", unique across a set of archives.
  std::string key() const;
};

// One line of the controller trace.
struct CycleTrace {
  int cycle = 0;
  int detections = 0;
  int box = -1;
  double confidence = 0.0;
  double iou = 0.0;
  std::string action;
  double placed_rot_err = 0.0;
};

struct Classification {
  Outcome outcome = Outcome::pass;
  FailureKind failure_kind = FailureKind::none;
  FailureModeSet failure_modes;
};

Classification classify(const TestRecord& record, const RequirementThresholds& thresholds);

// Re-labels `record` in place from its box events.
void apply_classification(TestRecord& record, const RequirementThresholds& thresholds);

inline constexpr double kMinMatchIou = 0.1;
inline constexpr int kAttemptsPerBox = 2;

// Kinematic pick-and-place episode. Perception is queried once per
// controller cycle; at most 2 * n_boxes cycles run.
TestRecord run_episode(const Scene& scene, PerceptionModel& perception,
                       const WorkspaceConfig& workspace, const RequirementThresholds& thresholds,
                       std::uint64_t seed, std::vector<CycleTrace>* trace = nullptr);

// Finger footprints of a parallel gripper closing across the box's short
// side at the given grasp pose.
std::array<ObbPose, 2> finger_footprints(const ObbPose& grasp, const GripperSpec& gripper);

}  // namespace armtest
