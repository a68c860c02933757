#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "armtest/geometry.hpp"
#include "armtest/rng.hpp"

namespace armtest {

// Search space for box poses and scene luminosity.
struct ParameterRanges {
  double x_min = 0.5;
  double x_max = 0.9;
  double y_min = 0.0;
  double y_max = 0.92;
  double rot_min = -30.0;
  double rot_max = 30.0;
  double lum_min = 1500.0;
  double lum_max = 5000.0;

  bool valid() const;
  bool operator==(const ParameterRanges&) const = default;
};

enum class GripperKind { suction, parallel };

struct GripperSpec {
  GripperKind kind = GripperKind::suction;
  // Largest center-prediction error that still yields a grasp.
  double suction_tol = 0.035;
  // Parallel jaws: finger pad width along the box's long side, and the
  // outward clearance an open finger needs beyond the box face.
  double finger_width = 0.02;
  double finger_gap = 0.025;

  bool operator==(const GripperSpec&) const = default;
};

struct WorkspaceConfig {
  Rect camera_fov{0.38, 1.02, -0.12, 1.04};
  Vec2 target_place_position{0.2, -0.4};
  double pallet_orientation_deg = 0.0;
  GripperSpec gripper;
  std::optional<Rect> singularity_region;
  int n_boxes = 3;
  double box_width = 0.17;
  double box_height = 0.14;

  // Placement jitter and stuck probability when grasping inside the
  // singularity region.
  double shake_deg = 8.0;
  double p_stuck = 0.1;
  // Orientation disturbance when the carried box grazes a neighbour.
  bool transport_collision = false;
  double transport_margin = 0.01;
  double transport_disturbance_deg = 3.0;

  bool operator==(const WorkspaceConfig&) const = default;
};

// Genotype: [x_1, y_1, r_1, ..., x_n, y_n, r_n, luminosity].
struct Chromosome {
  std::vector<double> genes;

  std::size_t box_count() const { return genes.empty() ? 0 : (genes.size() - 1) / 3; }
  double luminosity() const { return genes.back(); }
  bool operator==(const Chromosome&) const = default;
};

struct Scene {
  std::vector<ObbPose> boxes;
  double luminosity = 0.0;

  bool operator==(const Scene&) const = default;
};

Scene decode(const Chromosome& chromosome, const WorkspaceConfig& workspace);
Chromosome encode(const Scene& scene);

struct ConstraintReport {
  std::vector<std::pair<int, int>> intersecting_pairs;
  std::vector<int> outside_fov;
  std::vector<int> out_of_range_genes;

  bool ok() const {
    return intersecting_pairs.empty() && outside_fov.empty() && out_of_range_genes.empty();
  }
};

ConstraintReport validate(const Chromosome& chromosome, const ParameterRanges& ranges,
                          const WorkspaceConfig& workspace);

inline constexpr int kMaxSamplingAttempts = 1000;

// Uniform per-gene sampling, rejected until validate() passes.
Chromosome sample_random(const ParameterRanges& ranges, const WorkspaceConfig& workspace,
                         Rng& rng);
Chromosome sample_random(const ParameterRanges& ranges, const WorkspaceConfig& workspace,
                         std::uint64_t rng_seed);

// Clamps every gene to its range.
void clamp_to_ranges(Chromosome& chromosome, const ParameterRanges& ranges);

std::pair<double, double> gene_range(const ParameterRanges& ranges, std::size_t gene_index,
                                     std::size_t gene_count);

// Single comma-separated line, shortest round-trip decimal per gene.
std::string to_csv(const Chromosome& chromosome);
Chromosome chromosome_from_csv(std::string_view line);

// Gap from box `index` to its nearest neighbour; infinity when alone.
double nearest_gap(const Scene& scene, std::size_t index);

}  // namespace armtest
