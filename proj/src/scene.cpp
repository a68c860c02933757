#include "armtest/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "armtest/errors.hpp"

namespace armtest {

bool ParameterRanges::valid() const {
  return x_min < x_max && y_min < y_max && rot_min < rot_max && lum_min < lum_max;
}

Scene decode(const Chromosome& chromosome, const WorkspaceConfig& workspace) {
  const std::size_t expected = 3 * static_cast<std::size_t>(workspace.n_boxes) + 1;
  if (chromosome.genes.size() != expected) {
    throw EncodingError("chromosome has " + std::to_string(chromosome.genes.size()) +
                        " genes, expected " + std::to_string(expected));
  }
  Scene scene;
  scene.boxes.reserve(workspace.n_boxes);
  for (int i = 0; i < workspace.n_boxes; ++i) {
    const double* g = &chromosome.genes[3 * i];
    scene.boxes.push_back(
        {g[0], g[1], canonical_deg(g[2]), workspace.box_width, workspace.box_height});
  }
  scene.luminosity = chromosome.genes.back();
  return scene;
}

Chromosome encode(const Scene& scene) {
  Chromosome c;
  c.genes.reserve(3 * scene.boxes.size() + 1);
  for (const ObbPose& b : scene.boxes) {
    c.genes.push_back(b.cx);
    c.genes.push_back(b.cy);
    c.genes.push_back(b.rot_deg);
  }
  c.genes.push_back(scene.luminosity);
  return c;
}

std::pair<double, double> gene_range(const ParameterRanges& ranges, std::size_t gene_index,
                                     std::size_t gene_count) {
  if (gene_index + 1 == gene_count) return {ranges.lum_min, ranges.lum_max};
  switch (gene_index % 3) {
    case 0:
      return {ranges.x_min, ranges.x_max};
    case 1:
      return {ranges.y_min, ranges.y_max};
    default:
      return {ranges.rot_min, ranges.rot_max};
  }
}

ConstraintReport validate(const Chromosome& chromosome, const ParameterRanges& ranges,
                          const WorkspaceConfig& workspace) {
  ConstraintReport report;
  const std::size_t n = chromosome.genes.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = gene_range(ranges, i, n);
    const double g = chromosome.genes[i];
    if (!(g >= lo && g <= hi)) report.out_of_range_genes.push_back(static_cast<int>(i));
  }

  const Scene scene = decode(chromosome, workspace);
  const int boxes = static_cast<int>(scene.boxes.size());
  for (int i = 0; i < boxes; ++i) {
    for (const Vec2& corner : obb_corners(scene.boxes[i])) {
      if (!workspace.camera_fov.contains(corner)) {
        report.outside_fov.push_back(i);
        break;
      }
    }
    for (int j = i + 1; j < boxes; ++j) {
      if (obb_intersect(scene.boxes[i], scene.boxes[j])) report.intersecting_pairs.emplace_back(i, j);
    }
  }
  return report;
}

Chromosome sample_random(const ParameterRanges& ranges, const WorkspaceConfig& workspace,
                         Rng& rng) {
  const std::size_t n = 3 * static_cast<std::size_t>(workspace.n_boxes) + 1;
  Chromosome c;
  c.genes.resize(n);
  for (int attempt = 0; attempt < kMaxSamplingAttempts; ++attempt) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto [lo, hi] = gene_range(ranges, i, n);
      c.genes[i] = rng.uniform(lo, hi);
    }
    if (validate(c, ranges, workspace).ok()) return c;
  }
  throw SamplingInfeasible("no valid scene after " + std::to_string(kMaxSamplingAttempts) +
                           " attempts; ranges too tight for the box count");
}

Chromosome sample_random(const ParameterRanges& ranges, const WorkspaceConfig& workspace,
                         std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return sample_random(ranges, workspace, rng);
}

void clamp_to_ranges(Chromosome& chromosome, const ParameterRanges& ranges) {
  const std::size_t n = chromosome.genes.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = gene_range(ranges, i, n);
    chromosome.genes[i] = std::clamp(chromosome.genes[i], lo, hi);
  }
}

std::string to_csv(const Chromosome& chromosome) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < chromosome.genes.size(); ++i) {
    if (i) out.push_back(',');
    const auto res = std::to_chars(buf, buf + sizeof buf, chromosome.genes[i]);
    out.append(buf, res.ptr);
  }
  return out;
}

Chromosome chromosome_from_csv(std::string_view line) {
  Chromosome c;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  if (line.empty()) throw EncodingError("empty chromosome line");
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    const std::string_view field =
        line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
      throw EncodingError("bad gene '" + std::string(field) + "'");
    }
    c.genes.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (c.genes.size() % 3 != 1) {
    throw EncodingError("gene count " + std::to_string(c.genes.size()) + " is not 3n+1");
  }
  return c;
}

double nearest_gap(const Scene& scene, std::size_t index) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scene.boxes.size(); ++j) {
    if (j == index) continue;
    best = std::min(best, obb_distance(scene.boxes[index], scene.boxes[j]));
  }
  return best;
}

}  // namespace armtest
