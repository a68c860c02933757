#include "armtest/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "armtest/errors.hpp"
#include "armtest/rng.hpp"

namespace armtest {

namespace {

std::string_view feature_name(SceneFeature f) {
  switch (f) {
    case SceneFeature::abs_rotation: return "abs_rotation";
    case SceneFeature::luminosity: return "luminosity";
    case SceneFeature::nearest_gap: return "nearest_gap";
    case SceneFeature::x: return "x";
    case SceneFeature::y: return "y";
  }
  return "abs_rotation";
}

SceneFeature feature_from_name(const std::string& s) {
  for (SceneFeature f : {SceneFeature::abs_rotation, SceneFeature::luminosity,
                         SceneFeature::nearest_gap, SceneFeature::x, SceneFeature::y}) {
    if (feature_name(f) == s) return f;
  }
  throw std::invalid_argument("unknown scene feature '" + s + "'");
}

// JSON has no infinity; an unbounded value is stored as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

}  // namespace

void to_json(json& j, const Vec2& v) { j = json::array({v.x, v.y}); }
void from_json(const json& j, Vec2& v) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [x, y]");
  v = {j[0].get<double>(), j[1].get<double>()};
}

void to_json(json& j, const Rect& r) { j = json::array({r.x_min, r.x_max, r.y_min, r.y_max}); }
void from_json(const json& j, Rect& r) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("expected [x_min, x_max, y_min, y_max]");
  r = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(json& j, const ObbPose& p) {
  j = json{{"cx", p.cx}, {"cy", p.cy}, {"rot_deg", p.rot_deg}, {"width", p.width}, {"height", p.height}};
}
void from_json(const json& j, ObbPose& p) {
  p.cx = j.at("cx").get<double>();
  p.cy = j.at("cy").get<double>();
  p.rot_deg = j.at("rot_deg").get<double>();
  p.width = j.at("width").get<double>();
  p.height = j.at("height").get<double>();
}

void to_json(json& j, const ParameterRanges& r) {
  j = json{{"x_min", r.x_min},     {"x_max", r.x_max},     {"y_min", r.y_min},
           {"y_max", r.y_max},     {"rot_min", r.rot_min}, {"rot_max", r.rot_max},
           {"lum_min", r.lum_min}, {"lum_max", r.lum_max}};
}
void from_json(const json& j, ParameterRanges& r) {
  read_opt(j, "x_min", r.x_min);
  read_opt(j, "x_max", r.x_max);
  read_opt(j, "y_min", r.y_min);
  read_opt(j, "y_max", r.y_max);
  read_opt(j, "rot_min", r.rot_min);
  read_opt(j, "rot_max", r.rot_max);
  read_opt(j, "lum_min", r.lum_min);
  read_opt(j, "lum_max", r.lum_max);
}

void to_json(json& j, const GripperSpec& g) {
  j = json{{"kind", g.kind == GripperKind::suction ? "suction" : "parallel"},
           {"suction_tol", g.suction_tol},
           {"finger_width", g.finger_width},
           {"finger_gap", g.finger_gap}};
}
void from_json(const json& j, GripperSpec& g) {
  if (auto it = j.find("kind"); it != j.end()) {
    const std::string k = it->get<std::string>();
    if (k == "suction") g.kind = GripperKind::suction;
    else if (k == "parallel") g.kind = GripperKind::parallel;
    else throw std::invalid_argument("unknown gripper kind '" + k + "'");
  }
  read_opt(j, "suction_tol", g.suction_tol);
  read_opt(j, "finger_width", g.finger_width);
  read_opt(j, "finger_gap", g.finger_gap);
}

void to_json(json& j, const WorkspaceConfig& w) {
  j = json{{"camera_fov", w.camera_fov},
           {"target_place_position", w.target_place_position},
           {"pallet_orientation_deg", w.pallet_orientation_deg},
           {"singularity_region", w.singularity_region ? json(*w.singularity_region) : json::array()},
           {"n_boxes", w.n_boxes},
           {"box_width", w.box_width},
           {"box_height", w.box_height},
           {"shake_deg", w.shake_deg},
           {"p_stuck", w.p_stuck},
           {"transport_collision", w.transport_collision},
           {"transport_margin", w.transport_margin},
           {"transport_disturbance_deg", w.transport_disturbance_deg},
           {"gripper", w.gripper}};
}
void from_json(const json& j, WorkspaceConfig& w) {
  read_opt(j, "camera_fov", w.camera_fov);
  read_opt(j, "target_place_position", w.target_place_position);
  read_opt(j, "pallet_orientation_deg", w.pallet_orientation_deg);
  if (auto it = j.find("singularity_region"); it != j.end()) {
    if (it->is_null() || (it->is_array() && it->empty())) w.singularity_region.reset();
    else w.singularity_region = it->get<Rect>();
  }
  read_opt(j, "n_boxes", w.n_boxes);
  read_opt(j, "box_width", w.box_width);
  read_opt(j, "box_height", w.box_height);
  read_opt(j, "shake_deg", w.shake_deg);
  read_opt(j, "p_stuck", w.p_stuck);
  read_opt(j, "transport_collision", w.transport_collision);
  read_opt(j, "transport_margin", w.transport_margin);
  read_opt(j, "transport_disturbance_deg", w.transport_disturbance_deg);
  read_opt(j, "gripper", w.gripper);
}

void to_json(json& j, const Scene& s) {
  json boxes = json::array();
  for (const ObbPose& b : s.boxes) boxes.push_back(b);
  j = json{{"luminosity", s.luminosity}, {"boxes", boxes}};
}
void from_json(const json& j, Scene& s) {
  s.luminosity = j.at("luminosity").get<double>();
  s.boxes = j.at("boxes").get<std::vector<ObbPose>>();
}

void to_json(json& j, const WeakRegion& w) {
  j = json{{"feature", feature_name(w.feature)},
           {"lo", finite_or_null(w.lo)},
           {"hi", finite_or_null(w.hi)},
           {"multiplier", w.multiplier}};
}
void from_json(const json& j, WeakRegion& w) {
  w.feature = feature_from_name(j.at("feature").get<std::string>());
  w.lo = j.contains("lo") ? j.at("lo").is_null() ? -std::numeric_limits<double>::infinity()
                                                 : j.at("lo").get<double>()
                          : 0.0;
  w.hi = j.contains("hi") ? number_or_inf(j.at("hi")) : std::numeric_limits<double>::infinity();
  w.multiplier = j.at("multiplier").get<double>();
}

void to_json(json& j, const SyntheticPerceptionParams& p) {
  json regions = json::array();
  for (const WeakRegion& w : p.weak_regions) regions.push_back(w);
  j = json{{"rot_err_slope", p.rot_err_slope},
           {"lum_err_gain", p.lum_err_gain},
           {"prox_err_gain", p.prox_err_gain},
           {"base_center_noise_sd", p.base_center_noise_sd},
           {"base_rot_noise_sd", p.base_rot_noise_sd},
           {"miss_rate", p.miss_rate},
           {"miss_cutoff", p.miss_cutoff},
           {"lum_nominal", p.lum_nominal},
           {"gap_nominal", p.gap_nominal},
           {"center_unit", p.center_unit},
           {"rot_unit", p.rot_unit},
           {"weak_regions", regions}};
}
void from_json(const json& j, SyntheticPerceptionParams& p) {
  read_opt(j, "rot_err_slope", p.rot_err_slope);
  read_opt(j, "lum_err_gain", p.lum_err_gain);
  read_opt(j, "prox_err_gain", p.prox_err_gain);
  read_opt(j, "base_center_noise_sd", p.base_center_noise_sd);
  read_opt(j, "base_rot_noise_sd", p.base_rot_noise_sd);
  read_opt(j, "miss_rate", p.miss_rate);
  read_opt(j, "miss_cutoff", p.miss_cutoff);
  read_opt(j, "lum_nominal", p.lum_nominal);
  read_opt(j, "gap_nominal", p.gap_nominal);
  read_opt(j, "center_unit", p.center_unit);
  read_opt(j, "rot_unit", p.rot_unit);
  read_opt(j, "weak_regions", p.weak_regions);
}

void to_json(json& j, const RequirementThresholds& t) {
  j = json{{"place_rot_tol_deg", t.place_rot_tol_deg},
           {"place_pos_tol_frac", t.place_pos_tol_frac},
           {"near_fail_rot_deg", t.near_fail_rot_deg},
           {"near_fail_center_m", t.near_fail_center_m}};
}
void from_json(const json& j, RequirementThresholds& t) {
  read_opt(j, "place_rot_tol_deg", t.place_rot_tol_deg);
  read_opt(j, "place_pos_tol_frac", t.place_pos_tol_frac);
  read_opt(j, "near_fail_rot_deg", t.near_fail_rot_deg);
  read_opt(j, "near_fail_center_m", t.near_fail_center_m);
}

void to_json(json& j, const SearchConfig& c) {
  j = json{{"population_size", c.population_size},
           {"eval_budget", c.eval_budget},
           {"p_cross", c.p_cross},
           {"p_mut", c.p_mut},
           {"dup_threshold", c.dup_threshold},
           {"w1", c.w1},
           {"w2", c.w2},
           {"k_p", c.k_p},
           {"k_r", c.k_r}};
}
void from_json(const json& j, SearchConfig& c) {
  read_opt(j, "population_size", c.population_size);
  read_opt(j, "eval_budget", c.eval_budget);
  read_opt(j, "p_cross", c.p_cross);
  read_opt(j, "p_mut", c.p_mut);
  read_opt(j, "dup_threshold", c.dup_threshold);
  read_opt(j, "w1", c.w1);
  read_opt(j, "w2", c.w2);
  read_opt(j, "k_p", c.k_p);
  read_opt(j, "k_r", c.k_r);
}

void to_json(json& j, const BoxEvent& e) {
  j = json{{"box_id", e.box_id},
           {"truth", e.truth},
           {"detected", e.detected},
           {"predicted", e.predicted ? json(*e.predicted) : json(nullptr)},
           {"confidence", e.confidence},
           {"center_dev", e.center_dev},
           {"rot_dev", e.rot_dev},
           {"nearest_gap", finite_or_null(e.nearest_gap)},
           {"attempts", e.attempts},
           {"blocked", e.blocked},
           {"grasped", e.grasped},
           {"placed", e.placed},
           {"stuck_count", e.stuck_count},
           {"shaken", e.shaken},
           {"disturbed", e.disturbed},
           {"placed_offset_x", e.placed_offset_x},
           {"placed_offset_y", e.placed_offset_y},
           {"placed_rot_err", e.placed_rot_err}};
}
void from_json(const json& j, BoxEvent& e) {
  e.box_id = j.at("box_id").get<int>();
  e.truth = j.at("truth").get<ObbPose>();
  e.detected = j.at("detected").get<bool>();
  if (const json& p = j.at("predicted"); !p.is_null()) e.predicted = p.get<ObbPose>();
  else e.predicted.reset();
  e.confidence = j.at("confidence").get<double>();
  e.center_dev = j.at("center_dev").get<double>();
  e.rot_dev = j.at("rot_dev").get<double>();
  e.nearest_gap = number_or_inf(j.at("nearest_gap"));
  e.attempts = j.at("attempts").get<int>();
  e.blocked = j.at("blocked").get<bool>();
  e.grasped = j.at("grasped").get<bool>();
  e.placed = j.at("placed").get<bool>();
  e.stuck_count = j.at("stuck_count").get<int>();
  e.shaken = j.at("shaken").get<bool>();
  e.disturbed = j.at("disturbed").get<bool>();
  e.placed_offset_x = j.at("placed_offset_x").get<double>();
  e.placed_offset_y = j.at("placed_offset_y").get<double>();
  e.placed_rot_err = j.at("placed_rot_err").get<double>();
}

void to_json(json& j, const TestRecord& r) {
  json boxes = json::array();
  for (const BoxEvent& e : r.boxes) boxes.push_back(e);
  j = json{{"id", r.id},
           {"key", r.key()},
           {"chromosome", to_csv(r.chromosome)},
           {"outcome", to_string(r.outcome)},
           {"failure_kind", to_string(r.failure_kind)},
           {"failure_modes", r.failure_modes.names()},
           {"fitness", r.fitness},
           {"cycles", r.cycles},
           {"seed", r.seed},
           {"infrastructure_error", r.infrastructure_error},
           {"infrastructure_message", r.infrastructure_message},
           {"provenance",
            {{"strategy", r.provenance.strategy},
             {"run", r.provenance.run},
             {"generation", r.provenance.generation},
             {"manifest", r.provenance.manifest}}},
           {"scene", r.scene},
           {"boxes", boxes}};
}
void from_json(const json& j, TestRecord& r) {
  r.id = j.at("id").get<int>();
  r.chromosome = chromosome_from_csv(j.at("chromosome").get<std::string>());
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.failure_kind = failure_kind_from_string(j.at("failure_kind").get<std::string>());
  r.failure_modes = {};
  for (const json& m : j.at("failure_modes")) {
    r.failure_modes.insert(failure_mode_from_name(m.get<std::string>()));
  }
  r.fitness = j.at("fitness").get<double>();
  r.cycles = j.at("cycles").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.infrastructure_error = j.at("infrastructure_error").get<bool>();
  r.infrastructure_message = j.at("infrastructure_message").get<std::string>();
  const json& p = j.at("provenance");
  r.provenance.strategy = p.at("strategy").get<std::string>();
  r.provenance.run = p.at("run").get<int>();
  r.provenance.generation = p.at("generation").get<int>();
  r.provenance.manifest = p.at("manifest").get<std::string>();
  r.scene = j.at("scene").get<Scene>();
  r.boxes = j.at("boxes").get<std::vector<BoxEvent>>();
  r.wall_clock_s = 0.0;
}

void to_json(json& j, const Tally& t) {
  j = json{{"pass", t.pass}, {"fail", t.fail}, {"near_fail", t.near_fail},
           {"soft", t.soft}, {"hard", t.hard}, {"total", t.total()}};
}

void to_json(json& j, const SparsenessReport& s) {
  j = json{{"s_avf", s.s_avf},
           {"s_avs", s.s_avs},
           {"n_unique_fm_combos", s.n_unique_fm_combos},
           {"n_failures", s.n_items}};
}

void to_json(json& j, const RepairReport& r) {
  json cases = json::array();
  for (const ReplayCase& c : r.cases) {
    cases.push_back({{"key", c.key},
                     {"original_kind", to_string(c.original_kind)},
                     {"original_modes", c.original_modes.names()},
                     {"repaired", c.repaired},
                     {"first_replay_modes", c.first_replay_modes.names()},
                     {"rerun_failures", c.rerun_failures}});
  }
  json residual = json::object();
  for (const auto& [k, v] : r.residual_modes) residual[k] = v;
  j = json{{"n_replayed", r.n_replayed},
           {"s_r_size", r.s_r.size()},
           {"s_nr_size", r.s_nr.size()},
           {"soft_total", r.soft_total},
           {"soft_repaired", r.soft_repaired},
           {"hard_total", r.hard_total},
           {"hard_repaired", r.hard_repaired},
           {"reruns_per_nonrepaired", r.reruns_per_nonrepaired},
           {"residual_modes", residual},
           {"s_r", r.s_r},
           {"s_nr", r.s_nr},
           {"cases", cases}};
}

std::string archive_to_jsonl(const std::vector<TestRecord>& records) {
  std::string out;
  for (const TestRecord& r : records) {
    out += json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<TestRecord> archive_from_jsonl(const std::string& text) {
  std::vector<TestRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<TestRecord>());
    } catch (const std::exception& e) {
      throw std::runtime_error("archive line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TestRecord> read_archive(const std::filesystem::path& path) {
  return archive_from_jsonl(read_text(path));
}

void write_archive(const std::filesystem::path& path, const std::vector<TestRecord>& records) {
  write_text(path, archive_to_jsonl(records));
}

std::string ModelDocument::hash() const { return hex64(fnv1a64(json(params).dump())); }

ModelDocument ModelDocument::derive(std::string child_name,
                                    SyntheticPerceptionParams child_params) const {
  ModelDocument child;
  child.name = std::move(child_name);
  child.version = version + 1;
  child.params = std::move(child_params);
  child.lineage = lineage;
  child.lineage.push_back({version, name, hash()});
  return child;
}

json model_to_json(const ModelDocument& doc) {
  json lineage = json::array();
  for (const ModelLineageEntry& e : doc.lineage) {
    lineage.push_back({{"version", e.version}, {"name", e.name}, {"hash", e.hash}});
  }
  return json{{"format", "armtest-perception-model"},
              {"name", doc.name},
              {"version", doc.version},
              {"hash", doc.hash()},
              {"lineage", lineage},
              {"params", doc.params}};
}

ModelDocument model_from_json(const json& j) {
  ModelDocument doc;
  if (j.contains("params")) {
    doc.name = j.value("name", std::string("M_o"));
    doc.version = j.value("version", 1);
    doc.params = j.at("params").get<SyntheticPerceptionParams>();
    for (const json& e : j.value("lineage", json::array())) {
      doc.lineage.push_back(
          {e.at("version").get<int>(), e.at("name").get<std::string>(), e.at("hash").get<std::string>()});
    }
  } else {
    // A bare parameter object is accepted as a first-version model.
    doc.params = j.get<SyntheticPerceptionParams>();
  }
  if (!doc.params.valid()) throw ConfigError("model parameters out of range");
  return doc;
}

ModelDocument read_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(read_text(path)));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("cannot read model '" + path.string() + "': " + e.what());
  }
}

void write_model(const std::filesystem::path& path, const ModelDocument& doc) {
  write_text(path, dump_pretty(model_to_json(doc)));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string dump_pretty(const json& j) { return j.dump(2) + "\n"; }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace armtest
