#include "armtest/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "armtest/errors.hpp"

namespace armtest {

SyntheticPerceptionParams default_operating_model() {
  SyntheticPerceptionParams p;
  p.base_center_noise_sd = 0.0008;
  p.base_rot_noise_sd = 0.2;
  p.rot_err_slope = 0.02;
  p.lum_err_gain = 1e-6;
  p.prox_err_gain = 0.05;
  p.miss_rate = 0.3;
  p.miss_cutoff = 1.5;
  p.lum_nominal = 3000.0;
  p.gap_nominal = 0.03;
  p.weak_regions = {{SceneFeature::abs_rotation, 25.0, std::numeric_limits<double>::infinity(), 12.0}};
  return p;
}

Config profile_config(std::string_view name) {
  Config c;
  c.profile = std::string(name);
  c.perception = default_operating_model();
  c.dataset.ranges.rot_min = -25.0;
  c.dataset.ranges.rot_max = 25.0;
  c.workspace.singularity_region = Rect{0.84, 0.90, 0.84, 0.92};
  if (name == kProfileUc1) {
    c.workspace.gripper.kind = GripperKind::suction;
    c.workspace.box_width = 0.17;
    c.workspace.box_height = 0.14;
  } else if (name == kProfileUc2) {
    c.workspace.gripper.kind = GripperKind::parallel;
    c.workspace.gripper.suction_tol = 0.02;
    c.workspace.gripper.finger_width = 0.02;
    c.workspace.gripper.finger_gap = 0.025;
    c.workspace.box_width = 0.12;
    c.workspace.box_height = 0.08;
    c.workspace.transport_collision = true;
  } else {
    throw ConfigError("unknown profile '" + std::string(name) + "' (expected uc1-suction or uc2-parallel)");
  }
  return c;
}

void Config::validate() const {
  if (!ranges.valid()) throw ConfigError("[ranges] invalid bounds");
  if (!dataset.ranges.valid()) throw ConfigError("[dataset.ranges] invalid bounds");
  if (!thresholds.valid()) throw ConfigError("[thresholds] values must be positive");
  if (!perception.valid()) throw ConfigError("[perception] negative gain or bad unit");
  if (!search.valid()) throw ConfigError("[search] invalid search parameters");
  if (dataset.count < 1) throw ConfigError("[dataset] count must be at least 1");
  if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0)) {
    throw ConfigError("[dataset] train_fraction must lie in (0, 1)");
  }
  if (stats.permutations < 1) throw ConfigError("[stats] permutations must be at least 1");
  if (!(repair_learning_rate >= 0.0 && repair_learning_rate <= 1.0)) {
    throw ConfigError("[repair] learning_rate must lie in [0, 1]");
  }
  const WorkspaceConfig& w = workspace;
  if (w.n_boxes < 1 || w.box_width <= 0.0 || w.box_height <= 0.0) {
    throw ConfigError("[workspace] needs at least one box with positive size");
  }
  if (w.camera_fov.width() <= 0.0 || w.camera_fov.height() <= 0.0) {
    throw ConfigError("[workspace] empty camera_fov");
  }
  if (w.p_stuck < 0.0 || w.p_stuck > 1.0 || w.shake_deg < 0.0) {
    throw ConfigError("[workspace] p_stuck must lie in [0, 1] and shake_deg be nonnegative");
  }
  if (w.gripper.suction_tol <= 0.0 || w.gripper.finger_width < 0.0 || w.gripper.finger_gap < 0.0) {
    throw ConfigError("[workspace.gripper] invalid gripper dimensions");
  }
}

json config_to_json(const Config& c) {
  json j;
  j["profile"] = c.profile;
  j["ranges"] = c.ranges;
  j["workspace"] = c.workspace;
  j["thresholds"] = c.thresholds;
  j["perception"] = c.perception;
  j["search"] = c.search;
  j["dataset"] = {{"count", c.dataset.count},
                  {"seed", c.dataset.seed},
                  {"train_fraction", c.dataset.train_fraction},
                  {"ranges", c.dataset.ranges}};
  j["stats"] = {{"permutations", c.stats.permutations}, {"seed", c.stats.seed}};
  j["repair"] = {{"learning_rate", c.repair_learning_rate}};
  return j;
}

namespace {

void check_keys(const json& patch, const json& reference, const std::string& where) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!reference.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    const json& ref = reference.at(it.key());
    if (ref.is_object()) {
      if (!it->is_object()) throw ConfigError("config key '" + path + "' must be a section");
      check_keys(*it, ref, path);
    }
  }
}

}  // namespace

Config config_from_json(const json& patch, std::string_view profile) {
  if (!patch.is_object()) throw ConfigError("config must be a table");
  std::string name(profile);
  if (auto it = patch.find("profile"); it != patch.end()) {
    if (!it->is_string()) throw ConfigError("profile must be a string");
    name = it->get<std::string>();
  }
  Config c = profile_config(name);
  json merged = config_to_json(c);
  check_keys(patch, merged, "");
  merged.merge_patch(patch);
  try {
    c.ranges = merged.at("ranges").get<ParameterRanges>();
    c.workspace = merged.at("workspace").get<WorkspaceConfig>();
    c.thresholds = merged.at("thresholds").get<RequirementThresholds>();
    c.perception = merged.at("perception").get<SyntheticPerceptionParams>();
    c.search = merged.at("search").get<SearchConfig>();
    const json& d = merged.at("dataset");
    c.dataset.count = d.at("count").get<int>();
    c.dataset.seed = d.at("seed").get<std::uint64_t>();
    c.dataset.train_fraction = d.at("train_fraction").get<double>();
    c.dataset.ranges = d.at("ranges").get<ParameterRanges>();
    c.stats.permutations = merged.at("stats").at("permutations").get<int>();
    c.stats.seed = merged.at("stats").at("seed").get<std::uint64_t>();
    c.repair_learning_rate = merged.at("repair").at("learning_rate").get<double>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- TOML subset ----

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(std::string_view line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
}

json parse_scalar(std::string_view v, int line_no) {
  v = trim(v);
  if (v.empty()) fail(line_no, "missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') fail(line_no, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char n = v[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  std::string num;
  for (char ch : v) {
    if (ch != '_') num += ch;
  }
  const char* first = num.data();
  const char* last = num.data() + num.size();
  if (*first == '+') ++first;
  if (num.find_first_of(".eE") == std::string::npos) {
    long long iv = 0;
    auto [p, ec] = std::from_chars(first, last, iv);
    if (ec == std::errc() && p == last) return iv;
    unsigned long long uv = 0;
    auto [p2, ec2] = std::from_chars(first, last, uv);
    if (ec2 == std::errc() && p2 == last) return uv;
  }
  double dv = 0.0;
  auto [p, ec] = std::from_chars(first, last, dv);
  if (ec != std::errc() || p != last) fail(line_no, "cannot parse value '" + std::string(v) + "'");
  return dv;
}

json parse_value(std::string_view v, int line_no) {
  v = trim(v);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') fail(line_no, "unterminated array");
    json arr = json::array();
    std::string_view body = trim(v.substr(1, v.size() - 2));
    std::size_t start = 0;
    bool in_str = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i < body.size() && body[i] == '"') in_str = !in_str;
      if (i == body.size() || (body[i] == ',' && !in_str)) {
        std::string_view item = trim(body.substr(start, i - start));
        if (!item.empty()) arr.push_back(parse_scalar(item, line_no));
        else if (i < body.size()) fail(line_no, "empty array element");
        start = i + 1;
      }
    }
    return arr;
  }
  return parse_scalar(v, line_no);
}

std::vector<std::string> split_path(std::string_view s, int line_no) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '.') {
      std::string_view part = trim(s.substr(start, i - start));
      if (part.empty()) fail(line_no, "empty name in '" + std::string(s) + "'");
      parts.emplace_back(part);
      start = i + 1;
    }
  }
  return parts;
}

}  // namespace

json parse_toml_subset(std::string_view text) {
  json root = json::object();
  json* table = &root;
  std::string pending;
  int pending_line = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string line = strip_comment(raw);
    if (!pending.empty()) {
      pending += " " + std::string(trim(line));
      if (std::count(pending.begin(), pending.end(), '[') > std::count(pending.begin(), pending.end(), ']')) {
        continue;
      }
      line = pending;
      pending.clear();
    }
    const std::string_view t = trim(line);
    if (t.empty()) continue;

    if (t.front() == '[') {
      const bool array_table = t.size() > 1 && t[1] == '[';
      const std::size_t open = array_table ? 2 : 1;
      if (t.size() < 2 * open + 1 || t.substr(t.size() - open) != std::string(open, ']')) {
        fail(line_no, "malformed section header");
      }
      const auto parts = split_path(t.substr(open, t.size() - 2 * open), line_no);
      json* node = &root;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        json& child = (*node)[parts[i]];
        const bool last = i + 1 == parts.size();
        if (last && array_table) {
          if (child.is_null()) child = json::array();
          if (!child.is_array()) fail(line_no, "'" + parts[i] + "' is not an array of tables");
          child.push_back(json::object());
          node = &child.back();
        } else {
          if (child.is_null()) child = json::object();
          if (child.is_array() && !child.empty()) {
            node = &child.back();
            continue;
          }
          if (!child.is_object()) fail(line_no, "'" + parts[i] + "' is not a table");
          node = &child;
        }
      }
      table = node;
      continue;
    }

    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const std::string_view value = trim(t.substr(eq + 1));
    if (!value.empty() && value.front() == '[' &&
        std::count(value.begin(), value.end(), '[') > std::count(value.begin(), value.end(), ']')) {
      pending = std::string(t);
      pending_line = line_no;
      continue;
    }
    const auto keys = split_path(t.substr(0, eq), line_no);
    json* node = table;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      json& child = (*node)[keys[i]];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) fail(line_no, "'" + keys[i] + "' is not a table");
      node = &child;
    }
    if (node->contains(keys.back())) fail(line_no, "duplicate key '" + keys.back() + "'");
    (*node)[keys.back()] = parse_value(value, line_no);
  }
  if (!pending.empty()) fail(pending_line, "unterminated array");
  return root;
}

Config load_config(const std::filesystem::path& path, std::string_view profile) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  json patch = parse_toml_subset(text);
  if (!profile.empty()) patch["profile"] = std::string(profile);
  return config_from_json(patch, kProfileUc1);
}

}  // namespace armtest
