#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "armtest/analysis.hpp"
#include "armtest/perception.hpp"
#include "armtest/repair.hpp"
#include "armtest/scene.hpp"
#include "armtest/search.hpp"
#include "armtest/simulator.hpp"

namespace armtest {

using json = nlohmann::ordered_json;

void to_json(json& j, const Vec2& v);
void from_json(const json& j, Vec2& v);
void to_json(json& j, const Rect& r);
void from_json(const json& j, Rect& r);
void to_json(json& j, const ObbPose& p);
void from_json(const json& j, ObbPose& p);
void to_json(json& j, const ParameterRanges& r);
void from_json(const json& j, ParameterRanges& r);
void to_json(json& j, const GripperSpec& g);
void from_json(const json& j, GripperSpec& g);
void to_json(json& j, const WorkspaceConfig& w);
void from_json(const json& j, WorkspaceConfig& w);
void to_json(json& j, const Scene& s);
void from_json(const json& j, Scene& s);
void to_json(json& j, const WeakRegion& w);
void from_json(const json& j, WeakRegion& w);
void to_json(json& j, const SyntheticPerceptionParams& p);
void from_json(const json& j, SyntheticPerceptionParams& p);
void to_json(json& j, const RequirementThresholds& t);
void from_json(const json& j, RequirementThresholds& t);
void to_json(json& j, const SearchConfig& c);
void from_json(const json& j, SearchConfig& c);
void to_json(json& j, const BoxEvent& e);
void from_json(const json& j, BoxEvent& e);
void to_json(json& j, const TestRecord& r);
void from_json(const json& j, TestRecord& r);
void to_json(json& j, const Tally& t);
void to_json(json& j, const SparsenessReport& s);
void to_json(json& j, const RepairReport& r);

// ---- archives ----

// One compact JSON object per line, in record order.
std::string archive_to_jsonl(const std::vector<TestRecord>& records);
std::vector<TestRecord> archive_from_jsonl(const std::string& text);

std::vector<TestRecord> read_archive(const std::filesystem::path& path);
void write_archive(const std::filesystem::path& path, const std::vector<TestRecord>& records);

// ---- model documents ----

struct ModelLineageEntry {
  int version = 0;
  std::string name;
  std::string hash;
};

struct ModelDocument {
  std::string name = "M_o";
  int version = 1;
  SyntheticPerceptionParams params;
  std::vector<ModelLineageEntry> lineage;  // ancestors, oldest first

  std::string hash() const;
  // Next version, with this document appended to the lineage.
  ModelDocument derive(std::string child_name, SyntheticPerceptionParams child_params) const;
};

json model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const json& j);
ModelDocument read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const ModelDocument& doc);

// ---- files ----

std::string read_text(const std::filesystem::path& path);
// Writes through a temporary sibling and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

// Pretty-printed with a trailing newline.
std::string dump_pretty(const json& j);

std::string hex64(std::uint64_t v);

}  // namespace armtest
