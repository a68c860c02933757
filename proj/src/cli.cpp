#include "armtest/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "armtest/analysis.hpp"
#include "armtest/config.hpp"
#include "armtest/errors.hpp"
#include "armtest/external_perception.hpp"
#include "armtest/io.hpp"
#include "armtest/parallel.hpp"
#include "armtest/perception.hpp"
#include "armtest/repair.hpp"
#include "armtest/search.hpp"

namespace fs = std::filesystem;

namespace armtest {

namespace {

// Raised for missing records; maps to exit 4.
struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string profile;
  std::string config_path;
  std::string model_path;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_model = true) {
  cmd->add_option("--profile", o.profile, "Workspace profile: uc1-suction or uc2-parallel")
      ->check(CLI::IsMember({std::string(kProfileUc1), std::string(kProfileUc2)}));
  cmd->add_option("--config", o.config_path, "Config file (TOML subset)");
  if (with_model) cmd->add_option("--model", o.model_path, "Perception model JSON");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path manifest_path_for(const fs::path& archive) {
  fs::path p = archive;
  p.replace_extension(".manifest.json");
  return p;
}

std::optional<json> read_manifest(const fs::path& archive) {
  const fs::path p = manifest_path_for(archive);
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_text(p));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Hash over everything except the timestamp and the hash itself.
std::string manifest_hash(json manifest) {
  manifest.erase("created");
  manifest.erase("manifest_hash");
  return hex64(fnv1a64(manifest.dump()));
}

json finalize_manifest(json manifest) {
  const std::string h = manifest_hash(manifest);
  json out;
  out["manifest_hash"] = h;
  out["created"] = utc_timestamp();
  for (auto it = manifest.begin(); it != manifest.end(); ++it) out[it.key()] = it.value();
  return out;
}

// Flag > config file > manifest snapshot beside the archive > profile defaults.
Config resolve_config(const CommonOptions& o, const std::vector<fs::path>& archives = {}) {
  if (!o.config_path.empty()) return load_config(o.config_path, o.profile);
  if (!archives.empty()) {
    if (auto m = read_manifest(archives.front()); m && m->contains("config")) {
      json snapshot = m->at("config");
      if (!o.profile.empty() && snapshot.value("profile", std::string()) != o.profile) {
        return profile_config(o.profile);
      }
      return config_from_json(snapshot);
    }
  }
  return profile_config(o.profile.empty() ? kProfileUc1 : o.profile);
}

ModelDocument resolve_model(const CommonOptions& o, const Config& cfg,
                            const std::vector<fs::path>& archives = {}) {
  if (!o.model_path.empty()) {
    if (!fs::exists(o.model_path)) throw ConfigError("model file '" + o.model_path + "' not found");
    return read_model(o.model_path);
  }
  if (!archives.empty()) {
    const fs::path sibling = archives.front().parent_path() / "model.json";
    if (fs::exists(sibling)) return read_model(sibling);
  }
  ModelDocument doc;
  doc.params = cfg.perception;
  return doc;
}

json model_ref(const ModelDocument& doc) {
  return json{{"name", doc.name}, {"version", doc.version}, {"hash", doc.hash()}};
}

// ---- dataset ----

struct DatasetOptions {
  CommonOptions common;
  int count = -1;
  long long seed = -1;
  std::string out;
  bool eval = false;
};

int cmd_dataset(const DatasetOptions& o, std::ostream& out) {
  Config cfg = resolve_config(o.common);
  if (o.count >= 0) cfg.dataset.count = o.count;
  if (o.seed >= 0) cfg.dataset.seed = static_cast<std::uint64_t>(o.seed);
  cfg.validate();

  const fs::path dir(o.out);
  const std::vector<DatasetSample> samples =
      generate_dataset(cfg.dataset.ranges, cfg.workspace, cfg.dataset.count, cfg.dataset.seed);
  const DatasetSplit split = split_dataset(cfg.dataset.count, cfg.dataset.train_fraction);

  json manifest = finalize_manifest(json{{"command", "dataset"},
                                         {"profile", cfg.profile},
                                         {"count", cfg.dataset.count},
                                         {"seed", cfg.dataset.seed},
                                         {"outputs", {"scenes.jsonl", "labels/", "train.txt", "val.txt"}},
                                         {"config", config_to_json(cfg)}});
  const std::string hash = manifest.at("manifest_hash").get<std::string>();

  auto name = [](int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05d", id);
    return std::string(buf);
  };
  std::string scenes;
  for (const DatasetSample& s : samples) {
    json line{{"id", s.id},
              {"chromosome", to_csv(s.chromosome)},
              {"scene", s.scene},
              {"manifest", hash}};
    scenes += line.dump() + "\n";
    std::string labels;
    for (const Annotation& a : s.annotations) labels += label_line(a, cfg.workspace.camera_fov) + "\n";
    write_text(dir / "labels" / (name(s.id) + ".txt"), labels);
  }
  write_text(dir / "scenes.jsonl", scenes);
  std::string train;
  std::string val;
  for (int id : split.train) train += "labels/" + name(id) + ".txt\n";
  for (int id : split.validation) val += "labels/" + name(id) + ".txt\n";
  write_text(dir / "train.txt", train);
  write_text(dir / "val.txt", val);
  write_text(dir / "manifest.json", dump_pretty(manifest));

  out << "wrote " << samples.size() << " scenes (" << split.train.size() << " train / "
      << split.validation.size() << " validation) to " << dir.string() << "\n";

  if (o.eval) {
    const ModelDocument model = resolve_model(o.common, cfg);
    std::vector<std::vector<Detection>> preds;
    std::vector<std::vector<Annotation>> gts;
    for (int id : split.validation) {
      const DatasetSample& s = samples[static_cast<std::size_t>(id)];
      preds.push_back(predict(model.params, s.scene, derive_seed(derive_seed(cfg.dataset.seed, "eval"), static_cast<std::uint64_t>(id))));
      gts.push_back(s.annotations);
    }
    const EvalResult ev = eval_offline(preds, gts);
    json report{{"model", model_ref(model)}, {"map_50_95", ev.map_50_95}, {"f1", ev.f1}, {"ap", ev.ap},
                {"iou_thresholds", kIouThresholds}, {"manifest", hash}};
    write_text(dir / "eval.json", dump_pretty(report));
    char buf[96];
    std::snprintf(buf, sizeof buf, "validation mAP@[0.50:0.95] = %.4f, F1@0.5 = %.4f\n", ev.map_50_95, ev.f1);
    out << buf;
  }
  return kExitOk;
}

// ---- search ----

struct SearchOptions {
  CommonOptions common;
  std::string strategy;
  int runs = 5;
  int budget = -1;
  long long seed = 0;
  std::string out;
  std::string perception;
};

int cmd_search(const SearchOptions& o, std::ostream& out) {
  Config cfg = resolve_config(o.common);
  if (o.budget >= 0) cfg.search.eval_budget = o.budget;
  cfg.search.strategy = strategy_from_string(o.strategy);
  cfg.validate();
  const ModelDocument model = resolve_model(o.common, cfg);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_model(dir / "model.json", model);

  std::unique_ptr<PerceptionModel> perception;
  if (o.perception.empty()) {
    perception = std::make_unique<SyntheticPerception>(model.params);
  } else {
    perception = connect_external_perception(o.perception);
  }

  const auto master = static_cast<std::uint64_t>(o.seed);
  for (int run = 0; run < o.runs; ++run) {
    SearchConfig sc = cfg.search;
    sc.seed = derive_seed(derive_seed(master, "run"), static_cast<std::uint64_t>(run));
    sc.run = run;
    const std::string stem = o.strategy + "_run" + std::to_string(run);
    json manifest = finalize_manifest(json{{"command", "search"},
                                           {"strategy", o.strategy},
                                           {"run", run},
                                           {"master_seed", master},
                                           {"run_seed", sc.seed},
                                           {"profile", cfg.profile},
                                           {"budget", sc.eval_budget},
                                           {"model", model_ref(model)},
                                           {"perception", o.perception.empty() ? "synthetic" : o.perception},
                                           {"outputs", {stem + ".jsonl"}},
                                           {"config", config_to_json(cfg)}});
    const std::string hash = manifest.at("manifest_hash").get<std::string>();
    const Archive archive = run_search(sc, cfg.ranges, cfg.workspace, *perception, cfg.thresholds, hash);
    write_archive(dir / (stem + ".jsonl"), archive.records);
    write_text(dir / (stem + ".manifest.json"), dump_pretty(manifest));
    const Tally t = tally(archive.records);
    out << stem << ": " << archive.records.size() << " tests, " << t.fail << " failed (" << t.soft
        << " soft, " << t.hard << " hard), " << t.near_fail << " near-fail\n";
  }
  return kExitOk;
}

// ---- repair ----

struct RepairOptions {
  CommonOptions common;
  std::vector<std::string> archives;
  std::string out;
  long long seed = 0;
};

std::vector<fs::path> to_paths(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

std::vector<TestRecord> load_archives(const std::vector<fs::path>& paths) {
  std::vector<TestRecord> all;
  for (const fs::path& p : paths) {
    if (!fs::exists(p)) throw ConfigError("archive '" + p.string() + "' not found");
    std::vector<TestRecord> recs = read_archive(p);
    all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return all;
}

int cmd_repair(const RepairOptions& o, std::ostream& out) {
  const std::vector<fs::path> paths = to_paths(o.archives);
  const std::vector<TestRecord> records = load_archives(paths);
  const Config cfg = resolve_config(o.common, paths);
  const ModelDocument operating = resolve_model(o.common, cfg, paths);

  const std::vector<DatasetSample> data =
      generate_dataset(cfg.dataset.ranges, cfg.workspace, cfg.dataset.count, cfg.dataset.seed);
  const DatasetSplit split = split_dataset(cfg.dataset.count, cfg.dataset.train_fraction);
  std::vector<DatasetSample> original_val;
  for (int id : split.validation) original_val.push_back(data[static_cast<std::size_t>(id)]);

  const RepairDataset ds = assemble(records, original_val);
  if (ds.empty()) {
    out << "nothing to repair: no failed or near-failed tests in " << records.size() << " records\n";
    return kExitOk;
  }
  const RefitResult fit = refit(operating.params, ds, cfg.repair_learning_rate);
  const ModelDocument repaired = operating.derive("M_f", fit.params);

  std::vector<const TestRecord*> failed;
  for (const TestRecord& r : records) {
    if (r.outcome == Outcome::fail) failed.push_back(&r);
  }
  std::sort(failed.begin(), failed.end(), [](const TestRecord* a, const TestRecord* b) {
    return std::tuple(a->provenance.strategy, a->provenance.run, a->id) <
           std::tuple(b->provenance.strategy, b->provenance.run, b->id);
  });
  SyntheticPerception mf(fit.params);
  const RepairReport rep =
      replay(failed, mf, cfg.workspace, cfg.thresholds, static_cast<std::uint64_t>(o.seed));

  auto verr = [](const ValidationError& e) {
    return json{{"center_m", e.center}, {"rotation_deg", e.rotation}, {"combined", e.combined}, {"boxes", e.boxes}};
  };
  json report{{"model_before", model_ref(operating)},
              {"model_after", model_ref(repaired)},
              {"dataset",
               {{"samples", ds.samples.size()},
                {"train", ds.train.size()},
                {"validation", ds.validation.size()},
                {"original_validation", ds.original_validation.size()},
                {"provenance", ds.provenance()}}},
              {"refit",
               {{"learning_rate", cfg.repair_learning_rate},
                {"fitted_rot_err_slope", fit.fitted_rot_err_slope},
                {"fitted_lum_err_gain", fit.fitted_lum_err_gain},
                {"fitted_prox_err_gain", fit.fitted_prox_err_gain},
                {"fitted_region_excess", fit.fitted_region_excess},
                {"validation_before", verr(fit.before)},
                {"validation_after", verr(fit.after)}}},
              {"replay", rep}};
  const fs::path dir(o.out);
  write_model(dir / "model_repaired.json", repaired);
  write_text(dir / "repair_report.json", dump_pretty(report));

  out << "repair dataset: " << ds.samples.size() << " samples (" << ds.train.size() << " train / "
      << ds.validation.size() << " validation + " << ds.original_validation.size() << " original)\n";
  out << "replayed " << rep.n_replayed << " failures: " << rep.s_r.size() << " repaired, "
      << rep.s_nr.size() << " not repaired (soft " << rep.soft_repaired << "/" << rep.soft_total
      << ", hard " << rep.hard_repaired << "/" << rep.hard_total << ")\n";
  return kExitOk;
}

// ---- stats ----

struct StatsOptions {
  CommonOptions common;
  std::vector<std::string> groups;
  std::string out;
  int permutations = -1;
  long long seed = -1;
};

struct GroupData {
  std::string name;
  std::vector<fs::path> files;
  std::vector<std::vector<TestRecord>> runs;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_stats(const StatsOptions& o, std::ostream& out) {
  if (o.groups.empty()) throw CLI::ValidationError("--group", "at least one group is required");
  std::vector<GroupData> groups;
  for (const std::string& g : o.groups) {
    const auto eq = g.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == g.size()) {
      throw CLI::ValidationError("--group", "expected name=file1,file2,...");
    }
    GroupData gd;
    gd.name = g.substr(0, eq);
    for (const std::string& f : split_csv(g.substr(eq + 1))) gd.files.emplace_back(f);
    if (gd.files.empty()) throw CLI::ValidationError("--group", "group '" + gd.name + "' has no archives");
    for (const fs::path& f : gd.files) gd.runs.push_back(load_archives({f}));
    groups.push_back(std::move(gd));
  }
  const Config cfg = resolve_config(o.common, groups.front().files);
  const int permutations = o.permutations > 0 ? o.permutations : cfg.stats.permutations;
  const std::uint64_t seed = o.seed >= 0 ? static_cast<std::uint64_t>(o.seed) : cfg.stats.seed;

  std::string tally_csv = "group,archive,pass,fail,near_fail,soft,hard,total\n";
  std::string sparse_csv = "group,archive,n_failures,s_avf,s_avs,n_unique_fm_combos\n";
  json groups_json = json::object();
  // metric -> group -> per-run values
  const std::vector<std::string> metrics = {"failures", "near_fails", "s_avf", "s_avs", "n_unique_fm_combos"};
  std::map<std::string, std::vector<std::vector<double>>> samples;
  for (const std::string& m : metrics) samples[m].resize(groups.size());

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const GroupData& g = groups[gi];
    Tally total;
    json runs = json::array();
    for (std::size_t ri = 0; ri < g.runs.size(); ++ri) {
      const std::vector<TestRecord>& recs = g.runs[ri];
      const Tally t = tally(recs);
      total += t;
      const std::vector<const TestRecord*> f = failures(recs);
      const SparsenessReport sp = sparseness_report(f, cfg.ranges);
      const std::string file = g.files[ri].filename().string();
      tally_csv += g.name + "," + file + "," + std::to_string(t.pass) + "," + std::to_string(t.fail) + "," +
                   std::to_string(t.near_fail) + "," + std::to_string(t.soft) + "," +
                   std::to_string(t.hard) + "," + std::to_string(t.total()) + "\n";
      sparse_csv += g.name + "," + file + "," + std::to_string(sp.n_items) + "," + fmt(sp.s_avf) + "," +
                    fmt(sp.s_avs) + "," + std::to_string(sp.n_unique_fm_combos) + "\n";
      samples["failures"][gi].push_back(t.fail);
      samples["near_fails"][gi].push_back(t.near_fail);
      samples["s_avf"][gi].push_back(sp.s_avf);
      samples["s_avs"][gi].push_back(sp.s_avs);
      samples["n_unique_fm_combos"][gi].push_back(sp.n_unique_fm_combos);
      runs.push_back({{"archive", file}, {"tally", t}, {"sparseness", sp}});
    }
    tally_csv += g.name + ",ALL," + std::to_string(total.pass) + "," + std::to_string(total.fail) + "," +
                 std::to_string(total.near_fail) + "," + std::to_string(total.soft) + "," +
                 std::to_string(total.hard) + "," + std::to_string(total.total()) + "\n";
    groups_json[g.name] = {{"archives", g.runs.size()}, {"tally", total}, {"runs", runs}};
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };

  json stats{{"permutations", permutations}, {"seed", seed}, {"groups", groups_json}};
  out << "group        pass  fail  soft  hard  near-fail\n";
  for (const GroupData& g : groups) {
    Tally t;
    for (const auto& r : g.runs) t += tally(r);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-12s %5d %5d %5d %5d %10d\n", g.name.c_str(), t.pass, t.fail, t.soft,
                  t.hard, t.near_fail);
    out << buf;
  }

  if (groups.size() >= 2) {
    json comparisons = json::array();
    out << "\nmetric               group_a      group_b      mean_a     mean_b     p-value  delta\n";
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        for (const std::string& m : metrics) {
          const auto& sa = samples[m][a];
          const auto& sb = samples[m][b];
          const StatResult r = compare_samples(sa, sb, permutations, seed);
          comparisons.push_back({{"metric", m},
                                 {"group_a", groups[a].name},
                                 {"group_b", groups[b].name},
                                 {"mean_a", mean(sa)},
                                 {"mean_b", mean(sb)},
                                 {"difference", r.statistic},
                                 {"p_value", r.p_value},
                                 {"cliffs_delta", r.cliffs_delta},
                                 {"magnitude", to_string(r.magnitude)}});
          char buf[192];
          std::snprintf(buf, sizeof buf, "%-20s %-12s %-12s %-10.4g %-10.4g %-8.4f %+.3f %c\n", m.c_str(),
                        groups[a].name.c_str(), groups[b].name.c_str(), mean(sa), mean(sb), r.p_value,
                        r.cliffs_delta, std::toupper(to_string(r.magnitude)[0]));
          out << buf;
        }
      }
    }
    stats["comparisons"] = comparisons;
  } else {
    out << "single group: comparison section omitted\n";
  }

  const fs::path dir(o.out);
  write_text(dir / "tally.csv", tally_csv);
  write_text(dir / "sparseness.csv", sparse_csv);
  write_text(dir / "stats.json", dump_pretty(stats));
  return kExitOk;
}

// ---- replay ----

struct ReplayOptions {
  CommonOptions common;
  std::string archive;
  std::string id;
  std::optional<std::uint64_t> seed;
  std::string perception;
};

int cmd_replay(const ReplayOptions& o, std::ostream& out) {
  const std::vector<fs::path> paths{fs::path(o.archive)};
  const std::vector<TestRecord> records = load_archives(paths);
  const TestRecord* found = nullptr;
  for (const TestRecord& r : records) {
    if (r.key() == o.id || std::to_string(r.id) == o.id) {
      found = &r;
      break;
    }
  }
  if (!found) throw NotFound("no record '" + o.id + "' in " + o.archive);
  const Config cfg = resolve_config(o.common, paths);
  const ModelDocument model = resolve_model(o.common, cfg, paths);
  std::unique_ptr<PerceptionModel> perception;
  if (o.perception.empty()) {
    perception = std::make_unique<SyntheticPerception>(model.params);
  } else {
    perception = connect_external_perception(o.perception);
  }

  const std::uint64_t seed = o.seed.value_or(found->seed);
  std::vector<CycleTrace> trace;
  TestRecord rec = run_episode(found->scene, *perception, cfg.workspace, cfg.thresholds, seed, &trace);
  rec.id = found->id;
  rec.chromosome = found->chromosome;
  rec.provenance = found->provenance;
  rec.fitness = fitness(rec, cfg.search, fitness_caps(cfg.ranges, cfg.workspace));

  for (const CycleTrace& c : trace) {
    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "cycle %d: detections=%d box=%d confidence=%.3f iou=%.3f action=%s placed_rot_err=%.3f\n",
                  c.cycle, c.detections, c.box, c.confidence, c.iou, c.action.c_str(), c.placed_rot_err);
    out << buf;
  }
  out << "outcome: " << to_string(rec.outcome) << " (" << to_string(rec.failure_kind) << ")"
      << (rec.failure_modes.empty() ? "" : " " + rec.failure_modes.label())
      << (rec.outcome == found->outcome && rec.failure_modes == found->failure_modes ? ", matches archive"
                                                                                     : ", differs from archive")
      << "\n";
  out << json(rec).dump() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_workers_from_env();
  CLI::App app{"Search-based testing of a vision-guided pick-and-place arm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "armtest 0.1.0");

  DatasetOptions dopt;
  CLI::App* dataset = app.add_subcommand("dataset", "Generate an annotated scene dataset");
  add_common(dataset, dopt.common);
  dataset->add_option("--count", dopt.count, "Number of scenes")->check(CLI::PositiveNumber);
  dataset->add_option("--seed", dopt.seed, "Dataset seed")->check(CLI::NonNegativeNumber);
  dataset->add_option("--out", dopt.out, "Output directory")->required();
  dataset->add_flag("--eval", dopt.eval, "Evaluate the model on the validation split");

  SearchOptions sopt;
  CLI::App* search = app.add_subcommand("search", "Run GA or RS test generation");
  add_common(search, sopt.common);
  search->add_option("--strategy", sopt.strategy, "ga or rs")->required()->check(CLI::IsMember({"ga", "rs"}));
  search->add_option("--runs", sopt.runs, "Independent runs")->check(CLI::PositiveNumber);
  search->add_option("--budget", sopt.budget, "Evaluations per run")->check(CLI::PositiveNumber);
  search->add_option("--seed", sopt.seed, "Master seed")->check(CLI::NonNegativeNumber);
  search->add_option("--out", sopt.out, "Output directory")->required();
  search->add_option("--perception", sopt.perception, "External model: exec:<cmd> or tcp:<host>:<port>");

  RepairOptions ropt;
  CLI::App* repair = app.add_subcommand("repair", "Refit the perception model from failures and replay them");
  add_common(repair, ropt.common);
  repair->add_option("--archive", ropt.archives, "Archive files")->required();
  repair->add_option("--out", ropt.out, "Output directory")->required();
  repair->add_option("--seed", ropt.seed, "Seed for the flakiness reruns")->check(CLI::NonNegativeNumber);

  StatsOptions topt;
  CLI::App* stats = app.add_subcommand("stats", "Tallies, sparseness and GA/RS comparisons");
  add_common(stats, topt.common, false);
  stats->add_option("--group", topt.groups, "name=archive1,archive2,...")->required();
  stats->add_option("--out", topt.out, "Output directory")->required();
  stats->add_option("--permutations", topt.permutations, "Monte-Carlo permutations")->check(CLI::PositiveNumber);
  stats->add_option("--seed", topt.seed, "Permutation seed")->check(CLI::NonNegativeNumber);

  ReplayOptions popt;
  CLI::App* replay_cmd = app.add_subcommand("replay", "Re-run one archived test with a trace");
  add_common(replay_cmd, popt.common);
  replay_cmd->add_option("--archive", popt.archive, "Archive file")->required();
  replay_cmd->add_option("--id", popt.id, "Record id or strategy:run:id key")->required();
  replay_cmd->add_option("--seed", popt.seed, "Episode seed override");
  replay_cmd->add_option("--perception", popt.perception, "External model: exec:<cmd> or tcp:<host>:<port>");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*dataset) return cmd_dataset(dopt, out);
    if (*search) return cmd_search(sopt, out);
    if (*repair) return cmd_repair(ropt, out);
    if (*stats) return cmd_stats(topt, out);
    if (*replay_cmd) return cmd_replay(popt, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SamplingInfeasible& e) {
    err << "error: infeasible sampling: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NotFound& e) {
    err << "error: " << e.what() << "\n";
    return kExitNotFound;
  } catch (const RefitRejected& e) {
    err << "error: " << e.what() << "\n";
    return kExitRefitRejected;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace armtest
