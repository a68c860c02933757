#include "armtest/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "armtest/analysis.hpp"
#include "armtest/errors.hpp"
#include "armtest/parallel.hpp"

namespace armtest {

namespace {

constexpr std::uint64_t kEpisodeStream = 0xE915;
constexpr std::uint64_t kGaStream = 0x6A;
constexpr std::uint64_t kRsStream = 0x125;

bool is_duplicate(const std::vector<double>& a, const std::vector<double>& b, double threshold) {
  try {
    return cosine_distance(a, b) < threshold;
  } catch (const UndefinedDistance&) {
    return a == b;
  }
}

void stamp(std::vector<TestRecord>& records, const SearchConfig& config, const std::string& manifest,
           int first_id, int generation) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].id = first_id + static_cast<int>(i);
    records[i].provenance = {std::string(to_string(config.strategy)), config.run, generation, manifest};
  }
}

TestRecord evaluate_one(const Chromosome& c, std::uint64_t seed, const EvaluationContext& ctx,
                        const FitnessCaps& caps) {
  TestRecord rec = run_episode(decode(c, ctx.workspace), ctx.perception, ctx.workspace,
                               ctx.thresholds, seed);
  rec.chromosome = c;
  rec.fitness = fitness(rec, ctx.config, caps);
  return rec;
}

}  // namespace

std::string_view to_string(Strategy s) { return s == Strategy::ga ? "ga" : "rs"; }

Strategy strategy_from_string(std::string_view s) {
  if (s == "ga") return Strategy::ga;
  if (s == "rs") return Strategy::rs;
  throw std::invalid_argument("unknown strategy '" + std::string(s) + "'");
}

bool SearchConfig::valid() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  const bool budget_ok = strategy == Strategy::ga ? eval_budget >= population_size : eval_budget >= 1;
  return population_size >= 1 && budget_ok && prob(p_cross) && prob(p_mut) &&
         dup_threshold >= 0.0 && k_p > 0.0 && k_r > 0.0 && w1 >= 0.0 && w2 >= 0.0;
}

FitnessCaps fitness_caps(const ParameterRanges& ranges, const WorkspaceConfig& workspace) {
  return {workspace.camera_fov.diagonal(), ranges.rot_max - ranges.rot_min};
}

double fitness(const TestRecord& record, const SearchConfig& config, const FitnessCaps& caps) {
  double max_pos = 0.0;
  double max_rot = 0.0;
  for (const BoxEvent& ev : record.boxes) {
    const double pos = ev.detected ? ev.center_dev : caps.position_cap;
    const double rot = ev.detected ? ev.rot_dev : caps.rotation_cap;
    max_pos = std::max(max_pos, pos);
    max_rot = std::max(max_rot, rot);
  }
  return config.w1 / config.k_p * max_pos + config.w2 / config.k_r * max_rot;
}

std::pair<Chromosome, Chromosome> crossover_one_point(const Chromosome& a, const Chromosome& b,
                                                      Rng& rng) {
  if (a.genes.size() != b.genes.size()) throw EncodingError("crossover of unequal-length parents");
  const std::size_t len = a.genes.size();
  if (len < 2) return {a, b};
  const std::size_t cut = 1 + rng.index(len - 1);
  Chromosome ca = a;
  Chromosome cb = b;
  for (std::size_t i = cut; i < len; ++i) std::swap(ca.genes[i], cb.genes[i]);
  return {std::move(ca), std::move(cb)};
}

Chromosome mutate_rm(const Chromosome& chromosome, const ParameterRanges& ranges, Rng& rng) {
  Chromosome out = chromosome;
  const std::size_t len = out.genes.size();
  if (len == 0) return out;
  const std::size_t k = 1 + rng.index(len);
  std::vector<std::size_t> idx(len);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + rng.index(len - i)]);
    const double factor = rng.bernoulli(0.5) ? 1.1 : 0.9;
    out.genes[idx[i]] *= factor;
  }
  clamp_to_ranges(out, ranges);
  return out;
}

Chromosome mutate_replace(const Chromosome& chromosome, const ParameterRanges& ranges,
                          const WorkspaceConfig& workspace, Rng& rng) {
  const Scene scene = decode(chromosome, workspace);
  const std::size_t n = scene.boxes.size();
  const std::size_t target = rng.index(n);
  for (int attempt = 0; attempt < kReplaceAttempts; ++attempt) {
    ObbPose candidate = scene.boxes[target];
    candidate.cx = rng.uniform(ranges.x_min, ranges.x_max);
    candidate.cy = rng.uniform(ranges.y_min, ranges.y_max);
    candidate.rot_deg = rng.uniform(ranges.rot_min, ranges.rot_max);
    bool clear = true;
    for (std::size_t j = 0; j < n && clear; ++j) {
      if (j != target && obb_intersect(candidate, scene.boxes[j])) clear = false;
    }
    if (clear) {
      Chromosome out = chromosome;
      out.genes[3 * target] = candidate.cx;
      out.genes[3 * target + 1] = candidate.cy;
      out.genes[3 * target + 2] = candidate.rot_deg;
      return out;
    }
  }
  return chromosome;
}

std::vector<double> normalized_genes(const Chromosome& chromosome, const ParameterRanges& ranges) {
  const std::size_t n = chromosome.genes.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = gene_range(ranges, i, n);
    out[i] = 2.0 * (chromosome.genes[i] - lo) / (hi - lo) - 1.0;
  }
  return out;
}

std::vector<double> unit_genes(const Chromosome& chromosome, const ParameterRanges& ranges) {
  const std::size_t n = chromosome.genes.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = gene_range(ranges, i, n);
    out[i] = (chromosome.genes[i] - lo) / (hi - lo);
  }
  return out;
}

Embedding range_embedding(const ParameterRanges& ranges) {
  return [ranges](const Chromosome& c) { return normalized_genes(c, ranges); };
}

Embedding identity_embedding() {
  return [](const Chromosome& c) { return c.genes; };
}

std::vector<Chromosome> dedup(std::vector<Chromosome> population, double threshold,
                              const Embedding& embed, const std::function<Chromosome()>& refill) {
  constexpr int kRefillAttempts = 10;
  std::vector<Chromosome> kept;
  std::vector<std::vector<double>> kept_embed;
  kept.reserve(population.size());
  auto duplicates_kept = [&](const std::vector<double>& e) {
    return std::any_of(kept_embed.begin(), kept_embed.end(),
                       [&](const std::vector<double>& k) { return is_duplicate(e, k, threshold); });
  };
  for (Chromosome& c : population) {
    std::vector<double> e = embed(c);
    if (!duplicates_kept(e)) {
      kept.push_back(std::move(c));
      kept_embed.push_back(std::move(e));
      continue;
    }
    if (!refill) continue;
    Chromosome fresh = refill();
    std::vector<double> fe = embed(fresh);
    for (int i = 1; i < kRefillAttempts && duplicates_kept(fe); ++i) {
      fresh = refill();
      fe = embed(fresh);
    }
    kept.push_back(std::move(fresh));
    kept_embed.push_back(std::move(fe));
  }
  return kept;
}

std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t eval_index) {
  return derive_seed(run_seed, kEpisodeStream, eval_index);
}

std::vector<TestRecord> evaluate_population_serial(std::span<const Chromosome> population,
                                                   std::span<const std::uint64_t> seeds,
                                                   const EvaluationContext& ctx) {
  const FitnessCaps caps = fitness_caps(ctx.ranges, ctx.workspace);
  std::vector<TestRecord> out;
  out.reserve(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) {
    out.push_back(evaluate_one(population[i], seeds[i], ctx, caps));
  }
  return out;
}

std::vector<TestRecord> evaluate_population(std::span<const Chromosome> population,
                                            std::span<const std::uint64_t> seeds,
                                            const EvaluationContext& ctx) {
  if (!ctx.perception.thread_safe()) return evaluate_population_serial(population, seeds, ctx);
  const FitnessCaps caps = fitness_caps(ctx.ranges, ctx.workspace);
  std::vector<TestRecord> out(population.size());
  parallel_for(population.size(),
               [&](std::size_t i) { out[i] = evaluate_one(population[i], seeds[i], ctx, caps); });
  return out;
}

std::vector<const TestRecord*> Archive::with_outcome(Outcome o) const {
  std::vector<const TestRecord*> out;
  for (const TestRecord& r : records) {
    if (r.outcome == o) out.push_back(&r);
  }
  return out;
}

std::size_t Archive::count(Outcome o) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [o](const TestRecord& r) { return r.outcome == o; }));
}

std::size_t binary_tournament(std::span<const double> fitness, Rng& rng) {
  const std::size_t a = rng.index(fitness.size());
  const std::size_t b = rng.index(fitness.size());
  if (fitness[a] > fitness[b]) return a;
  if (fitness[b] > fitness[a]) return b;
  return std::min(a, b);
}

Archive run_ga(const SearchConfig& config, const ParameterRanges& ranges,
               const WorkspaceConfig& workspace, PerceptionModel& perception,
               const RequirementThresholds& thresholds, const std::string& manifest,
               const SelectionOperator& select) {
  if (!config.valid() || config.eval_budget < config.population_size) {
    throw std::invalid_argument("invalid GA configuration");
  }
  const EvaluationContext ctx{ranges, workspace, perception, thresholds, config};
  const Embedding embed = range_embedding(ranges);
  Rng rng(derive_seed(config.seed, kGaStream));
  auto fresh = [&] { return sample_random(ranges, workspace, rng); };

  Archive archive;
  const auto budget = static_cast<std::size_t>(config.eval_budget);
  const auto pop_size = static_cast<std::size_t>(config.population_size);

  auto evaluate = [&](const std::vector<Chromosome>& batch, int generation) {
    std::vector<std::uint64_t> seeds(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      seeds[i] = episode_seed(config.seed, archive.records.size() + i);
    }
    std::vector<TestRecord> recs = evaluate_population(batch, seeds, ctx);
    stamp(recs, config, manifest, static_cast<int>(archive.records.size()), generation);
    return recs;
  };

  std::vector<Chromosome> population;
  population.reserve(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) population.push_back(fresh());
  population = dedup(std::move(population), config.dup_threshold, embed, fresh);

  std::vector<TestRecord> evaluated = evaluate(population, 0);
  std::vector<double> scores;
  for (const TestRecord& r : evaluated) scores.push_back(r.fitness);
  archive.records.insert(archive.records.end(), evaluated.begin(), evaluated.end());

  constexpr int kMaxBarrenGenerations = 100;
  int barren = 0;
  for (int generation = 1; archive.records.size() < budget; ++generation) {
    std::vector<Chromosome> offspring;
    offspring.reserve(pop_size + 1);
    while (offspring.size() < pop_size) {
      const Chromosome& pa = population[select(scores, rng)];
      const Chromosome& pb = population[select(scores, rng)];
      auto [ca, cb] = rng.bernoulli(config.p_cross) ? crossover_one_point(pa, pb, rng)
                                                    : std::pair<Chromosome, Chromosome>{pa, pb};
      for (Chromosome* child : {&ca, &cb}) {
        if (rng.bernoulli(config.p_mut)) {
          *child = rng.bernoulli(0.5) ? mutate_rm(*child, ranges, rng)
                                      : mutate_replace(*child, ranges, workspace, rng);
        }
      }
      offspring.push_back(std::move(ca));
      if (offspring.size() < pop_size) offspring.push_back(std::move(cb));
    }
    offspring = dedup(std::move(offspring), config.dup_threshold, embed, fresh);

    // Constraint violators are penalized and never simulated.
    const std::size_t remaining = budget - archive.records.size();
    std::vector<Chromosome> to_run;
    std::vector<std::size_t> slot;
    std::vector<double> next_scores(offspring.size(), kPenaltyFitness);
    std::vector<bool> keep(offspring.size(), true);
    for (std::size_t i = 0; i < offspring.size(); ++i) {
      if (!validate(offspring[i], ranges, workspace).ok()) continue;
      if (to_run.size() == remaining) {
        keep[i] = false;
        continue;
      }
      to_run.push_back(offspring[i]);
      slot.push_back(i);
    }
    if (to_run.empty()) {
      if (++barren >= kMaxBarrenGenerations) {
        throw SamplingInfeasible("GA produced no valid offspring for " +
                                 std::to_string(kMaxBarrenGenerations) + " generations");
      }
    } else {
      barren = 0;
    }

    evaluated = evaluate(to_run, generation);
    for (std::size_t j = 0; j < evaluated.size(); ++j) next_scores[slot[j]] = evaluated[j].fitness;
    archive.records.insert(archive.records.end(), evaluated.begin(), evaluated.end());

    population.clear();
    scores.clear();
    for (std::size_t i = 0; i < offspring.size(); ++i) {
      if (!keep[i]) continue;
      population.push_back(std::move(offspring[i]));
      scores.push_back(next_scores[i]);
    }
  }
  return archive;
}

Archive run_rs(const SearchConfig& config, const ParameterRanges& ranges,
               const WorkspaceConfig& workspace, PerceptionModel& perception,
               const RequirementThresholds& thresholds, const std::string& manifest) {
  if (config.eval_budget < 1) throw std::invalid_argument("RS budget must be at least 1");
  const EvaluationContext ctx{ranges, workspace, perception, thresholds, config};
  Rng rng(derive_seed(config.seed, kRsStream));
  const auto budget = static_cast<std::size_t>(config.eval_budget);
  const auto batch_size = static_cast<std::size_t>(std::max(1, config.population_size));
  const std::size_t max_draws = static_cast<std::size_t>(kMaxSamplingAttempts) * budget;

  Archive archive;
  std::vector<std::vector<double>> accepted;
  std::size_t draws = 0;
  while (archive.records.size() < budget) {
    // Batches only group episodes for the worker pool; seeds follow the
    // global evaluation index.
    std::vector<Chromosome> batch;
    const std::size_t want = std::min(batch_size, budget - archive.records.size());
    while (batch.size() < want) {
      if (++draws > max_draws) throw SamplingInfeasible("random search exhausted its draw limit");
      Chromosome c = sample_random(ranges, workspace, rng);
      std::vector<double> e = normalized_genes(c, ranges);
      const bool dup = std::any_of(accepted.begin(), accepted.end(), [&](const std::vector<double>& k) {
        return is_duplicate(e, k, config.dup_threshold);
      });
      if (dup) continue;
      accepted.push_back(std::move(e));
      batch.push_back(std::move(c));
    }
    std::vector<std::uint64_t> seeds(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      seeds[i] = episode_seed(config.seed, archive.records.size() + i);
    }
    std::vector<TestRecord> recs = evaluate_population(batch, seeds, ctx);
    const int first = static_cast<int>(archive.records.size());
    stamp(recs, config, manifest, first, first / static_cast<int>(batch_size));
    archive.records.insert(archive.records.end(), recs.begin(), recs.end());
  }
  return archive;
}

Archive run_search(const SearchConfig& config, const ParameterRanges& ranges,
                   const WorkspaceConfig& workspace, PerceptionModel& perception,
                   const RequirementThresholds& thresholds, const std::string& manifest) {
  return config.strategy == Strategy::ga
             ? run_ga(config, ranges, workspace, perception, thresholds, manifest)
             : run_rs(config, ranges, workspace, perception, thresholds, manifest);
}

}  // namespace armtest
