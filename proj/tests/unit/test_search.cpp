#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "armtest/analysis.hpp"
#include "armtest/config.hpp"
#include "armtest/search.hpp"

using namespace armtest;

namespace {

TestRecord record_with(std::vector<std::pair<double, double>> devs) {
  TestRecord r;
  for (auto [c, rot] : devs) {
    BoxEvent ev;
    ev.detected = true;
    ev.center_dev = c;
    ev.rot_dev = rot;
    r.boxes.push_back(ev);
  }
  return r;
}

ParameterRanges wide_ranges() {
  ParameterRanges r;
  r.x_min = 0.0;
  r.x_max = 10.0;
  r.y_min = 0.0;
  r.y_max = 10.0;
  r.rot_min = -170;
  r.rot_max = 170;
  r.lum_min = 0;
  r.lum_max = 10000;
  return r;
}

double mean_fitness(const Archive& a, int generation) {
  double sum = 0;
  int n = 0;
  for (const TestRecord& r : a.records) {
    if (r.provenance.generation == generation) {
      sum += r.fitness;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

}  // namespace

TEST_CASE("fitness by hand") {
  const SearchConfig cfg;
  const FitnessCaps caps{1.0, 60.0};
  CHECK(fitness(record_with({{0, 0}, {0, 0}}), cfg, caps) == 0.0);
  CHECK(fitness(record_with({{0.01, 1}, {0.005, 2}}), cfg, caps) == doctest::Approx(1.5));
  CHECK(fitness(record_with({{0.02, 0}}), cfg, caps) == doctest::Approx(1.0));
  TestRecord missed = record_with({{0.0, 0.0}});
  missed.boxes[0].detected = false;
  CHECK(fitness(missed, cfg, caps) == doctest::Approx(0.5 / 0.01 * 1.0 + 0.5 * 60.0));
}

TEST_CASE("fitness caps come from the camera footprint and rotation range") {
  const WorkspaceConfig ws;
  const FitnessCaps caps = fitness_caps(ParameterRanges{}, ws);
  CHECK(caps.position_cap == doctest::Approx(std::hypot(0.64, 1.16)));
  CHECK(caps.rotation_cap == 60.0);
}

TEST_CASE("scaling both weights keeps the fittest record") {
  Rng rng(1);
  std::vector<TestRecord> recs;
  for (int i = 0; i < 50; ++i) recs.push_back(record_with({{rng.uniform(0, 0.05), rng.uniform(0, 20)}}));
  SearchConfig a;
  SearchConfig b;
  b.w1 *= 7.5;
  b.w2 *= 7.5;
  auto best = [&](const SearchConfig& c) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < recs.size(); ++i) {
      if (fitness(recs[i], c, {1, 60}) > fitness(recs[arg], c, {1, 60})) arg = i;
    }
    return arg;
  };
  CHECK(best(a) == best(b));
}

TEST_CASE("one point crossover") {
  const Chromosome a{{1, 2, 3, 4, 5, 6, 7}};
  const Chromosome b{{-1, -2, -3, -4, -5, -6, -7}};
  Rng r1(3), r2(3);
  const auto [ca, cb] = crossover_one_point(a, b, r1);
  const auto [da, db] = crossover_one_point(a, b, r2);
  CHECK(ca == da);
  CHECK(cb == db);
  // Children swap a nonempty tail and keep a nonempty head.
  CHECK(ca.genes[0] == 1);
  CHECK(ca.genes.back() == -7);
  std::size_t cut = 0;
  while (ca.genes[cut] > 0) ++cut;
  for (std::size_t i = 0; i < a.genes.size(); ++i) {
    CHECK(ca.genes[i] == (i < cut ? a.genes[i] : b.genes[i]));
    CHECK(cb.genes[i] == (i < cut ? b.genes[i] : a.genes[i]));
  }
  Rng r3(4);
  const auto [sa, sb] = crossover_one_point(a, a, r3);
  CHECK(sa == a);
  CHECK(sb == a);
  CHECK_THROWS(crossover_one_point(a, Chromosome{{1, 2, 3, 4}}, r3));
}

TEST_CASE("ten percent mutation") {
  const ParameterRanges r = wide_ranges();
  const Chromosome c{{0.5, 2.0, 10.0, 3000.0}};
  Rng rng(5);
  bool saw_all = false;
  bool saw_up = false;
  bool saw_down = false;
  for (int i = 0; i < 400; ++i) {
    const Chromosome m = mutate_rm(c, r, rng);
    int changed = 0;
    for (std::size_t g = 0; g < c.genes.size(); ++g) {
      if (m.genes[g] == c.genes[g]) continue;
      ++changed;
      const double ratio = m.genes[g] / c.genes[g];
      CHECK((ratio == doctest::Approx(1.1) || ratio == doctest::Approx(0.9)));
    }
    CHECK(changed >= 1);
    saw_all |= changed == 4;
    saw_up |= m.genes[0] == doctest::Approx(0.55);
    saw_down |= m.genes[3] == doctest::Approx(2700.0);
  }
  CHECK(saw_all);
  CHECK(saw_up);
  CHECK(saw_down);
}

TEST_CASE("mutation clamps to the ranges") {
  const ParameterRanges r;
  const Chromosome c{{0.9, 0.92, 30, 0.5, 0.0, -30, 0.7, 0.5, 0, 5000}};
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const Chromosome m = mutate_rm(c, r, rng);
    CHECK(validate(m, r, WorkspaceConfig{}).out_of_range_genes.empty());
  }
}

TEST_CASE("replacement mutation moves one box and avoids collisions") {
  const WorkspaceConfig ws;
  const ParameterRanges r;
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const Chromosome c = sample_random(r, ws, rng);
    const Chromosome m = mutate_replace(c, r, ws, rng);
    CHECK(m.genes.back() == c.genes.back());
    int moved = -1;
    for (int b = 0; b < 3; ++b) {
      if (m.genes[3 * b] != c.genes[3 * b]) moved = b;
    }
    for (int b = 0; b < 3; ++b) {
      if (b == moved) continue;
      for (int k = 0; k < 3; ++k) CHECK(m.genes[3 * b + k] == c.genes[3 * b + k]);
    }
    if (moved >= 0) {
      const Scene s = decode(m, ws);
      for (int b = 0; b < 3; ++b) {
        if (b != moved) CHECK_FALSE(obb_intersect(s.boxes[moved], s.boxes[b]));
      }
    }
  }
  WorkspaceConfig one = ws;
  one.n_boxes = 1;
  const Chromosome single{{0.7, 0.5, 0, 3000}};
  CHECK_FALSE(mutate_replace(single, r, one, rng) == single);
}

TEST_CASE("replacement gives up when nothing fits") {
  WorkspaceConfig ws;
  ws.n_boxes = 2;
  ParameterRanges r;
  r.x_min = 0.7;
  r.x_max = 0.70001;
  r.y_min = 0.5;
  r.y_max = 0.50001;
  // The other box sits on the only reachable spot.
  const Chromosome c{{0.7, 0.5, 0, 0.7, 0.5, 0, 3000}};
  Rng rng(1);
  CHECK(mutate_replace(c, r, ws, rng) == c);
}

TEST_CASE("dedup examples") {
  const auto id = identity_embedding();
  const Chromosome c{{1, 2, 3, 4}};
  CHECK(dedup({c, c}, 0.1, id).size() == 1);
  const Chromosome e1{{1, 0, 0, 0}};
  const Chromosome e2{{0, 1, 0, 0}};
  CHECK(dedup({e1, e2}, 0.1, id).size() == 2);
  Chromosome scaled = c;
  for (double& g : scaled.genes) g *= 1.0001;
  const double d = 1.0 - 30.0 * 1.0001 / (std::sqrt(30.0) * std::sqrt(30.0) * 1.0001);
  CHECK(d < 0.1);
  CHECK(dedup({c, scaled}, 0.1, id).size() == 1);
}

TEST_CASE("dedup refills to keep the population size") {
  const auto id = identity_embedding();
  int calls = 0;
  auto refill = [&] {
    ++calls;
    return Chromosome{{0, 0, static_cast<double>(calls), 1}};
  };
  const Chromosome c{{1, 2, 3, 4}};
  const auto out = dedup({c, c, c}, 0.1, id, refill);
  CHECK(out.size() == 3);
  CHECK(out[0] == c);
  CHECK(calls >= 2);
}

TEST_CASE("dedup without refill is idempotent") {
  const WorkspaceConfig ws;
  const ParameterRanges r;
  const auto embed = range_embedding(r);
  Rng rng(9);
  std::vector<Chromosome> pop;
  for (int i = 0; i < 60; ++i) pop.push_back(sample_random(r, ws, rng));
  for (int i = 0; i < 20; ++i) pop.push_back(mutate_rm(pop[i], r, rng));
  const auto once = dedup(pop, 0.1, embed);
  CHECK(once.size() < pop.size());
  CHECK(dedup(once, 0.1, embed) == once);
}

TEST_CASE("normalized genes span [-1, 1] and unit genes [0, 1]") {
  const ParameterRanges r;
  const Chromosome lo{{r.x_min, r.y_min, r.rot_min, r.lum_min}};
  const Chromosome hi{{r.x_max, r.y_max, r.rot_max, r.lum_max}};
  for (double v : normalized_genes(lo, r)) CHECK(v == doctest::Approx(-1.0));
  for (double v : normalized_genes(hi, r)) CHECK(v == doctest::Approx(1.0));
  for (double v : unit_genes(lo, r)) CHECK(v == doctest::Approx(0.0));
  for (double v : unit_genes(hi, r)) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("binary tournament prefers the fitter pick, lower index on ties") {
  const std::vector<double> f{0.0, 5.0, 5.0, -1.0};
  Rng rng(11);
  std::map<std::size_t, int> wins;
  for (int i = 0; i < 4000; ++i) ++wins[binary_tournament(f, rng)];
  // Index 1 beats 2 on the tie; index 3 wins only against itself (1/16).
  CHECK(wins[1] > wins[2]);
  CHECK(wins[3] > 150);
  CHECK(wins[3] < 350);
  CHECK(wins[0] > wins[3]);
}

TEST_CASE("parallel and serial evaluation agree") {
  const Config c = profile_config(kProfileUc1);
  SyntheticPerception model(c.perception);
  const EvaluationContext ctx{c.ranges, c.workspace, model, c.thresholds, c.search};
  Rng rng(13);
  std::vector<Chromosome> pop;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 80; ++i) {
    pop.push_back(sample_random(c.ranges, c.workspace, rng));
    seeds.push_back(episode_seed(3, i));
  }
  const auto par = evaluate_population(pop, seeds, ctx);
  const auto ser = evaluate_population_serial(pop, seeds, ctx);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].fitness == ser[i].fitness);
    CHECK(par[i].failure_modes == ser[i].failure_modes);
    CHECK(par[i].chromosome == pop[i]);
  }
}

TEST_CASE("ga consumes exactly its budget and is reproducible") {
  const Config c = profile_config(kProfileUc1);
  SyntheticPerception model(c.perception);
  SearchConfig s = c.search;
  s.seed = 21;
  const Archive a = run_ga(s, c.ranges, c.workspace, model, c.thresholds);
  const Archive b = run_ga(s, c.ranges, c.workspace, model, c.thresholds);
  REQUIRE(a.records.size() == 220);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].chromosome == b.records[i].chromosome);
    CHECK(a.records[i].seed == b.records[i].seed);
    CHECK(a.records[i].fitness == b.records[i].fitness);
    CHECK(a.records[i].id == static_cast<int>(i));
    CHECK(validate(a.records[i].chromosome, c.ranges, c.workspace).ok());
  }
  CHECK(a.count(Outcome::pass) + a.count(Outcome::fail) + a.count(Outcome::near_fail) == 220);
}

TEST_CASE("ga with budget equal to the population is one random generation") {
  const Config c = profile_config(kProfileUc1);
  SyntheticPerception model(c.perception);
  SearchConfig s = c.search;
  s.eval_budget = s.population_size;
  const Archive a = run_ga(s, c.ranges, c.workspace, model, c.thresholds);
  CHECK(a.records.size() == static_cast<std::size_t>(s.population_size));
  for (const TestRecord& r : a.records) CHECK(r.provenance.generation == 0);
  s.eval_budget = s.population_size - 1;
  CHECK_THROWS(run_ga(s, c.ranges, c.workspace, model, c.thresholds));
}

TEST_CASE("ga raises the mean fitness over its generations") {
  const Config c = profile_config(kProfileUc1);
  SyntheticPerception model(c.perception);
  int improved = 0;
  for (int run = 0; run < 5; ++run) {
    SearchConfig s = c.search;
    s.seed = derive_seed(100, run);
    const Archive a = run_ga(s, c.ranges, c.workspace, model, c.thresholds);
    double evolved = 0;
    int n = 0;
    for (const TestRecord& r : a.records) {
      if (r.provenance.generation == 0) continue;
      evolved += r.fitness;
      ++n;
    }
    improved += evolved / n >= mean_fitness(a, 0);
  }
  CHECK(improved >= 4);
}

TEST_CASE("random search keeps distinct samples within its budget") {
  Config c = profile_config(kProfileUc1);
  c.workspace.singularity_region.reset();
  SyntheticPerception perfect(perfect_perception());
  SearchConfig s = c.search;
  s.strategy = Strategy::rs;
  s.seed = 5;
  const Archive a = run_rs(s, c.ranges, c.workspace, perfect, c.thresholds);
  const Archive b = run_rs(s, c.ranges, c.workspace, perfect, c.thresholds);
  REQUIRE(a.records.size() == 220);
  CHECK(a.count(Outcome::fail) == 0);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].chromosome == b.records[i].chromosome);
    const auto ei = normalized_genes(a.records[i].chromosome, c.ranges);
    for (std::size_t j = 0; j < i; ++j) {
      const auto ej = normalized_genes(a.records[j].chromosome, c.ranges);
      CHECK(cosine_distance(ei, ej) >= s.dup_threshold);
    }
  }
}

TEST_CASE("strategy names") {
  CHECK(strategy_from_string("ga") == Strategy::ga);
  CHECK(to_string(Strategy::rs) == "rs");
  CHECK_THROWS(strategy_from_string("hill"));
}
