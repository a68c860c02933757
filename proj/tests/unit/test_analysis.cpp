#include <doctest.h>

#include <cmath>
#include <vector>

#include "armtest/analysis.hpp"
#include "armtest/errors.hpp"
#include "oracles.hpp"

using namespace armtest;

namespace {

FailureModeSet modes(std::initializer_list<FailureMode> ms) {
  FailureModeSet s;
  for (FailureMode m : ms) s.insert(m);
  return s;
}

TestRecord rec(Outcome o, FailureKind k, const std::string& strategy) {
  TestRecord r;
  r.outcome = o;
  r.failure_kind = k;
  r.provenance.strategy = strategy;
  return r;
}

}  // namespace

TEST_CASE("cosine distance examples") {
  const std::vector<double> a{1, 2, 3};
  CHECK(cosine_distance(a, a) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
  CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{-1, 0}) == 2.0);
  CHECK_THROWS_AS(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{1, 0}), UndefinedDistance);
  CHECK_THROWS_AS(cosine_distance(std::vector<double>{1}, std::vector<double>{1, 0}), std::invalid_argument);
}

TEST_CASE("feature distance handles zero vectors") {
  CHECK(feature_distance({0, 0}, {0, 0}) == 0.0);
  CHECK(feature_distance({0, 0}, {1, 0}) == 1.0);
  CHECK(feature_distance({1, 1}, {2, 2}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("sparseness examples") {
  auto zero = [](std::size_t, std::size_t) { return 0.0; };
  CHECK(sparseness(1, zero) == 0.0);
  CHECK(sparseness(0, zero) == 0.0);
  auto two = [](std::size_t i, std::size_t j) { return i == j ? 0.0 : 0.37; };
  CHECK(sparseness(2, two) == 0.37);
  const std::vector<std::vector<double>> pts{{1, 0}, {2, 0.5}, {3, 1}};
  auto cd = [&](std::size_t i, std::size_t j) { return cosine_distance(pts[i], pts[j]); };
  CHECK(sparseness(3, cd) == oracle::brute_sparseness(3, cd));
}

TEST_CASE("sparseness matches the double loop and ignores item order") {
  Rng rng(2);
  for (std::size_t n : {5u, 37u, 200u}) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(10));
    for (auto& p : pts) {
      for (double& v : p) v = rng.uniform();
    }
    auto cd = [&](std::size_t i, std::size_t j) { return cosine_distance(pts[i], pts[j]); };
    const double s = sparseness(n, cd);
    CHECK(s == oracle::brute_sparseness(n, cd));
    CHECK(s == sparseness_serial(n, cd));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 7 + 3) % n;
    auto permuted = [&](std::size_t i, std::size_t j) { return cd(perm[i], perm[j]); };
    CHECK(sparseness(n, permuted) == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("severity distance is Jaccard") {
  using FM = FailureMode;
  CHECK(severity_distance(modes({FM::rotation_misprediction}), modes({FM::rotation_misprediction})) == 0.0);
  CHECK(severity_distance(modes({FM::center_misprediction}), modes({FM::not_placed})) == 1.0);
  CHECK(severity_distance(modes({FM::center_misprediction, FM::rotation_misprediction}),
                          modes({FM::rotation_misprediction, FM::placed_misoriented})) ==
        doctest::Approx(2.0 / 3.0));
  CHECK(severity_distance({}, {}) == 0.0);
}

TEST_CASE("sparseness report on failure records") {
  const ParameterRanges r;
  std::vector<TestRecord> recs(3);
  recs[0].chromosome = Chromosome{{0.5, 0.0, -30, 1500}};
  recs[1].chromosome = Chromosome{{0.9, 0.92, 30, 5000}};
  recs[2].chromosome = Chromosome{{0.9, 0.92, 30, 5000}};
  recs[0].failure_modes = modes({FailureMode::not_placed});
  recs[1].failure_modes = modes({FailureMode::not_placed});
  recs[2].failure_modes = modes({FailureMode::rotation_misprediction, FailureMode::placed_misoriented});
  for (auto& x : recs) x.outcome = Outcome::fail;
  const auto fails = failures(recs);
  REQUIRE(fails.size() == 3);
  const SparsenessReport rep = sparseness_report(fails, r);
  // Record 0 is the zero vector in unit coordinates, at distance 1 from the others.
  CHECK(rep.s_avf == doctest::Approx(1.0));
  CHECK(rep.s_avs == doctest::Approx(1.0));
  CHECK(rep.n_unique_fm_combos == 2);
  CHECK(rep.n_items == 3);
}

TEST_CASE("permutation test examples") {
  const std::vector<double> a{1, 2};
  const std::vector<double> b{10, 11};
  const PermutationResult p = permutation_test(a, b);
  CHECK(p.exact);
  CHECK(p.permutations == 6);
  CHECK(p.p_value == doctest::Approx(2.0 / 6.0));
  CHECK(p.statistic == doctest::Approx(-9.0));
  const std::vector<double> same{3, 4, 5};
  CHECK(permutation_test(same, same).p_value == 1.0);
}

TEST_CASE("exact permutation p matches enumeration") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int na = 2 + trial % 5;
    const int nb = 3 + trial % 4;
    std::vector<double> a(na), b(nb);
    for (double& v : a) v = std::round(rng.uniform(0, 10));
    for (double& v : b) v = std::round(rng.uniform(2, 12));
    const PermutationResult p = permutation_test(a, b);
    CHECK(p.exact);
    CHECK(p.p_value == doctest::Approx(oracle::brute_permutation_p(a, b)).epsilon(1e-12));
    CHECK(p.p_value > 0.0);
    CHECK(p.p_value <= 1.0);
    // Two-sided: swapping the samples or shifting both changes nothing.
    CHECK(permutation_test(b, a).p_value == doctest::Approx(p.p_value).epsilon(1e-12));
    std::vector<double> a2 = a, b2 = b;
    for (double& v : a2) v += 100;
    for (double& v : b2) v += 100;
    CHECK(permutation_test(a2, b2).p_value == doctest::Approx(p.p_value).epsilon(1e-12));
  }
}

TEST_CASE("monte carlo permutation p tracks the exact value") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(6), b(6);
    for (double& v : a) v = rng.uniform(0, 10);
    for (double& v : b) v = rng.uniform(1, 11);
    const double exact = permutation_test(a, b).p_value;
    const PermutationResult mc = permutation_test_monte_carlo(a, b, 20000, trial);
    CHECK_FALSE(mc.exact);
    CHECK(std::abs(mc.p_value - exact) <= 0.02);
    CHECK(permutation_test_monte_carlo(a, b, 20000, trial).p_value == mc.p_value);
  }
}

TEST_CASE("large samples fall back to random splits") {
  std::vector<double> a(20), b(20);
  for (int i = 0; i < 20; ++i) {
    a[i] = i;
    b[i] = i + 30;
  }
  const PermutationResult p = permutation_test(a, b, 2000, 1);
  CHECK_FALSE(p.exact);
  CHECK(p.p_value == doctest::Approx(1.0 / 2001.0));
  CHECK(binomial(40, 20, kExactPermutationLimit) > kExactPermutationLimit);
  CHECK(binomial(12, 6, 1000000) == 924);
}

TEST_CASE("cliffs delta examples") {
  const std::vector<double> s{1, 2, 3};
  CHECK(cliffs_delta(s, s).delta == 0.0);
  CHECK(cliffs_delta(s, s).magnitude == EffectMagnitude::negligible);
  const CliffsDelta d = cliffs_delta(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6});
  CHECK(d.delta == -1.0);
  CHECK(d.magnitude == EffectMagnitude::large);
  CHECK(cliffs_delta(std::vector<double>{1, 3}, std::vector<double>{2}).delta == 0.0);
}

TEST_CASE("cliffs delta against all pairs") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(1 + trial % 9), b(1 + trial % 7);
    for (double& v : a) v = std::round(rng.uniform(0, 6));
    for (double& v : b) v = std::round(rng.uniform(0, 6));
    const double d = cliffs_delta(a, b).delta;
    CHECK(d == oracle::brute_cliffs_delta(a, b));
    CHECK(cliffs_delta(b, a).delta == -d);
    std::vector<double> ea = a, eb = b;
    for (double& v : ea) v = std::exp(v);
    for (double& v : eb) v = std::exp(v);
    CHECK(cliffs_delta(ea, eb).delta == d);
  }
}

TEST_CASE("effect magnitude cutoffs") {
  CHECK(effect_magnitude(0.1) == EffectMagnitude::negligible);
  CHECK(effect_magnitude(-0.147) == EffectMagnitude::small);
  CHECK(effect_magnitude(0.33) == EffectMagnitude::medium);
  CHECK(effect_magnitude(0.474) == EffectMagnitude::large);
  CHECK(to_string(EffectMagnitude::large) == "large");
}

TEST_CASE("tallies") {
  std::vector<TestRecord> ga{rec(Outcome::pass, FailureKind::none, "ga"),
                             rec(Outcome::fail, FailureKind::soft, "ga"),
                             rec(Outcome::near_fail, FailureKind::none, "ga")};
  std::vector<TestRecord> rs{rec(Outcome::fail, FailureKind::hard, "rs"),
                             rec(Outcome::pass, FailureKind::none, "rs")};
  std::vector<TestRecord> passes(3, rec(Outcome::pass, FailureKind::none, "rs"));
  CHECK(tally(passes) == Tally{3, 0, 0, 0, 0});
  Tally t = tally(ga);
  CHECK(t.total() == 3);
  CHECK(t.soft + t.hard == t.fail);
  std::vector<TestRecord> merged = ga;
  merged.insert(merged.end(), rs.begin(), rs.end());
  t += tally(rs);
  CHECK(t == tally(merged));
  const auto by = tally_by_strategy(merged);
  CHECK(by.at("ga").fail == 1);
  CHECK(by.at("rs").hard == 1);
}

TEST_CASE("comparing a sample with itself") {
  const std::vector<double> a{0.4, 0.5, 0.45, 0.52, 0.41};
  const StatResult r = compare_samples(a, a);
  CHECK(r.p_value == 1.0);
  CHECK(r.cliffs_delta == 0.0);
  CHECK(r.statistic == 0.0);
}
