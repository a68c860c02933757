#include "armtest/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "armtest/errors.hpp"
#include "armtest/parallel.hpp"
#include "armtest/rng.hpp"
#include "armtest/search.hpp"

namespace armtest {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine distance of unequal lengths");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw UndefinedDistance("cosine distance of a zero vector");
  const double d = 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
  return std::clamp(d, 0.0, 2.0);
}

double sparseness_serial(std::size_t n, const PairDistance& dist) {
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) best = std::max(best, dist(i, j));
    sum += best;
  }
  return sum / static_cast<double>(n);
}

double sparseness(std::size_t n, const PairDistance& dist) {
  if (n == 0) return 0.0;
  std::vector<double> row_max(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) best = std::max(best, dist(i, j));
    row_max[i] = best;
  });
  double sum = 0.0;
  for (double v : row_max) sum += v;
  return sum / static_cast<double>(n);
}

double severity_distance(FailureModeSet a, FailureModeSet b) {
  const int uni = (a | b).size();
  if (uni == 0) return 0.0;
  return static_cast<double>((a ^ b).size()) / uni;
}

double feature_distance(const std::vector<double>& a, const std::vector<double>& b) {
  try {
    return cosine_distance(a, b);
  } catch (const UndefinedDistance&) {
    return a == b ? 0.0 : 1.0;
  }
}

std::vector<const TestRecord*> failures(std::span<const TestRecord> records) {
  std::vector<const TestRecord*> out;
  for (const TestRecord& r : records) {
    if (r.outcome == Outcome::fail) out.push_back(&r);
  }
  return out;
}

SparsenessReport sparseness_report(std::span<const TestRecord* const> records,
                                   const ParameterRanges& ranges) {
  SparsenessReport rep;
  rep.n_items = static_cast<int>(records.size());
  std::vector<std::vector<double>> emb;
  emb.reserve(records.size());
  std::set<std::uint8_t> combos;
  for (const TestRecord* r : records) {
    emb.push_back(unit_genes(r->chromosome, ranges));
    if (!r->failure_modes.empty()) combos.insert(r->failure_modes.bits());
  }
  rep.n_unique_fm_combos = static_cast<int>(combos.size());
  rep.s_avf = sparseness(records.size(),
                         [&](std::size_t i, std::size_t j) { return feature_distance(emb[i], emb[j]); });
  rep.s_avs = sparseness(records.size(), [&](std::size_t i, std::size_t j) {
    return severity_distance(records[i]->failure_modes, records[j]->failure_modes);
  });
  return rep;
}

std::uint64_t binomial(int n, int k, std::uint64_t cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  // Exact while below the cap; every partial product is itself a binomial.
  unsigned __int128 c = 1;
  for (int i = 1; i <= k; ++i) {
    c = c * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (c > cap) return cap + 1;
  }
  return static_cast<std::uint64_t>(c);
}

namespace {

struct Pool {
  std::vector<double> values;  // sorted, so the pool ignores sample order
  int k = 0;                   // size of the smaller sample
  double total = 0.0;
  double observed = 0.0;
  double observed_abs = 0.0;
};

double split_stat(double sum_k, const Pool& pool) {
  const int n = static_cast<int>(pool.values.size());
  return std::abs(sum_k / pool.k - (pool.total - sum_k) / (n - pool.k));
}

Pool make_pool(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("permutation test needs two nonempty samples");
  Pool pool;
  pool.values.assign(a.begin(), a.end());
  pool.values.insert(pool.values.end(), b.begin(), b.end());
  std::sort(pool.values.begin(), pool.values.end());
  pool.total = std::accumulate(pool.values.begin(), pool.values.end(), 0.0);
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  pool.observed = mean_a - mean_b;
  std::span<const double> small = a.size() <= b.size() ? a : b;
  pool.k = static_cast<int>(small.size());
  pool.observed_abs = split_stat(std::accumulate(small.begin(), small.end(), 0.0), pool);
  return pool;
}

// Ties in the statistic are decided with a relative tolerance so that
// splits equal to the observed one up to rounding are counted.
bool at_least(double stat, double observed) {
  const double scale = std::max({1.0, std::abs(stat), std::abs(observed)});
  return stat >= observed - 1e-9 * scale;
}

}  // namespace

PermutationResult permutation_test_monte_carlo(std::span<const double> a,
                                               std::span<const double> b, int iterations,
                                               std::uint64_t seed) {
  if (iterations < 1) throw std::invalid_argument("permutation test needs at least one iteration");
  Pool pool = make_pool(a, b);
  Rng rng(derive_seed(seed, "permutation"));
  std::vector<double> work = pool.values;
  const std::size_t n = work.size();
  std::uint64_t hits = 0;
  for (int it = 0; it < iterations; ++it) {
    double sum_k = 0.0;
    for (int i = 0; i < pool.k; ++i) {
      const std::size_t j = i + rng.index(n - i);
      std::swap(work[i], work[j]);
      sum_k += work[i];
    }
    if (at_least(split_stat(sum_k, pool), pool.observed_abs)) ++hits;
  }
  PermutationResult res;
  res.statistic = pool.observed;
  res.p_value = static_cast<double>(1 + hits) / static_cast<double>(1 + iterations);
  res.permutations = static_cast<std::uint64_t>(iterations);
  return res;
}

PermutationResult permutation_test(std::span<const double> a, std::span<const double> b,
                                   int iterations, std::uint64_t seed) {
  Pool pool = make_pool(a, b);
  const int n = static_cast<int>(pool.values.size());
  const std::uint64_t splits = binomial(n, pool.k, kExactPermutationLimit);
  if (splits > kExactPermutationLimit) return permutation_test_monte_carlo(a, b, iterations, seed);

  std::vector<int> idx(pool.k);
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t hits = 0;
  std::uint64_t seen = 0;
  while (true) {
    double sum_k = 0.0;
    for (int i : idx) sum_k += pool.values[i];
    if (at_least(split_stat(sum_k, pool), pool.observed_abs)) ++hits;
    ++seen;
    int pos = pool.k - 1;
    while (pos >= 0 && idx[pos] == n - pool.k + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < pool.k; ++i) idx[i] = idx[i - 1] + 1;
  }
  PermutationResult res;
  res.statistic = pool.observed;
  res.p_value = static_cast<double>(hits) / static_cast<double>(seen);
  res.exact = true;
  res.permutations = seen;
  return res;
}

std::string_view to_string(EffectMagnitude m) {
  switch (m) {
    case EffectMagnitude::negligible: return "negligible";
    case EffectMagnitude::small: return "small";
    case EffectMagnitude::medium: return "medium";
    case EffectMagnitude::large: return "large";
  }
  return "negligible";
}

EffectMagnitude effect_magnitude(double delta) {
  const double d = std::abs(delta);
  if (d < 0.147) return EffectMagnitude::negligible;
  if (d < 0.33) return EffectMagnitude::small;
  if (d < 0.474) return EffectMagnitude::medium;
  return EffectMagnitude::large;
}

CliffsDelta cliffs_delta(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("Cliff's delta needs two nonempty samples");
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sb.begin(), sb.end());
  long long greater = 0;
  long long less = 0;
  for (double x : a) {
    greater += std::lower_bound(sb.begin(), sb.end(), x) - sb.begin();
    less += sb.end() - std::upper_bound(sb.begin(), sb.end(), x);
  }
  CliffsDelta res;
  res.delta = static_cast<double>(greater - less) /
              (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  res.magnitude = effect_magnitude(res.delta);
  return res;
}

Tally& Tally::operator+=(const Tally& o) {
  pass += o.pass;
  fail += o.fail;
  near_fail += o.near_fail;
  soft += o.soft;
  hard += o.hard;
  return *this;
}

Tally tally(std::span<const TestRecord> records) {
  Tally t;
  for (const TestRecord& r : records) {
    switch (r.outcome) {
      case Outcome::pass: ++t.pass; break;
      case Outcome::near_fail: ++t.near_fail; break;
      case Outcome::fail:
        ++t.fail;
        if (r.failure_kind == FailureKind::soft) ++t.soft;
        else ++t.hard;
        break;
    }
  }
  return t;
}

std::map<std::string, Tally> tally_by_strategy(std::span<const TestRecord> records) {
  std::map<std::string, Tally> out;
  for (const TestRecord& r : records) out[r.provenance.strategy] += tally(std::span(&r, 1));
  return out;
}

StatResult compare_samples(std::span<const double> a, std::span<const double> b, int iterations,
                           std::uint64_t seed) {
  const PermutationResult p = permutation_test(a, b, iterations, seed);
  const CliffsDelta c = cliffs_delta(a, b);
  return {p.statistic, p.p_value, c.delta, c.magnitude};
}

}  // namespace armtest
