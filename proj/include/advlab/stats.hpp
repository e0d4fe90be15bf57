#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "advlab/rng.hpp"

namespace advlab {

// Dense 1..n ranks of `values`, ties broken by ascending tie_ids entry.
// ascending=true ranks the smallest value 1; ascending=false the largest.
inline std::vector<double> rank_values(const std::vector<double>& values,
                                       const std::vector<long long>& tie_ids,
                                       bool ascending = true) {
  if (values.empty()) throw std::invalid_argument("rank_values: empty input");
  if (values.size() != tie_ids.size())
    throw std::invalid_argument("rank_values: values and tie_ids lengths differ");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return ascending ? values[a] < values[b] : values[a] > values[b];
    return tie_ids[a] < tie_ids[b];
  });
  std::vector<double> ranks(values.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    ranks[order[pos]] = static_cast<double>(pos + 1);
  return ranks;
}

inline std::vector<double> rank_values(const std::vector<double>& values,
                                       bool ascending = true) {
  std::vector<long long> ids(values.size());
  std::iota(ids.begin(), ids.end(), 0LL);
  return rank_values(values, ids, ascending);
}

// Spearman's rank coefficient on two aligned value sequences. Both sides are
// rank-transformed (ties broken by position) and then
// rho = 1 - 6*sum(d^2)/(n(n^2-1)).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: sequence lengths differ");
  if (a.size() < 2) throw std::invalid_argument("spearman: need at least 2 entries");
  const std::vector<double> ra = rank_values(a);
  const std::vector<double> rb = rank_values(b);
  const double n = static_cast<double>(a.size());
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = ra[i] - rb[i];
    sum_d2 += d * d;
  }
  return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
}

// Two-sided permutation test: shuffle y, recompute the statistic, and report
// the plus-one smoothed fraction of |shuffled| >= |observed|.
template <typename Statistic>
double permutation_test(const std::vector<double>& x, const std::vector<double>& y,
                        std::size_t shuffles, std::uint64_t seed, Statistic statistic) {
  if (x.size() != y.size())
    throw std::invalid_argument("permutation_test: sequence lengths differ");
  if (x.size() < 3) throw std::invalid_argument("permutation_test: need at least 3 entries");
  if (shuffles == 0) throw std::invalid_argument("permutation_test: shuffles must be positive");
  const double observed = std::fabs(statistic(x, y));
  Rng rng(derive_seed(seed, 0x7065726dULL));
  std::vector<double> shuffled = y;
  std::size_t at_least = 0;
  for (std::size_t s = 0; s < shuffles; ++s) {
    rng.shuffle(shuffled);
    if (std::fabs(statistic(x, shuffled)) >= observed) ++at_least;
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(shuffles + 1);
}

inline double permutation_test(const std::vector<double>& x, const std::vector<double>& y,
                               std::size_t shuffles, std::uint64_t seed) {
  return permutation_test(x, y, shuffles, seed,
                          [](const std::vector<double>& a, const std::vector<double>& b) {
                            return spearman(a, b);
                          });
}

struct SeedAggregate {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

// Mean and sample (n-1) standard deviation; stddev is 0 for a single value.
inline SeedAggregate aggregate(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("aggregate: empty input");
  SeedAggregate agg;
  agg.values = values;
  agg.n = values.size();
  agg.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return agg;
}

}  // namespace advlab
