#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "advlab/errors.hpp"
#include "advlab/stats.hpp"

namespace advlab {

enum class QualityMeasure { stability, probability, min_perturbation, learning_order };

inline std::string to_string(QualityMeasure m) {
  switch (m) {
    case QualityMeasure::stability: return "stability";
    case QualityMeasure::probability: return "probability";
    case QualityMeasure::min_perturbation: return "min_perturbation";
    case QualityMeasure::learning_order: return "learning_order";
  }
  throw std::invalid_argument("unknown quality measure");
}

inline QualityMeasure quality_measure_from_string(const std::string& s) {
  if (s == "stability") return QualityMeasure::stability;
  if (s == "probability") return QualityMeasure::probability;
  if (s == "min_perturbation") return QualityMeasure::min_perturbation;
  if (s == "learning_order") return QualityMeasure::learning_order;
  throw ValidationError("unknown quality measure: " + s);
}

// Per-example quality ranks, 1 = lowest quality. Ranks are a permutation of
// 1..n for a single run and per-example averages after ensembling.
struct QualityRanking {
  QualityMeasure measure = QualityMeasure::stability;
  std::size_t ensemble_size = 1;
  std::vector<long long> ids;
  std::vector<double> rank;  // aligned with ids
};

// For stability, probability, and min_perturbation a low score means low
// quality; for learning order a high score (late first-learned epoch) does.
inline bool low_score_is_low_quality(QualityMeasure m) {
  return m != QualityMeasure::learning_order;
}

inline QualityRanking quality_rank(const std::vector<long long>& ids,
                                   const std::vector<double>& scores,
                                   QualityMeasure measure) {
  if (ids.empty()) throw std::invalid_argument("quality_rank: empty input");
  if (ids.size() != scores.size())
    throw std::invalid_argument("quality_rank: ids and scores lengths differ");
  QualityRanking r;
  r.measure = measure;
  r.ensemble_size = 1;
  r.ids = ids;
  r.rank = rank_values(scores, ids, low_score_is_low_quality(measure));
  return r;
}

inline std::unordered_map<long long, double> rank_by_id(const QualityRanking& r) {
  std::unordered_map<long long, double> m;
  m.reserve(r.ids.size());
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    if (!m.emplace(r.ids[i], r.rank[i]).second)
      throw std::invalid_argument("ranking: duplicate example id " + std::to_string(r.ids[i]));
  }
  return m;
}

// Arithmetic mean of ranks across runs covering the same ids and measure.
inline QualityRanking ensemble_rank(const std::vector<QualityRanking>& rankings) {
  if (rankings.empty()) throw std::invalid_argument("ensemble_rank: empty input");
  QualityRanking out;
  out.measure = rankings.front().measure;
  out.ensemble_size = rankings.size();
  out.ids = rankings.front().ids;
  out.rank.assign(out.ids.size(), 0.0);
  for (const QualityRanking& r : rankings) {
    if (r.measure != out.measure)
      throw std::invalid_argument("ensemble_rank: rankings mix different measures");
    if (r.ids.size() != out.ids.size())
      throw std::invalid_argument("ensemble_rank: rankings cover different id sets");
    const auto by_id = rank_by_id(r);
    for (std::size_t i = 0; i < out.ids.size(); ++i) {
      const auto it = by_id.find(out.ids[i]);
      if (it == by_id.end())
        throw std::invalid_argument("ensemble_rank: rankings cover different id sets");
      out.rank[i] += it->second;
    }
  }
  const double inv = 1.0 / static_cast<double>(rankings.size());
  for (double& v : out.rank) v *= inv;
  return out;
}

// Spearman's rho between two rankings over the same id set.
inline double spearman(const QualityRanking& a, const QualityRanking& b) {
  if (a.ids.size() != b.ids.size())
    throw std::invalid_argument("spearman: rankings cover different id sets");
  const auto b_by_id = rank_by_id(b);
  std::vector<double> av(a.ids.size()), bv(a.ids.size());
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    const auto it = b_by_id.find(a.ids[i]);
    if (it == b_by_id.end())
      throw std::invalid_argument("spearman: rankings cover different id sets");
    av[i] = a.rank[i];
    bv[i] = it->second;
  }
  const std::vector<double> ra = rank_values(av, a.ids, true);
  const std::vector<double> rb = rank_values(bv, a.ids, true);
  const double n = static_cast<double>(ra.size());
  if (ra.size() < 2) throw std::invalid_argument("spearman: need at least 2 entries");
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double d = ra[i] - rb[i];
    sum_d2 += d * d;
  }
  return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
}

}  // namespace advlab
