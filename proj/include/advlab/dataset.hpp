#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "advlab/errors.hpp"
#include "advlab/linalg.hpp"
#include "advlab/ranking.hpp"
#include "advlab/rng.hpp"

namespace advlab {

struct Example {
  long long id = 0;
  std::vector<double> features;  // elementwise in [0,1]
  std::size_t label = 0;
};

struct Dataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
};

inline std::vector<std::size_t> class_counts(const Dataset& ds) {
  std::vector<std::size_t> counts(ds.classes, 0);
  for (const Example& e : ds.examples) ++counts[e.label];
  return counts;
}

inline std::vector<long long> ids_of(const Dataset& ds) {
  std::vector<long long> ids;
  ids.reserve(ds.size());
  for (const Example& e : ds.examples) ids.push_back(e.id);
  return ids;
}

// Dense feature matrix plus label vector for the whole dataset, in order.
inline void pack(const Dataset& ds, Mat& x, std::vector<std::size_t>& y) {
  x.resize(ds.size(), ds.dim);
  y.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Example& e = ds.examples[i];
    std::copy(e.features.begin(), e.features.end(), x.row(i));
    y[i] = e.label;
  }
}

struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t dim = 16;
  std::vector<std::vector<double>> means;  // empty: drawn from seed
  double spread = 0.12;
  double ambiguous_fraction = 0.25;
  std::size_t n_per_class = 600;
  std::uint64_t seed = 1;
};

inline void validate(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ValidationError("synthetic spec: classes must be at least 2");
  if (spec.dim < 2) throw ValidationError("synthetic spec: dim must be at least 2");
  if (!(spec.spread > 0.0)) throw ValidationError("synthetic spec: spread must be positive");
  if (spec.ambiguous_fraction < 0.0 || spec.ambiguous_fraction > 1.0)
    throw ValidationError("synthetic spec: ambiguous_fraction must lie in [0,1]");
  if (spec.n_per_class == 0) throw ValidationError("synthetic spec: n_per_class must be positive");
  if (!spec.means.empty()) {
    if (spec.means.size() != spec.classes)
      throw ValidationError("synthetic spec: need one mean per class");
    for (const auto& m : spec.means) {
      if (m.size() != spec.dim) throw ValidationError("synthetic spec: mean length differs from dim");
      for (double v : m)
        if (!std::isfinite(v)) throw ValidationError("synthetic spec: mean entries must be finite");
    }
  }
}

// Class means, drawn inside [0.2, 0.8]^dim when the spec leaves them open.
inline std::vector<std::vector<double>> resolve_means(const SyntheticSpec& spec) {
  if (!spec.means.empty()) return spec.means;
  Rng rng(derive_seed(spec.seed, 0x6d65616eULL));
  std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.dim));
  for (auto& m : means)
    for (double& v : m) v = rng.uniform(0.2, 0.8);
  return means;
}

// Posterior probability that x belongs to any class other than `label` under
// the equal-weight isotropic Gaussian mixture at `means`.
inline double mixture_ambiguity(const std::vector<double>& x, std::size_t label,
                                const std::vector<std::vector<double>>& means,
                                double spread) {
  std::vector<double> log_lik(means.size());
  double mx = -1e300;
  for (std::size_t c = 0; c < means.size(); ++c) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - means[c][j];
      d2 += d * d;
    }
    log_lik[c] = -d2 / (2.0 * spread * spread);
    mx = std::max(mx, log_lik[c]);
  }
  double denom = 0.0;
  for (double ll : log_lik) denom += std::exp(ll - mx);
  const double post_true = std::exp(log_lik[label] - mx) / denom;
  return 1.0 - post_true;
}

// Per-class isotropic Gaussians clamped to [0,1]^dim. An ambiguous_fraction
// of each class is drawn near the midpoint to a random other class instead
// of the class mean, leaning into the other class's side so the block spans
// contested-to-mislabeled quality, giving a ground-truth ambiguity score.
inline std::pair<Dataset, std::vector<double>> generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const auto means = resolve_means(spec);
  Rng rng(derive_seed(spec.seed, 0x73796e74ULL));
  Dataset ds;
  ds.dim = spec.dim;
  ds.classes = spec.classes;
  ds.examples.reserve(spec.classes * spec.n_per_class);
  std::vector<double> ambiguity;
  ambiguity.reserve(spec.classes * spec.n_per_class);
  const auto n_ambiguous = static_cast<std::size_t>(
      std::llround(spec.ambiguous_fraction * static_cast<double>(spec.n_per_class)));
  long long next_id = 0;
  std::vector<double> center(spec.dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
      if (i < n_ambiguous && spec.classes > 1) {
        const std::size_t other =
            (c + 1 + static_cast<std::size_t>(rng.below(spec.classes - 1))) % spec.classes;
        const double toward = rng.uniform(0.5, 0.7);
        for (std::size_t j = 0; j < spec.dim; ++j)
          center[j] = (1.0 - toward) * means[c][j] + toward * means[other][j];
      } else {
        center = means[c];
      }
      Example e;
      e.id = next_id++;
      e.label = c;
      e.features.resize(spec.dim);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        const double v = center[j] + spec.spread * rng.gaussian();
        e.features[j] = std::clamp(v, 0.0, 1.0);
      }
      ambiguity.push_back(mixture_ambiguity(e.features, c, means, spec.spread));
      ds.examples.push_back(std::move(e));
    }
  }
  return {std::move(ds), std::move(ambiguity)};
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_double(const std::string& s, std::size_t line_no, const std::string& path) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw ValidationError(path + ":" + std::to_string(line_no) + ": not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, std::size_t line_no, const std::string& path) {
  long long v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw ValidationError(path + ":" + std::to_string(line_no) + ": not an integer: '" + s + "'");
  return v;
}

inline void format_double(char* buf, std::size_t n, double v) {
  std::snprintf(buf, n, "%.17g", v);
}

}  // namespace detail

// Header line "dim,classes", then one "id,label,f0,...,f{dim-1}" row per
// example. Features are written with 17 significant digits so the
// save/load round trip is value-exact.
inline void save_delimited(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open dataset file for writing: " + path);
  os << ds.dim << ',' << ds.classes << '\n';
  char buf[64];
  for (const Example& e : ds.examples) {
    os << e.id << ',' << e.label;
    for (double v : e.features) {
      detail::format_double(buf, sizeof buf, v);
      os << ',' << buf;
    }
    os << '\n';
  }
  if (!os) throw ValidationError("failed while writing dataset file: " + path);
}

inline Dataset load_delimited(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open dataset file: " + path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line))
    throw ValidationError(path + ": empty dataset file");
  ++line_no;
  const auto header = detail::split_fields(line);
  if (header.size() != 2)
    throw ValidationError(path + ":1: header must be 'dim,classes'");
  Dataset ds;
  const long long dim = detail::parse_int(header[0], 1, path);
  const long long classes = detail::parse_int(header[1], 1, path);
  if (dim < 1 || classes < 2)
    throw ValidationError(path + ":1: dim must be >= 1 and classes >= 2");
  ds.dim = static_cast<std::size_t>(dim);
  ds.classes = static_cast<std::size_t>(classes);
  std::unordered_set<long long> seen;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2 + ds.dim)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(2 + ds.dim) + " fields, found " +
                            std::to_string(fields.size()));
    Example e;
    e.id = detail::parse_int(fields[0], line_no, path);
    const long long label = detail::parse_int(fields[1], line_no, path);
    if (label < 0 || label >= classes)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": label " +
                            std::to_string(label) + " out of range for " +
                            std::to_string(classes) + " classes");
    e.label = static_cast<std::size_t>(label);
    e.features.resize(ds.dim);
    for (std::size_t j = 0; j < ds.dim; ++j) {
      const double v = detail::parse_double(fields[2 + j], line_no, path);
      if (!(v >= 0.0 && v <= 1.0))
        throw ValidationError(path + ":" + std::to_string(line_no) + ": feature " +
                              std::to_string(j) + " = " + fields[2 + j] +
                              " outside [0,1]");
      e.features[j] = v;
    }
    if (!seen.insert(e.id).second)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": duplicate example id " +
                            std::to_string(e.id));
    ds.examples.push_back(std::move(e));
  }
  if (ds.examples.empty()) throw ValidationError(path + ": dataset has no examples");
  return ds;
}

// Splits every class at its rank median: the higher-ranked half of each
// class goes to `high`. Odd class counts put the median example in the low
// half, so high-half ranks strictly dominate low-half ranks class-wise.
inline std::pair<Dataset, Dataset> class_balanced_halves(const Dataset& ds,
                                                         const QualityRanking& ranking) {
  const auto rank = rank_by_id(ranking);
  std::vector<std::vector<std::size_t>> per_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (rank.find(ds.examples[i].id) == rank.end())
      throw std::invalid_argument("class_balanced_halves: ranking is missing example id " +
                                  std::to_string(ds.examples[i].id));
    per_class[ds.examples[i].label].push_back(i);
  }
  Dataset high, low;
  high.dim = low.dim = ds.dim;
  high.classes = low.classes = ds.classes;
  for (auto& idxs : per_class) {
    std::sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      const double ra = rank.at(ds.examples[a].id);
      const double rb = rank.at(ds.examples[b].id);
      if (ra != rb) return ra < rb;
      return ds.examples[a].id < ds.examples[b].id;
    });
    const std::size_t low_count = idxs.size() - idxs.size() / 2;
    for (std::size_t p = 0; p < idxs.size(); ++p)
      (p < low_count ? low : high).examples.push_back(ds.examples[idxs[p]]);
  }
  auto by_id = [](const Example& a, const Example& b) { return a.id < b.id; };
  std::sort(high.examples.begin(), high.examples.end(), by_id);
  std::sort(low.examples.begin(), low.examples.end(), by_id);
  return {std::move(high), std::move(low)};
}

enum class RemovalMode { random, ascending_quality };

inline std::string to_string(RemovalMode m) {
  return m == RemovalMode::random ? "random" : "ascending_quality";
}

inline RemovalMode removal_mode_from_string(const std::string& s) {
  if (s == "random") return RemovalMode::random;
  if (s == "ascending_quality") return RemovalMode::ascending_quality;
  throw ValidationError("unknown removal mode: " + s + " (expected 'random' or 'ascending_quality')");
}

// Ids that remove_fraction would drop, worst-first. Both modes produce
// nested prefixes, so survivor sets at growing fractions are nested too.
inline std::vector<long long> removal_order(const Dataset& ds, const QualityRanking& ranking,
                                            RemovalMode mode, std::uint64_t seed) {
  std::vector<long long> order = ids_of(ds);
  if (mode == RemovalMode::ascending_quality) {
    const auto rank = rank_by_id(ranking);
    for (long long id : order)
      if (rank.find(id) == rank.end())
        throw std::invalid_argument("removal_order: ranking is missing example id " +
                                    std::to_string(id));
    std::sort(order.begin(), order.end(), [&](long long a, long long b) {
      const double ra = rank.at(a);
      const double rb = rank.at(b);
      if (ra != rb) return ra < rb;
      return a < b;
    });
  } else {
    std::sort(order.begin(), order.end());
    Rng rng(derive_seed(seed, 0x70727565ULL));
    rng.shuffle(order);
  }
  return order;
}

inline Dataset remove_ids(const Dataset& ds, const std::vector<long long>& removed) {
  const std::unordered_set<long long> gone(removed.begin(), removed.end());
  Dataset out;
  out.dim = ds.dim;
  out.classes = ds.classes;
  for (const Example& e : ds.examples)
    if (gone.find(e.id) == gone.end()) out.examples.push_back(e);
  return out;
}

inline Dataset remove_fraction(const Dataset& ds, const QualityRanking& ranking,
                               double fraction, RemovalMode mode, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("remove_fraction: fraction must lie in [0,1)");
  const auto n_remove =
      static_cast<std::size_t>(fraction * static_cast<double>(ds.size()));
  auto order = removal_order(ds, ranking, mode, seed);
  order.resize(n_remove);
  return remove_ids(ds, order);
}

// Per-class proportional split into (train, test), seeded.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction,
                                                    std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("stratified_split: test_fraction must lie in (0,1)");
  std::vector<std::vector<std::size_t>> per_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i) per_class[ds.examples[i].label].push_back(i);
  Dataset train, test;
  train.dim = test.dim = ds.dim;
  train.classes = test.classes = ds.classes;
  Rng rng(derive_seed(seed, 0x73706c74ULL));
  for (std::size_t c = 0; c < ds.classes; ++c) {
    auto& idxs = per_class[c];
    if (idxs.size() < 2)
      throw ValidationError("stratified_split: class " + std::to_string(c) +
                            " has fewer than 2 examples");
    std::sort(idxs.begin(), idxs.end());
    rng.shuffle(idxs);
    const auto n_test =
        static_cast<std::size_t>(test_fraction * static_cast<double>(idxs.size()));
    for (std::size_t p = 0; p < idxs.size(); ++p)
      (p < n_test ? test : train).examples.push_back(ds.examples[idxs[p]]);
  }
  auto by_id = [](const Example& a, const Example& b) { return a.id < b.id; };
  std::sort(train.examples.begin(), train.examples.end(), by_id);
  std::sort(test.examples.begin(), test.examples.end(), by_id);
  return {std::move(train), std::move(test)};
}

// Pruning manifest: "mode=...,fraction=...,seed=..." then one removed id
// per line. Experiments keep these files as removal provenance.
inline void save_prune_manifest(const std::string& path, RemovalMode mode, double fraction,
                                std::uint64_t seed, const std::vector<long long>& removed) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open manifest file for writing: " + path);
  char buf[64];
  detail::format_double(buf, sizeof buf, fraction);
  os << "mode=" << to_string(mode) << ",fraction=" << buf << ",seed=" << seed << '\n';
  for (long long id : removed) os << id << '\n';
  if (!os) throw ValidationError("failed while writing manifest file: " + path);
}

struct PruneManifest {
  RemovalMode mode = RemovalMode::random;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<long long> removed;
};

inline PruneManifest load_prune_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open manifest file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(path + ": empty manifest file");
  PruneManifest m;
  const auto fields = detail::split_fields(line);
  if (fields.size() != 3 || fields[0].rfind("mode=", 0) != 0 ||
      fields[1].rfind("fraction=", 0) != 0 || fields[2].rfind("seed=", 0) != 0)
    throw ValidationError(path + ":1: header must be 'mode=...,fraction=...,seed=...'");
  m.mode = removal_mode_from_string(fields[0].substr(5));
  m.fraction = detail::parse_double(fields[1].substr(9), 1, path);
  m.seed = static_cast<std::uint64_t>(detail::parse_int(fields[2].substr(5), 1, path));
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    m.removed.push_back(detail::parse_int(line, line_no, path));
  }
  return m;
}

}  // namespace advlab
