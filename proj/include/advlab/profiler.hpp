#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/dataset.hpp"
#include "advlab/errors.hpp"
#include "advlab/network.hpp"
#include "advlab/ranking.hpp"

namespace advlab {

// Per-example training dynamics: one robustness bit and one clean
// true-class probability per completed epoch.
struct ExampleRecord {
  long long example_id = 0;
  std::vector<std::uint8_t> robust_correct;
  std::vector<double> clean_true_prob;
  std::optional<double> min_perturbation;
};

using RecordSet = std::vector<ExampleRecord>;

inline RecordSet init_records(const Dataset& ds) {
  RecordSet records(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) records[i].example_id = ds.examples[i].id;
  return records;
}

struct ProfilerScratch {
  AttackScratch atk;
  Trace tr;
  Mat probs;
};

// Appends epoch t to every record: whether the evaluation attack leaves the
// example correctly classified (clean mistakes count as not robust), and
// the clean probability of the true class.
inline void record_epoch(RecordSet& records, std::size_t epoch, const Network& net,
                         const Mat& x, const std::vector<std::size_t>& y,
                         const AttackConfig& eval_attack, ProfilerScratch& s) {
  if (records.size() != x.rows || records.size() != y.size())
    throw std::invalid_argument("record_epoch: records and batch sizes differ");
  forward(net, x, s.tr);
  softmax(s.tr.pre.back(), s.probs);
  AttackConfig sub = eval_attack;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ExampleRecord& rec = records[i];
    if (rec.robust_correct.size() != epoch || rec.clean_true_prob.size() != epoch)
      throw std::invalid_argument("record_epoch: epoch " + std::to_string(epoch) +
                                  " does not extend the record sequence");
    sub.seed = derive_seed(eval_attack.seed, 0x70726f66ULL, epoch, i);
    const AttackOutcome oc = pgd(net, x.row(i), y[i], sub, s.atk);
    const bool clean_correct = oc.kappa != 0;
    rec.robust_correct.push_back(clean_correct && !oc.success ? 1 : 0);
    rec.clean_true_prob.push_back(s.probs.row(i)[y[i]]);
  }
}

// Fraction of the T training epochs at which the example stayed robustly
// correct.
inline double stability(const ExampleRecord& rec, std::size_t epochs) {
  if (epochs == 0) throw std::invalid_argument("stability: epoch count must be positive");
  if (rec.robust_correct.size() != epochs)
    throw std::invalid_argument("stability: record covers " +
                                std::to_string(rec.robust_correct.size()) + " of " +
                                std::to_string(epochs) + " epochs");
  std::size_t hits = 0;
  for (std::uint8_t b : rec.robust_correct) hits += b;
  return static_cast<double>(hits) / static_cast<double>(epochs);
}

// Stability over a half-open epoch window [begin, end).
inline double stability(const ExampleRecord& rec, std::size_t begin, std::size_t end) {
  if (begin >= end || end > rec.robust_correct.size())
    throw std::invalid_argument("stability: bad epoch window");
  std::size_t hits = 0;
  for (std::size_t t = begin; t < end; ++t) hits += rec.robust_correct[t];
  return static_cast<double>(hits) / static_cast<double>(end - begin);
}

inline std::optional<std::size_t> first_learned_epoch(const ExampleRecord& rec) {
  for (std::size_t t = 0; t < rec.robust_correct.size(); ++t)
    if (rec.robust_correct[t]) return t;
  return std::nullopt;
}

// Clean true-class probability at the best checkpoint, per example.
inline std::vector<double> prediction_probability(const RecordSet& records,
                                                  std::size_t best_epoch) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const ExampleRecord& rec : records) {
    if (best_epoch >= rec.clean_true_prob.size())
      throw std::invalid_argument("prediction_probability: record does not cover epoch " +
                                  std::to_string(best_epoch));
    out.push_back(rec.clean_true_prob[best_epoch]);
  }
  return out;
}

// Fills each record's min_perturbation against the given (best) checkpoint.
inline void measure_min_perturbation(RecordSet& records, const Network& net, const Mat& x,
                                     const std::vector<std::size_t>& y, double step,
                                     double eps_max, ProfilerScratch& s) {
  if (records.size() != x.rows)
    throw std::invalid_argument("measure_min_perturbation: records and batch sizes differ");
  for (std::size_t i = 0; i < records.size(); ++i)
    records[i].min_perturbation = min_perturbation(net, x.row(i), y[i], step, eps_max, s.atk)
                                      .epsilon_star;
}

// Raw per-example scores for one quality measure; the profiler's ranking
// direction conventions turn them into ranks.
inline std::vector<double> measure_scores(const RecordSet& records, QualityMeasure measure,
                                          std::size_t epochs, std::size_t best_epoch) {
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const ExampleRecord& rec : records) {
    switch (measure) {
      case QualityMeasure::stability:
        scores.push_back(stability(rec, epochs));
        break;
      case QualityMeasure::probability:
        if (best_epoch >= rec.clean_true_prob.size())
          throw std::invalid_argument("measure_scores: record does not cover the best epoch");
        scores.push_back(rec.clean_true_prob[best_epoch]);
        break;
      case QualityMeasure::min_perturbation:
        if (!rec.min_perturbation)
          throw std::invalid_argument("measure_scores: min_perturbation not measured");
        scores.push_back(*rec.min_perturbation);
        break;
      case QualityMeasure::learning_order: {
        const auto first = first_learned_epoch(rec);
        scores.push_back(first ? static_cast<double>(*first)
                               : std::numeric_limits<double>::infinity());
        break;
      }
    }
  }
  return scores;
}

inline QualityRanking ranking_from_records(const RecordSet& records, QualityMeasure measure,
                                           std::size_t epochs, std::size_t best_epoch) {
  std::vector<long long> ids;
  ids.reserve(records.size());
  for (const ExampleRecord& rec : records) ids.push_back(rec.example_id);
  return quality_rank(ids, measure_scores(records, measure, epochs, best_epoch), measure);
}

// Records file: "epochs=T" header, then per example
// id,label,<robust bitstring>,<semicolon-joined clean probabilities>.
inline void save_records(const RecordSet& records, const std::vector<std::size_t>& labels,
                         std::size_t epochs, const std::string& path) {
  if (records.size() != labels.size())
    throw std::invalid_argument("save_records: records and label counts differ");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open records file for writing: " + path);
  os << "epochs=" << epochs << '\n';
  char buf[64];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ExampleRecord& rec = records[i];
    if (rec.robust_correct.size() != epochs || rec.clean_true_prob.size() != epochs)
      throw std::invalid_argument("save_records: incomplete record for example " +
                                  std::to_string(rec.example_id));
    os << rec.example_id << ',' << labels[i] << ',';
    for (std::uint8_t b : rec.robust_correct) os << (b ? '1' : '0');
    os << ',';
    for (std::size_t t = 0; t < epochs; ++t) {
      detail::format_double(buf, sizeof buf, rec.clean_true_prob[t]);
      os << (t ? ";" : "") << buf;
    }
    os << '\n';
  }
  if (!os) throw ValidationError("failed while writing records file: " + path);
}

struct LoadedRecords {
  RecordSet records;
  std::vector<std::size_t> labels;
  std::size_t epochs = 0;
};

inline LoadedRecords load_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open records file: " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("epochs=", 0) != 0)
    throw ValidationError(path + ":1: header must be 'epochs=T'");
  LoadedRecords out;
  out.epochs = static_cast<std::size_t>(detail::parse_int(line.substr(7), 1, path));
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 4)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": expected id,label,bits,probs");
    ExampleRecord rec;
    rec.example_id = detail::parse_int(fields[0], line_no, path);
    const long long label = detail::parse_int(fields[1], line_no, path);
    if (label < 0)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": negative label");
    if (fields[2].size() != out.epochs)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": robustness bitstring length differs from epoch count");
    for (char c : fields[2]) {
      if (c != '0' && c != '1')
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": robustness bitstring must be 0/1");
      rec.robust_correct.push_back(c == '1' ? 1 : 0);
    }
    std::size_t start = 0;
    const std::string& probs = fields[3];
    while (true) {
      const std::size_t semi = probs.find(';', start);
      const std::string tok =
          semi == std::string::npos ? probs.substr(start) : probs.substr(start, semi - start);
      rec.clean_true_prob.push_back(detail::parse_double(tok, line_no, path));
      if (semi == std::string::npos) break;
      start = semi + 1;
    }
    if (rec.clean_true_prob.size() != out.epochs)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": probability sequence length differs from epoch count");
    out.records.push_back(std::move(rec));
    out.labels.push_back(static_cast<std::size_t>(label));
  }
  if (out.records.empty()) throw ValidationError(path + ": records file has no rows");
  return out;
}

// Profile file: one reduced row per example with -1 standing in for a
// missing first_learned_epoch or an unmeasured min_perturbation.
struct ProfileRow {
  long long id = 0;
  std::size_t label = 0;
  double stability = 0.0;
  long long first_learned_epoch = -1;
  double best_epoch_probability = 0.0;
  double min_perturbation = -1.0;
  double quality_rank = 0.0;
};

inline std::vector<ProfileRow> make_profile(const RecordSet& records,
                                            const std::vector<std::size_t>& labels,
                                            std::size_t epochs, std::size_t best_epoch,
                                            const QualityRanking& ranking) {
  if (records.size() != labels.size())
    throw std::invalid_argument("make_profile: records and label counts differ");
  const auto rank = rank_by_id(ranking);
  std::vector<ProfileRow> rows;
  rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ExampleRecord& rec = records[i];
    ProfileRow row;
    row.id = rec.example_id;
    row.label = labels[i];
    row.stability = stability(rec, epochs);
    const auto first = first_learned_epoch(rec);
    row.first_learned_epoch = first ? static_cast<long long>(*first) : -1;
    if (best_epoch >= rec.clean_true_prob.size())
      throw std::invalid_argument("make_profile: record does not cover the best epoch");
    row.best_epoch_probability = rec.clean_true_prob[best_epoch];
    row.min_perturbation = rec.min_perturbation ? *rec.min_perturbation : -1.0;
    const auto it = rank.find(rec.example_id);
    if (it == rank.end())
      throw std::invalid_argument("make_profile: ranking is missing example id " +
                                  std::to_string(rec.example_id));
    row.quality_rank = it->second;
    rows.push_back(row);
  }
  return rows;
}

inline const char* kProfileHeader =
    "id,label,stability,first_learned_epoch,best_epoch_probability,min_perturbation,"
    "quality_rank";

inline void save_profile(const std::vector<ProfileRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open profile file for writing: " + path);
  os << kProfileHeader << '\n';
  char buf[64];
  for (const ProfileRow& row : rows) {
    os << row.id << ',' << row.label << ',';
    detail::format_double(buf, sizeof buf, row.stability);
    os << buf << ',' << row.first_learned_epoch << ',';
    detail::format_double(buf, sizeof buf, row.best_epoch_probability);
    os << buf << ',';
    detail::format_double(buf, sizeof buf, row.min_perturbation);
    os << buf << ',';
    detail::format_double(buf, sizeof buf, row.quality_rank);
    os << buf << '\n';
  }
  if (!os) throw ValidationError("failed while writing profile file: " + path);
}

inline std::vector<ProfileRow> load_profile(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open profile file: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kProfileHeader)
    throw ValidationError(path + ":1: unrecognized profile header");
  std::vector<ProfileRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 7)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 7 fields");
    ProfileRow row;
    row.id = detail::parse_int(fields[0], line_no, path);
    const long long label = detail::parse_int(fields[1], line_no, path);
    if (label < 0)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": negative label");
    row.label = static_cast<std::size_t>(label);
    row.stability = detail::parse_double(fields[2], line_no, path);
    row.first_learned_epoch = detail::parse_int(fields[3], line_no, path);
    row.best_epoch_probability = detail::parse_double(fields[4], line_no, path);
    row.min_perturbation = detail::parse_double(fields[5], line_no, path);
    row.quality_rank = detail::parse_double(fields[6], line_no, path);
    rows.push_back(row);
  }
  if (rows.empty()) throw ValidationError(path + ": profile file has no rows");
  return rows;
}

// Rebuilds a single-run ranking from profile rows for a chosen measure.
inline QualityRanking ranking_from_profile(const std::vector<ProfileRow>& rows,
                                           QualityMeasure measure) {
  std::vector<long long> ids;
  std::vector<double> scores;
  ids.reserve(rows.size());
  scores.reserve(rows.size());
  for (const ProfileRow& row : rows) {
    ids.push_back(row.id);
    switch (measure) {
      case QualityMeasure::stability: scores.push_back(row.stability); break;
      case QualityMeasure::probability: scores.push_back(row.best_epoch_probability); break;
      case QualityMeasure::min_perturbation:
        if (row.min_perturbation < 0.0)
          throw ValidationError("profile row " + std::to_string(row.id) +
                                " has no min_perturbation measurement");
        scores.push_back(row.min_perturbation);
        break;
      case QualityMeasure::learning_order:
        scores.push_back(row.first_learned_epoch < 0
                             ? std::numeric_limits<double>::infinity()
                             : static_cast<double>(row.first_learned_epoch));
        break;
    }
  }
  return quality_rank(ids, scores, measure);
}

// Ranking file: "measure=...,ensemble_size=..." then one id,rank row per
// example.
inline void save_ranking(const QualityRanking& r, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open ranking file for writing: " + path);
  os << "measure=" << to_string(r.measure) << ",ensemble_size=" << r.ensemble_size << '\n';
  char buf[64];
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    detail::format_double(buf, sizeof buf, r.rank[i]);
    os << r.ids[i] << ',' << buf << '\n';
  }
  if (!os) throw ValidationError("failed while writing ranking file: " + path);
}

inline QualityRanking load_ranking(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open ranking file: " + path);
  std::string line;
  if (!std::getline(is, line))
    throw ValidationError(path + ": empty ranking file");
  const auto header = detail::split_fields(line);
  if (header.size() != 2 || header[0].rfind("measure=", 0) != 0 ||
      header[1].rfind("ensemble_size=", 0) != 0)
    throw ValidationError(path + ":1: header must be 'measure=...,ensemble_size=...'");
  QualityRanking r;
  r.measure = quality_measure_from_string(header[0].substr(8));
  const long long ensemble = detail::parse_int(header[1].substr(14), 1, path);
  if (ensemble < 1) throw ValidationError(path + ":1: ensemble_size must be positive");
  r.ensemble_size = static_cast<std::size_t>(ensemble);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected id,rank");
    r.ids.push_back(detail::parse_int(fields[0], line_no, path));
    r.rank.push_back(detail::parse_double(fields[1], line_no, path));
  }
  if (r.ids.empty()) throw ValidationError(path + ": ranking file has no rows");
  return r;
}

}  // namespace advlab
