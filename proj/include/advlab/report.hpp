#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advlab/dataset.hpp"
#include "advlab/errors.hpp"
#include "advlab/experiments.hpp"

// JSON and CSV serialization for experiment outputs. nlohmann::json keeps
// object keys sorted, so identical inputs serialize to identical bytes.

namespace advlab {

using json = nlohmann::json;

inline json run_to_json(const RunResult& run) {
  json j;
  j["best_epoch"] = run.best_epoch;
  j["best_robust_test_acc"] = run.best_robust_test();
  j["clean_test_acc"] = run.clean_test_acc;
  j["clean_train_acc"] = run.clean_train_acc;
  j["config_digest"] = run.config_digest;
  j["epochs"] = run.epochs;
  j["last_robust_test_acc"] = run.last_robust_test();
  j["robust_test_acc"] = run.robust_test_acc;
  j["robust_train_acc"] = run.robust_train_acc;
  j["seed"] = run.seed;
  return j;
}

inline json evaluators_to_json(const std::vector<EvaluatorResult>& table) {
  json j;
  for (const EvaluatorResult& r : table) j[r.name] = r.robust_accuracy;
  return j;
}

inline json gaps_to_json(const GapReport& g) {
  json j;
  j["cross_generalization_gap"] = g.cross_generalization_gap;
  j["fraction"] = g.fraction;
  j["mode"] = to_string(g.mode);
  j["objective"] = to_string(g.objective);
  j["overestimation_gap"] = g.overestimation_gap;
  j["robust_overfitting_gap"] = g.robust_overfitting_gap;
  j["seed"] = g.seed;
  return j;
}

inline json condition_to_json(const CurveCondition& cond) {
  json j;
  j["adv_run"] = run_to_json(cond.adv_run);
  j["evaluators"] = evaluators_to_json(cond.evaluators);
  j["fraction"] = cond.fraction;
  j["gaps"] = gaps_to_json(cond.gaps);
  j["mode"] = to_string(cond.mode);
  j["seed"] = cond.seed;
  j["std_run"] = run_to_json(cond.std_run);
  j["surviving"] = cond.surviving;
  return j;
}

inline json curve_to_json(const std::vector<CurveCondition>& curve) {
  json j = json::array();
  for (const CurveCondition& cond : curve) j.push_back(condition_to_json(cond));
  return j;
}

inline json half_split_to_json(const HalfSplitResult& r) {
  json j;
  j["high_adv"] = run_to_json(r.high_adv);
  j["high_overfitting_gap"] = r.high_overfitting_gap;
  j["high_std"] = run_to_json(r.high_std);
  j["low_adv"] = run_to_json(r.low_adv);
  j["low_overfitting_gap"] = r.low_overfitting_gap;
  j["low_std"] = run_to_json(r.low_std);
  j["seed"] = r.seed;
  return j;
}

inline void save_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw ValidationError("failed while writing " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return j;
}

// One row per condition, wide enough to plot every headline number.
inline void save_curve_csv(const std::vector<CurveCondition>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << "fraction,mode,seed,surviving,best_robust_test,last_robust_test,"
         "robust_overfitting_gap,overestimation_gap,cross_generalization_gap\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    detail::format_double(buf, sizeof buf, v);
    out << buf << sep;
  };
  for (const CurveCondition& cond : curve) {
    put(cond.fraction, ',');
    out << to_string(cond.mode) << ',' << cond.seed << ',' << cond.surviving << ',';
    put(cond.adv_run.best_robust_test(), ',');
    put(cond.adv_run.last_robust_test(), ',');
    put(cond.gaps.robust_overfitting_gap, ',');
    put(cond.gaps.overestimation_gap, ',');
    put(cond.gaps.cross_generalization_gap, '\n');
  }
  if (!out) throw ValidationError("failed while writing " + path);
}

}  // namespace advlab
