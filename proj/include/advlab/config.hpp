#pragma once

#include <cstdlib>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/dataset.hpp"
#include "advlab/errors.hpp"
#include "advlab/experiments.hpp"
#include "advlab/network.hpp"
#include "advlab/objectives.hpp"
#include "advlab/ranking.hpp"
#include "advlab/report.hpp"

namespace advlab {

// Everything a CLI invocation needs, with the desk-scale protocol as the
// default. Any field may be set from a JSON config file; unknown or
// out-of-range fields are rejected with their full path before any work.
struct CliConfig {
  SyntheticSpec data;
  double test_fraction = 0.25;
  ModelSpec model;
  TrainConfig train;
  ObjectiveConfig objective;
  AttackConfig eval_attack;
  EvalSuite eval_suite;
  QualityMeasure measure = QualityMeasure::stability;
  std::size_t ensemble_size = 10;
  bool measure_min_pert = false;
  double min_pert_step = 1.0 / 255.0;
  double min_pert_max = 0.25;
  std::vector<double> fractions = {0.0, 0.2, 0.4, 0.6};
  std::vector<RemovalMode> modes = {RemovalMode::random, RemovalMode::ascending_quality};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::uint64_t seed = 1;
  std::string out = "out";
};

inline CliConfig desk_config() {
  CliConfig cfg;
  cfg.train.epochs = 40;
  cfg.train.lr_decay_epochs = {20, 30};
  cfg.objective.attack.epsilon = 0.1;
  cfg.objective.attack.step_size = 0.025;
  cfg.objective.attack.iterations = 7;
  cfg.eval_attack.epsilon = 0.1;
  cfg.eval_attack.step_size = 0.025;
  cfg.eval_attack.iterations = 10;
  cfg.eval_suite.attack = cfg.eval_attack;
  return cfg;
}

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& msg) {
  throw ValidationError("config: " + path + ": " + msg);
}

inline void require_known(const json& sec, const std::string& path,
                          std::initializer_list<const char*> keys) {
  if (!sec.is_object()) config_fail(path, "expected an object");
  for (auto it = sec.begin(); it != sec.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) known = true;
    if (!known) config_fail(path + "." + it.key(), "unknown field");
  }
}

inline void read_field(const json& sec, const std::string& path, const char* key, double& out) {
  auto it = sec.find(key);
  if (it == sec.end()) return;
  if (!it->is_number()) config_fail(path + "." + key, "expected a number");
  out = it->get<double>();
}

inline void read_field(const json& sec, const std::string& path, const char* key,
                       std::size_t& out) {
  auto it = sec.find(key);
  if (it == sec.end()) return;
  const bool ok = it->is_number_unsigned() ||
                  (it->is_number_integer() && it->get<long long>() >= 0);
  if (!ok) config_fail(path + "." + key, "expected a nonnegative integer");
  out = it->get<std::size_t>();
}

inline void read_field(const json& sec, const std::string& path, const char* key, bool& out) {
  auto it = sec.find(key);
  if (it == sec.end()) return;
  if (!it->is_boolean()) config_fail(path + "." + key, "expected true or false");
  out = it->get<bool>();
}

inline void read_field(const json& sec, const std::string& path, const char* key,
                       std::string& out) {
  auto it = sec.find(key);
  if (it == sec.end()) return;
  if (!it->is_string()) config_fail(path + "." + key, "expected a string");
  out = it->get<std::string>();
}

template <typename T>
inline void read_array(const json& sec, const std::string& path, const char* key,
                       std::vector<T>& out, const char* what) {
  auto it = sec.find(key);
  if (it == sec.end()) return;
  if (!it->is_array()) config_fail(path + "." + key, std::string("expected an array of ") + what);
  out.clear();
  for (const json& v : *it) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) config_fail(path + "." + key, "expected numbers only");
    } else {
      const bool ok = v.is_number_unsigned() ||
                      (v.is_number_integer() && v.get<long long>() >= 0);
      if (!ok) config_fail(path + "." + key, "expected nonnegative integers only");
    }
    out.push_back(v.get<T>());
  }
}

inline void read_attack(const json& sec, const std::string& path, AttackConfig& out) {
  require_known(sec, path,
                {"epsilon", "step_size", "iterations", "restarts", "random_start"});
  read_field(sec, path, "epsilon", out.epsilon);
  read_field(sec, path, "step_size", out.step_size);
  read_field(sec, path, "iterations", out.iterations);
  read_field(sec, path, "restarts", out.restarts);
  read_field(sec, path, "random_start", out.random_start);
}

}  // namespace detail

inline CliConfig parse_config(const json& j) {
  using detail::config_fail;
  using detail::read_array;
  using detail::read_field;
  using detail::require_known;

  CliConfig cfg = desk_config();
  require_known(j, "config",
                {"data", "model", "train", "objective", "train_attack", "eval_attack",
                 "eval_suite", "profile", "experiment", "seed", "out"});

  if (auto it = j.find("data"); it != j.end()) {
    const json& sec = *it;
    require_known(sec, "data",
                  {"classes", "dim", "means", "spread", "ambiguous_fraction", "n_per_class",
                   "seed", "test_fraction"});
    read_field(sec, "data", "classes", cfg.data.classes);
    read_field(sec, "data", "dim", cfg.data.dim);
    read_field(sec, "data", "spread", cfg.data.spread);
    read_field(sec, "data", "ambiguous_fraction", cfg.data.ambiguous_fraction);
    read_field(sec, "data", "n_per_class", cfg.data.n_per_class);
    read_field(sec, "data", "seed", cfg.data.seed);
    read_field(sec, "data", "test_fraction", cfg.test_fraction);
    if (auto mit = sec.find("means"); mit != sec.end()) {
      if (!mit->is_array()) config_fail("data.means", "expected an array of coordinate arrays");
      cfg.data.means.clear();
      for (const json& row : *mit) {
        std::vector<double> mean;
        if (!row.is_array()) config_fail("data.means", "expected an array of coordinate arrays");
        for (const json& v : row) {
          if (!v.is_number()) config_fail("data.means", "expected numbers only");
          mean.push_back(v.get<double>());
        }
        cfg.data.means.push_back(std::move(mean));
      }
    }
  }

  if (auto it = j.find("model"); it != j.end()) {
    require_known(*it, "model", {"hidden"});
    read_array(*it, "model", "hidden", cfg.model.hidden, "layer widths");
  }

  if (auto it = j.find("train"); it != j.end()) {
    const json& sec = *it;
    require_known(sec, "train",
                  {"epochs", "base_lr", "lr_decay_epochs", "lr_decay_factor", "momentum",
                   "weight_decay", "batch_size"});
    read_field(sec, "train", "epochs", cfg.train.epochs);
    read_field(sec, "train", "base_lr", cfg.train.base_lr);
    read_array(sec, "train", "lr_decay_epochs", cfg.train.lr_decay_epochs, "epoch numbers");
    read_field(sec, "train", "lr_decay_factor", cfg.train.lr_decay_factor);
    read_field(sec, "train", "momentum", cfg.train.momentum);
    read_field(sec, "train", "weight_decay", cfg.train.weight_decay);
    read_field(sec, "train", "batch_size", cfg.train.batch_size);
  }

  if (auto it = j.find("objective"); it != j.end()) {
    const json& sec = *it;
    require_known(sec, "objective", {"kind", "lambda", "gairat_lambda"});
    std::string kind;
    read_field(sec, "objective", "kind", kind);
    if (!kind.empty()) {
      try {
        cfg.objective.kind = objective_kind_from_string(kind);
      } catch (const ValidationError& e) {
        config_fail("objective.kind", e.what());
      }
    }
    read_field(sec, "objective", "lambda", cfg.objective.lambda);
    read_field(sec, "objective", "gairat_lambda", cfg.objective.gairat_lambda);
  }

  if (auto it = j.find("train_attack"); it != j.end())
    detail::read_attack(*it, "train_attack", cfg.objective.attack);
  if (auto it = j.find("eval_attack"); it != j.end())
    detail::read_attack(*it, "eval_attack", cfg.eval_attack);

  if (auto it = j.find("eval_suite"); it != j.end()) {
    const json& sec = *it;
    require_known(sec, "eval_suite",
                  {"long_iterations", "restarts", "square_budget", "subset"});
    read_field(sec, "eval_suite", "long_iterations", cfg.eval_suite.long_iterations);
    read_field(sec, "eval_suite", "restarts", cfg.eval_suite.restarts);
    read_field(sec, "eval_suite", "square_budget", cfg.eval_suite.square_budget);
    read_field(sec, "eval_suite", "subset", cfg.eval_suite.subset);
  }

  if (auto it = j.find("profile"); it != j.end()) {
    const json& sec = *it;
    require_known(sec, "profile",
                  {"measure", "ensemble_size", "measure_min_pert", "min_pert_step",
                   "min_pert_max"});
    std::string measure;
    read_field(sec, "profile", "measure", measure);
    if (!measure.empty()) {
      try {
        cfg.measure = quality_measure_from_string(measure);
      } catch (const ValidationError& e) {
        config_fail("profile.measure", e.what());
      }
    }
    read_field(sec, "profile", "ensemble_size", cfg.ensemble_size);
    read_field(sec, "profile", "measure_min_pert", cfg.measure_min_pert);
    read_field(sec, "profile", "min_pert_step", cfg.min_pert_step);
    read_field(sec, "profile", "min_pert_max", cfg.min_pert_max);
  }

  if (auto it = j.find("experiment"); it != j.end()) {
    const json& sec = *it;
    require_known(sec, "experiment", {"fractions", "modes", "seeds"});
    read_array(sec, "experiment", "fractions", cfg.fractions, "fractions");
    read_array(sec, "experiment", "seeds", cfg.seeds, "seeds");
    if (auto mit = sec.find("modes"); mit != sec.end()) {
      if (!mit->is_array()) config_fail("experiment.modes", "expected an array of mode names");
      cfg.modes.clear();
      for (const json& v : *mit) {
        if (!v.is_string()) config_fail("experiment.modes", "expected strings only");
        try {
          cfg.modes.push_back(removal_mode_from_string(v.get<std::string>()));
        } catch (const ValidationError& e) {
          config_fail("experiment.modes", e.what());
        }
      }
    }
  }

  read_field(j, "config", "seed", cfg.seed);
  read_field(j, "config", "out", cfg.out);

  cfg.eval_suite.attack = cfg.eval_attack;
  return cfg;
}

inline void validate(const CliConfig& cfg) {
  auto guard = [](const char* path, auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      detail::config_fail(path, e.what());
    }
  };
  guard("data", [&] { validate(cfg.data); });
  guard("model", [&] { validate(cfg.model); });
  guard("train", [&] { validate(cfg.train); });
  guard("objective", [&] { validate(cfg.objective, cfg.data.classes); });
  guard("eval_attack", [&] { validate(cfg.eval_attack, cfg.data.classes); });
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    detail::config_fail("data.test_fraction", "must lie in (0,1)");
  if (cfg.eval_suite.long_iterations == 0)
    detail::config_fail("eval_suite.long_iterations", "must be positive");
  if (cfg.eval_suite.restarts == 0)
    detail::config_fail("eval_suite.restarts", "must be positive");
  if (cfg.eval_suite.square_budget == 0)
    detail::config_fail("eval_suite.square_budget", "must be positive");
  if (cfg.ensemble_size == 0) detail::config_fail("profile.ensemble_size", "must be positive");
  if (!(cfg.min_pert_step > 0.0)) detail::config_fail("profile.min_pert_step", "must be positive");
  if (!(cfg.min_pert_max > 0.0 && cfg.min_pert_max <= 1.0))
    detail::config_fail("profile.min_pert_max", "must lie in (0,1]");
  for (double f : cfg.fractions)
    if (!(f >= 0.0 && f < 1.0))
      detail::config_fail("experiment.fractions", "every fraction must lie in [0,1)");
  for (std::size_t i = 1; i < cfg.fractions.size(); ++i)
    if (cfg.fractions[i] < cfg.fractions[i - 1])
      detail::config_fail("experiment.fractions", "fractions must be sorted ascending");
  if (cfg.modes.empty()) detail::config_fail("experiment.modes", "at least one mode required");
  if (cfg.seeds.empty()) detail::config_fail("experiment.seeds", "at least one seed required");
  if (cfg.out.empty()) detail::config_fail("out", "output directory must not be empty");
}

// Config resolution: explicit path, else the environment override, else the
// built-in desk defaults.
inline CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (!path.empty()) {
    cfg = parse_config(load_json(path));
  } else if (const char* env = std::getenv("ADVLAB_CONFIG"); env != nullptr && *env != '\0') {
    cfg = parse_config(load_json(env));
  } else {
    cfg = desk_config();
  }
  validate(cfg);
  return cfg;
}

}  // namespace advlab
