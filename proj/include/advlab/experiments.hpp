#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/dataset.hpp"
#include "advlab/errors.hpp"
#include "advlab/network.hpp"
#include "advlab/objectives.hpp"
#include "advlab/profiler.hpp"
#include "advlab/ranking.hpp"
#include "advlab/stats.hpp"

namespace advlab {

struct ModelSpec {
  std::vector<std::size_t> hidden = {64, 64};
};

inline void validate(const ModelSpec& spec) {
  for (std::size_t h : spec.hidden)
    if (h == 0) throw ValidationError("model spec: hidden widths must be positive");
}

// Cost switches for bulk experiment conditions; the defaults give the full
// per-epoch profiled run.
struct TrainOptions {
  bool profile_train = true;      // per-epoch robustness records on the train set
  bool eval_robust_test = true;   // per-epoch attacked test evaluation
  bool measure_min_pert = false;  // per-example flip radius at the best checkpoint
  double min_pert_step = 1.0 / 255.0;
  double min_pert_max = 0.25;
};

struct RunResult {
  std::vector<double> clean_train_acc;
  std::vector<double> robust_train_acc;
  std::vector<double> clean_test_acc;
  std::vector<double> robust_test_acc;
  long long best_epoch = -1;  // argmax of robust test accuracy, ties earliest
  Network best_net;
  Network last_net;
  RecordSet records;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::string config_digest;

  double best_robust_test() const {
    return best_epoch >= 0 ? robust_test_acc[static_cast<std::size_t>(best_epoch)] : 0.0;
  }
  double last_robust_test() const {
    return robust_test_acc.empty() ? 0.0 : robust_test_acc.back();
  }
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

inline void append_num(std::string& s, double v) {
  char buf[64];
  format_double(buf, sizeof buf, v);
  s += buf;
  s += '|';
}

inline void append_num(std::string& s, std::uint64_t v) {
  s += std::to_string(v);
  s += '|';
}

// Seed namespaces for the independent random streams of one run.
constexpr std::uint64_t kTagInit = 0x696e6974ULL;
constexpr std::uint64_t kTagShuffle = 0x73687566ULL;
constexpr std::uint64_t kTagBatchAttack = 0x6261746bULL;
constexpr std::uint64_t kTagProfile = 0x70726f66ULL;
constexpr std::uint64_t kTagTestEval = 0x65766174ULL;
constexpr std::uint64_t kTagSquare = 0x73717569ULL;

}  // namespace detail

// Stable fingerprint of everything that shapes a run except its seed.
inline std::string config_digest(const ModelSpec& model, const TrainConfig& cfg,
                                 const ObjectiveConfig& objective,
                                 const AttackConfig& eval_attack) {
  std::string s = "model:";
  for (std::size_t h : model.hidden) detail::append_num(s, static_cast<std::uint64_t>(h));
  s += "train:";
  detail::append_num(s, static_cast<std::uint64_t>(cfg.epochs));
  detail::append_num(s, cfg.base_lr);
  for (std::size_t e : cfg.lr_decay_epochs) detail::append_num(s, static_cast<std::uint64_t>(e));
  detail::append_num(s, cfg.lr_decay_factor);
  detail::append_num(s, cfg.momentum);
  detail::append_num(s, cfg.weight_decay);
  detail::append_num(s, static_cast<std::uint64_t>(cfg.batch_size));
  s += "objective:" + to_string(objective.kind) + "|";
  detail::append_num(s, objective.lambda);
  detail::append_num(s, objective.gairat_lambda);
  const AttackConfig* atks[2] = {&objective.attack, &eval_attack};
  for (const AttackConfig* a : atks) {
    s += "attack:";
    detail::append_num(s, a->epsilon);
    detail::append_num(s, a->step_size);
    detail::append_num(s, static_cast<std::uint64_t>(a->iterations));
    detail::append_num(s, static_cast<std::uint64_t>(a->restarts));
    s += a->random_start ? "rs1|" : "rs0|";
    if (a->target_class) detail::append_num(s, static_cast<std::uint64_t>(*a->target_class));
  }
  return detail::hex64(detail::fnv1a64(s));
}

// Batched clean accuracy; optionally records per-example correctness.
inline double clean_accuracy(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                             Trace& tr, std::vector<std::uint8_t>* correct = nullptr) {
  if (x.rows != y.size())
    throw std::invalid_argument("clean_accuracy: batch and label counts differ");
  forward(net, x, tr);
  const Mat& logits = tr.pre.back();
  if (correct) correct->assign(y.size(), 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const bool ok = argmax_index(logits.row(i), net.class_count()) == y[i];
    hits += ok;
    if (correct) (*correct)[i] = ok ? 1 : 0;
  }
  return x.rows == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(x.rows);
}

// Robust accuracy against per-example PGD with seeds drawn from the run's
// evaluation namespace: an example counts iff its clean prediction is
// correct and the attack fails to flip it.
inline double robust_accuracy_pgd(const Network& net, const Mat& x,
                                  const std::vector<std::uint8_t>& clean_ok,
                                  const std::vector<std::size_t>& y, const AttackConfig& base,
                                  std::uint64_t run_seed, std::size_t epoch,
                                  AttackScratch& s, bool multi_restart = false) {
  AttackConfig cfg = base;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (!clean_ok[i]) continue;
    cfg.seed = derive_seed(run_seed, detail::kTagTestEval, epoch, i);
    const AttackOutcome oc = multi_restart ? pgd_multi_restart(net, x.row(i), y[i], cfg, s)
                                           : pgd(net, x.row(i), y[i], cfg, s);
    if (!oc.success) ++hits;
  }
  return x.rows == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(x.rows);
}

// One full training run: per-epoch accuracy curves, optional per-example
// profiling, best/last checkpoints. Fully deterministic in `seed`.
inline RunResult train_run(const Dataset& train, const Dataset& test, const ModelSpec& model,
                           const TrainConfig& cfg, const ObjectiveConfig& objective,
                           const AttackConfig& eval_attack, std::uint64_t seed,
                           const TrainOptions& opt = {}) {
  validate(cfg);
  validate(model);
  if (train.dim != test.dim || train.classes != test.classes)
    throw std::invalid_argument("train_run: train and test datasets are incompatible");
  if (train.size() == 0 || test.size() == 0)
    throw std::invalid_argument("train_run: empty dataset");

  Mat X, Xt;
  std::vector<std::size_t> Y, Yt;
  pack(train, X, Y);
  pack(test, Xt, Yt);

  RunResult res;
  res.seed = seed;
  res.epochs = cfg.epochs;
  res.config_digest = config_digest(model, cfg, objective, eval_attack);
  Network net = make_mlp(train.dim, model.hidden, train.classes,
                         derive_seed(seed, detail::kTagInit));
  SgdState sgd;
  sgd.init_like(net);
  if (opt.profile_train) res.records = init_records(train);

  ObjectiveScratch os;
  ObjectiveResult obj;
  ProfilerScratch ps;
  Trace eval_tr;
  std::vector<std::uint8_t> test_clean_ok;
  Mat Xb;
  std::vector<std::size_t> Yb;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_robust = -1.0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Rng shuffle_rng(derive_seed(seed, detail::kTagShuffle, e));
    shuffle_rng.shuffle(order);
    std::size_t adv_correct = 0;
    ObjectiveConfig ocfg = objective;
    for (std::size_t off = 0, b = 0; off < order.size(); off += cfg.batch_size, ++b) {
      const std::size_t nb = std::min(cfg.batch_size, order.size() - off);
      Xb.resize(nb, train.dim);
      Yb.resize(nb);
      for (std::size_t r = 0; r < nb; ++r) {
        const std::size_t src = order[off + r];
        std::copy(X.row(src), X.row(src) + train.dim, Xb.row(r));
        Yb[r] = Y[src];
      }
      ocfg.attack.seed = derive_seed(seed, detail::kTagBatchAttack, e, b);
      objective_loss(net, Xb, Yb, ocfg, obj, os);
      sgd_step(net, obj.grads, sgd, e, cfg);
      adv_correct += obj.adv_correct;
    }

    res.clean_train_acc.push_back(clean_accuracy(net, X, Y, eval_tr));
    if (opt.profile_train) {
      AttackConfig prof_attack = eval_attack;
      prof_attack.seed = derive_seed(seed, detail::kTagProfile);
      record_epoch(res.records, e, net, X, Y, prof_attack, ps);
      std::size_t hits = 0;
      for (const ExampleRecord& rec : res.records) hits += rec.robust_correct[e];
      res.robust_train_acc.push_back(static_cast<double>(hits) /
                                     static_cast<double>(res.records.size()));
    } else {
      res.robust_train_acc.push_back(static_cast<double>(adv_correct) /
                                     static_cast<double>(train.size()));
    }

    res.clean_test_acc.push_back(clean_accuracy(net, Xt, Yt, eval_tr, &test_clean_ok));
    if (opt.eval_robust_test) {
      const double robust =
          robust_accuracy_pgd(net, Xt, test_clean_ok, Yt, eval_attack, seed, e, ps.atk);
      res.robust_test_acc.push_back(robust);
      if (robust > best_robust) {
        best_robust = robust;
        res.best_epoch = static_cast<long long>(e);
        res.best_net = net;
      }
    }
  }

  res.last_net = net;
  if (res.best_epoch < 0) res.best_net = res.last_net;
  if (opt.profile_train && opt.measure_min_pert && train.size() > 0)
    measure_min_perturbation(res.records, res.best_net, X, Y, opt.min_pert_step,
                             opt.min_pert_max, ps);
  return res;
}

struct EvaluatorResult {
  std::string name;
  double robust_accuracy = 0.0;
};

// The evaluator battery for overestimation measurement. The multi-restart
// attack shares per-example seeds with the plain PGD column, making its
// attempt set a strict superset.
struct EvalSuite {
  AttackConfig attack;               // the PGD-10 analogue
  std::size_t long_iterations = 200; // budget-capped long PGD
  std::size_t restarts = 5;
  std::size_t square_budget = 800;
  std::size_t subset = 300;          // evaluate at most this many examples; 0 = all
  std::uint64_t run_seed = 0;
  std::size_t best_epoch = 0;        // epoch namespace for the eval seeds
};

inline std::vector<EvaluatorResult> overestimation_eval(const Network& net, const Dataset& test,
                                                        const EvalSuite& suite,
                                                        const Network* surrogate = nullptr) {
  Dataset subset;
  subset.dim = test.dim;
  subset.classes = test.classes;
  const std::size_t n =
      suite.subset == 0 ? test.size() : std::min(suite.subset, test.size());
  subset.examples.assign(test.examples.begin(),
                         test.examples.begin() + static_cast<long long>(n));
  Mat X;
  std::vector<std::size_t> Y;
  pack(subset, X, Y);

  Trace tr;
  std::vector<std::uint8_t> clean_ok;
  std::vector<EvaluatorResult> out;
  const double clean = clean_accuracy(net, X, Y, tr, &clean_ok);
  out.push_back({"clean", clean});

  AttackScratch s;
  AttackConfig pgd_cfg = suite.attack;
  pgd_cfg.restarts = 1;
  out.push_back({"pgd", robust_accuracy_pgd(net, X, clean_ok, Y, pgd_cfg, suite.run_seed,
                                            suite.best_epoch, s)});

  AttackConfig long_cfg = pgd_cfg;
  long_cfg.iterations = suite.long_iterations;
  out.push_back({"pgd_long", robust_accuracy_pgd(net, X, clean_ok, Y, long_cfg, suite.run_seed,
                                                 suite.best_epoch, s)});

  AttackConfig multi_cfg = pgd_cfg;
  multi_cfg.restarts = suite.restarts;
  out.push_back({"pgd_multi_restart",
                 robust_accuracy_pgd(net, X, clean_ok, Y, multi_cfg, suite.run_seed,
                                     suite.best_epoch, s, true)});

  std::size_t square_hits = 0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    if (!clean_ok[i]) continue;
    const AttackOutcome oc = square_patch_attack(
        net, X.row(i), Y[i], suite.attack.epsilon, suite.square_budget,
        derive_seed(suite.run_seed, detail::kTagSquare, suite.best_epoch, i), s);
    if (!oc.success) ++square_hits;
  }
  out.push_back({"square_patch",
                 X.rows == 0 ? 0.0 : static_cast<double>(square_hits) /
                                         static_cast<double>(X.rows)});

  if (surrogate != nullptr) {
    AttackConfig tr_cfg = multi_cfg;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < X.rows; ++i) {
      if (!clean_ok[i]) continue;
      tr_cfg.seed = derive_seed(suite.run_seed, detail::kTagTestEval, suite.best_epoch, i);
      const AttackOutcome oc = transfer_attack(*surrogate, net, X.row(i), Y[i], tr_cfg, s);
      if (!oc.success) ++hits;
    }
    out.push_back({"transfer",
                   X.rows == 0 ? 0.0 : static_cast<double>(hits) /
                                           static_cast<double>(X.rows)});
  }
  return out;
}

inline double evaluator_accuracy(const std::vector<EvaluatorResult>& table,
                                 const std::string& name) {
  for (const EvaluatorResult& r : table)
    if (r.name == name) return r.robust_accuracy;
  throw std::invalid_argument("evaluator table has no entry named " + name);
}

// The declared strong evaluator: worst case over the restarted white-box
// attack and the gradient-free search.
inline double strong_accuracy(const std::vector<EvaluatorResult>& table) {
  return std::min(evaluator_accuracy(table, "pgd_multi_restart"),
                  evaluator_accuracy(table, "square_patch"));
}

inline double overestimation_gap(double pgd_accuracy, double strong_accuracy) {
  return pgd_accuracy - strong_accuracy;
}

struct GapReport {
  double robust_overfitting_gap = 0.0;
  double overestimation_gap = 0.0;
  double cross_generalization_gap = 0.0;
  double fraction = 0.0;
  RemovalMode mode = RemovalMode::random;
  ObjectiveKind objective = ObjectiveKind::pgd_at;
  std::uint64_t seed = 0;
};

// The three headline differences; the caller supplies the evaluator
// accuracies measured on the adversarial run's best checkpoint.
inline GapReport compute_gaps(const RunResult& adv_run, const RunResult& std_run,
                              double pgd_accuracy, double strong_acc) {
  if (adv_run.clean_test_acc.size() != std_run.clean_test_acc.size())
    throw std::invalid_argument("compute_gaps: runs cover different epoch counts");
  GapReport g;
  g.robust_overfitting_gap = adv_run.best_robust_test() - adv_run.last_robust_test();
  g.overestimation_gap = overestimation_gap(pgd_accuracy, strong_acc);
  g.cross_generalization_gap = std_run.clean_test_acc.empty()
                                   ? 0.0
                                   : std_run.clean_test_acc.back() -
                                         adv_run.clean_test_acc.back();
  g.seed = adv_run.seed;
  return g;
}

struct CurveCondition {
  double fraction = 0.0;
  RemovalMode mode = RemovalMode::random;
  std::uint64_t seed = 0;
  std::size_t surviving = 0;
  RunResult adv_run;
  RunResult std_run;
  std::vector<EvaluatorResult> evaluators;
  GapReport gaps;
};

struct ExperimentProtocol {
  ModelSpec model;
  TrainConfig train;
  ObjectiveConfig objective;
  AttackConfig eval_attack;
  EvalSuite eval_suite;
  TrainOptions adv_options;  // profiling normally off for bulk conditions
  TrainOptions std_options;
};

inline ExperimentProtocol bulk_protocol(const ModelSpec& model, const TrainConfig& train,
                                        const ObjectiveConfig& objective,
                                        const AttackConfig& eval_attack,
                                        const EvalSuite& suite) {
  ExperimentProtocol p;
  p.model = model;
  p.train = train;
  p.objective = objective;
  p.eval_attack = eval_attack;
  p.eval_suite = suite;
  p.adv_options.profile_train = false;
  p.adv_options.eval_robust_test = true;
  p.std_options.profile_train = false;
  p.std_options.eval_robust_test = false;
  return p;
}

// One adversarial run, one matching standard run, and a strong evaluation
// per (fraction, mode, seed) triple on the pruned training set.
inline CurveCondition run_condition(const Dataset& train, const Dataset& test,
                                    const QualityRanking& ranking, double fraction,
                                    RemovalMode mode, std::uint64_t seed,
                                    const ExperimentProtocol& proto) {
  CurveCondition cond;
  cond.fraction = fraction;
  cond.mode = mode;
  cond.seed = seed;
  const Dataset pruned = remove_fraction(train, ranking, fraction, mode, seed);
  cond.surviving = pruned.size();
  cond.adv_run = train_run(pruned, test, proto.model, proto.train, proto.objective,
                           proto.eval_attack, seed, proto.adv_options);
  ObjectiveConfig std_obj;
  std_obj.kind = ObjectiveKind::standard;
  std_obj.attack = proto.objective.attack;
  cond.std_run = train_run(pruned, test, proto.model, proto.train, std_obj, proto.eval_attack,
                           seed, proto.std_options);
  EvalSuite suite = proto.eval_suite;
  suite.run_seed = seed;
  suite.best_epoch =
      cond.adv_run.best_epoch >= 0 ? static_cast<std::size_t>(cond.adv_run.best_epoch) : 0;
  cond.evaluators = overestimation_eval(cond.adv_run.best_net, test, suite);
  cond.gaps = compute_gaps(cond.adv_run, cond.std_run,
                           evaluator_accuracy(cond.evaluators, "pgd"),
                           strong_accuracy(cond.evaluators));
  cond.gaps.fraction = fraction;
  cond.gaps.mode = mode;
  cond.gaps.objective = proto.objective.kind;
  return cond;
}

inline std::vector<CurveCondition> removal_curve(const Dataset& train, const Dataset& test,
                                                 const QualityRanking& ranking,
                                                 const std::vector<double>& fractions,
                                                 const std::vector<RemovalMode>& modes,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 const ExperimentProtocol& proto) {
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] < 1.0))
      throw ValidationError("removal_curve: fractions must lie in [0,1)");
    if (i > 0 && fractions[i] < fractions[i - 1])
      throw ValidationError("removal_curve: fractions must be sorted ascending");
  }
  std::vector<CurveCondition> out;
  for (double fraction : fractions)
    for (RemovalMode mode : modes)
      for (std::uint64_t seed : seeds)
        out.push_back(run_condition(train, test, ranking, fraction, mode, seed, proto));
  return out;
}

struct HalfSplitResult {
  std::uint64_t seed = 0;
  RunResult high_adv;
  RunResult low_adv;
  RunResult high_std;
  RunResult low_std;
  double high_overfitting_gap = 0.0;
  double low_overfitting_gap = 0.0;
};

// Standard and adversarial training on the quality-split halves; the clean
// accuracy contrast between halves is reported, not gated.
inline std::vector<HalfSplitResult> half_split_demo(const Dataset& train, const Dataset& test,
                                                    const QualityRanking& ranking,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    const ExperimentProtocol& proto) {
  const auto halves = class_balanced_halves(train, ranking);
  std::vector<HalfSplitResult> out;
  for (std::uint64_t seed : seeds) {
    HalfSplitResult r;
    r.seed = seed;
    ObjectiveConfig std_obj;
    std_obj.kind = ObjectiveKind::standard;
    std_obj.attack = proto.objective.attack;
    r.high_adv = train_run(halves.first, test, proto.model, proto.train, proto.objective,
                           proto.eval_attack, seed, proto.adv_options);
    r.low_adv = train_run(halves.second, test, proto.model, proto.train, proto.objective,
                          proto.eval_attack, seed, proto.adv_options);
    TrainOptions std_opt = proto.std_options;
    r.high_std = train_run(halves.first, test, proto.model, proto.train, std_obj,
                           proto.eval_attack, seed, std_opt);
    r.low_std = train_run(halves.second, test, proto.model, proto.train, std_obj,
                          proto.eval_attack, seed, std_opt);
    r.high_overfitting_gap = r.high_adv.best_robust_test() - r.high_adv.last_robust_test();
    r.low_overfitting_gap = r.low_adv.best_robust_test() - r.low_adv.last_robust_test();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace advlab
