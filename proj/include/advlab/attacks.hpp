#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "advlab/errors.hpp"
#include "advlab/network.hpp"
#include "advlab/rng.hpp"

namespace advlab {

struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  std::size_t iterations = 10;
  std::size_t restarts = 1;
  bool random_start = true;
  std::optional<std::size_t> target_class;
  std::uint64_t seed = 0;
};

// Config-file validation; the attack functions themselves also accept the
// degenerate epsilon = 0 for diagnostic runs.
inline void validate(const AttackConfig& cfg, std::size_t class_count) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0))
    throw ValidationError("attack config: epsilon must lie in (0,1]");
  if (!(cfg.step_size > 0.0))
    throw ValidationError("attack config: step_size must be positive");
  if (cfg.step_size > 2.0 * cfg.epsilon)
    throw ValidationError("attack config: step_size must be at most 2*epsilon");
  if (cfg.iterations == 0)
    throw ValidationError("attack config: iterations must be positive");
  if (cfg.restarts == 0)
    throw ValidationError("attack config: restarts must be positive");
  if (cfg.target_class && *cfg.target_class >= class_count)
    throw ValidationError("attack config: target_class out of range");
}

struct AttackOutcome {
  std::vector<double> adv;
  bool success = false;
  std::size_t kappa = 0;
};

// Reusable buffers so per-example attack calls allocate nothing after the
// first use.
struct AttackScratch {
  Trace tr;
  Mat x_row;
  Mat dlogits;
  Mat dinput;
  std::vector<double> probs;
  std::vector<double> delta;
  std::vector<double> delta_prop;
  std::vector<double> grad_sign_base;
};

inline std::size_t argmax_index(const double* v, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline std::size_t predict(const Network& net, const double* x, AttackScratch& s) {
  s.x_row.resize(1, net.input_dim());
  std::copy(x, x + net.input_dim(), s.x_row.row(0));
  forward(net, s.x_row, s.tr);
  return argmax_index(s.tr.pre.back().row(0), net.class_count());
}

// logit_y - max over other classes; negative means misclassified.
inline double margin_of(const double* logits, std::size_t n, std::size_t y) {
  double other = -1e300;
  for (std::size_t c = 0; c < n; ++c)
    if (c != y) other = std::max(other, logits[c]);
  return logits[y] - other;
}

namespace detail {

// Forward the current iterate held in s.x_row, fill s.probs, and return the
// selection metric (maximized by every caller): cross-entropy of the true
// label when untargeted, negated cross-entropy of the target when targeted.
inline double attack_metric(const Network& net, AttackScratch& s, std::size_t y,
                            const std::optional<std::size_t>& target) {
  forward(net, s.x_row, s.tr);
  const Mat& logits = s.tr.pre.back();
  s.probs.resize(net.class_count());
  softmax_row(logits.row(0), net.class_count(), s.probs.data());
  if (target) return safe_log(s.probs[*target]);
  return -safe_log(s.probs[y]);
}

inline bool fools(std::size_t pred, std::size_t y, const std::optional<std::size_t>& target) {
  return target ? pred == *target : pred != y;
}

}  // namespace detail

// Projected gradient descent in the l-inf ball of radius cfg.epsilon.
// Each step ascends the selection metric: delta is projected back to the
// ball, the iterate clipped to [0,1], and the best visited iterate (clean
// input included) is returned. kappa is the first iteration index, checked
// on the clean input at 0 and on the running iterate before each later
// step, at which the model is fooled; iterations if never.
inline AttackOutcome pgd(const Network& net, const double* x, std::size_t y,
                         const AttackConfig& cfg, AttackScratch& s) {
  const std::size_t d = net.input_dim();
  const std::size_t classes = net.class_count();
  const std::size_t K = cfg.iterations;
  if (y >= classes) throw std::invalid_argument("pgd: label out of range");
  if (cfg.target_class && *cfg.target_class >= classes)
    throw std::invalid_argument("pgd: target_class out of range");

  AttackOutcome out;
  out.adv.assign(x, x + d);
  out.kappa = K;

  s.x_row.resize(1, d);
  std::copy(x, x + d, s.x_row.row(0));
  double metric = detail::attack_metric(net, s, y, cfg.target_class);
  std::size_t pred = argmax_index(s.tr.pre.back().row(0), classes);
  double best_metric = metric;
  std::size_t best_pred = pred;
  if (detail::fools(pred, y, cfg.target_class)) out.kappa = 0;

  s.delta.assign(d, 0.0);
  if (cfg.random_start && cfg.epsilon > 0.0) {
    Rng rng(derive_seed(cfg.seed, 0x70676473ULL));
    for (std::size_t j = 0; j < d; ++j) s.delta[j] = rng.uniform(-cfg.epsilon, cfg.epsilon);
    for (std::size_t j = 0; j < d; ++j)
      s.x_row.row(0)[j] = std::clamp(x[j] + s.delta[j], 0.0, 1.0);
    metric = detail::attack_metric(net, s, y, cfg.target_class);
    pred = argmax_index(s.tr.pre.back().row(0), classes);
    if (metric > best_metric) {
      best_metric = metric;
      best_pred = pred;
      std::copy(s.x_row.row(0), s.x_row.row(0) + d, out.adv.begin());
    }
  }

  s.dlogits.resize(1, classes);
  for (std::size_t k = 1; k <= K; ++k) {
    double* dl = s.dlogits.row(0);
    if (cfg.target_class) {
      for (std::size_t c = 0; c < classes; ++c) dl[c] = -s.probs[c];
      dl[*cfg.target_class] += 1.0;
    } else {
      for (std::size_t c = 0; c < classes; ++c) dl[c] = s.probs[c];
      dl[y] -= 1.0;
    }
    backward_input_only(net, s.tr, s.dlogits, s.dinput);
    const double* g = s.dinput.row(0);
    for (std::size_t j = 0; j < d; ++j) {
      s.delta[j] = std::clamp(s.delta[j] + cfg.step_size * sign_of(g[j]), -cfg.epsilon,
                              cfg.epsilon);
      s.x_row.row(0)[j] = std::clamp(x[j] + s.delta[j], 0.0, 1.0);
    }
    metric = detail::attack_metric(net, s, y, cfg.target_class);
    pred = argmax_index(s.tr.pre.back().row(0), classes);
    if (metric > best_metric) {
      best_metric = metric;
      best_pred = pred;
      std::copy(s.x_row.row(0), s.x_row.row(0) + d, out.adv.begin());
    }
    if (k < K && out.kappa == K && detail::fools(pred, y, cfg.target_class)) out.kappa = k;
  }

  out.success = detail::fools(best_pred, y, cfg.target_class);
  return out;
}

inline AttackOutcome pgd(const Network& net, const std::vector<double>& x, std::size_t y,
                         const AttackConfig& cfg) {
  AttackScratch s;
  return pgd(net, x.data(), y, cfg, s);
}

// Single-step sign attack. Implemented on its own rather than delegating to
// pgd so the two can cross-check each other; like pgd it keeps the clean
// input when the step does not increase the loss.
inline AttackOutcome fgsm(const Network& net, const double* x, std::size_t y,
                          double epsilon, AttackScratch& s) {
  const std::size_t d = net.input_dim();
  const std::size_t classes = net.class_count();
  if (y >= classes) throw std::invalid_argument("fgsm: label out of range");

  AttackOutcome out;
  out.adv.assign(x, x + d);

  s.x_row.resize(1, d);
  std::copy(x, x + d, s.x_row.row(0));
  forward(net, s.x_row, s.tr);
  s.probs.resize(classes);
  softmax_row(s.tr.pre.back().row(0), classes, s.probs.data());
  const double clean_loss = -safe_log(s.probs[y]);
  const std::size_t clean_pred = argmax_index(s.tr.pre.back().row(0), classes);

  s.dlogits.resize(1, classes);
  double* dl = s.dlogits.row(0);
  for (std::size_t c = 0; c < classes; ++c) dl[c] = s.probs[c];
  dl[y] -= 1.0;
  backward_input_only(net, s.tr, s.dlogits, s.dinput);
  const double* g = s.dinput.row(0);
  for (std::size_t j = 0; j < d; ++j)
    s.x_row.row(0)[j] = std::clamp(x[j] + epsilon * sign_of(g[j]), 0.0, 1.0);
  forward(net, s.x_row, s.tr);
  softmax_row(s.tr.pre.back().row(0), classes, s.probs.data());
  const double stepped_loss = -safe_log(s.probs[y]);
  const std::size_t stepped_pred = argmax_index(s.tr.pre.back().row(0), classes);

  std::size_t pred = clean_pred;
  if (stepped_loss > clean_loss) {
    std::copy(s.x_row.row(0), s.x_row.row(0) + d, out.adv.begin());
    pred = stepped_pred;
  }
  out.success = pred != y;
  out.kappa = clean_pred != y ? 0 : 1;
  return out;
}

inline AttackOutcome fgsm(const Network& net, const std::vector<double>& x, std::size_t y,
                          double epsilon) {
  AttackScratch s;
  return fgsm(net, x.data(), y, epsilon, s);
}

// Worst case over independent restarts. The first restart runs the config
// exactly as given (so restarts = 1 is plain pgd); later restarts always
// random-start under per-restart derived seeds, making the attempt set of a
// higher restart count a superset of a lower one.
inline AttackOutcome pgd_multi_restart(const Network& net, const double* x, std::size_t y,
                                       const AttackConfig& cfg, AttackScratch& s) {
  AttackConfig sub = cfg;
  AttackOutcome best;
  double best_metric = 0.0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    if (r > 0) {
      sub.random_start = true;
      sub.seed = derive_seed(cfg.seed, 0x72737472ULL, r);
    }
    AttackOutcome oc = pgd(net, x, y, sub, s);
    s.x_row.resize(1, net.input_dim());
    std::copy(oc.adv.begin(), oc.adv.end(), s.x_row.row(0));
    const double metric = detail::attack_metric(net, s, y, cfg.target_class);
    const bool better = r == 0 ||
                        (oc.success && !best.success) ||
                        (oc.success == best.success && metric > best_metric);
    if (better) {
      best = std::move(oc);
      best_metric = metric;
    }
  }
  return best;
}

inline AttackOutcome pgd_multi_restart(const Network& net, const std::vector<double>& x,
                                       std::size_t y, const AttackConfig& cfg) {
  AttackScratch s;
  return pgd_multi_restart(net, x.data(), y, cfg, s);
}

struct MinPerturbation {
  double epsilon_star = 0.0;
  bool found = false;
};

// Grid line search over radii {step, 2*step, ...} up to eps_max; each radius
// gets an iterated sign attack with that many unit steps. Returns the first
// radius that flips the prediction, eps_max with found=false if none does,
// and 0 when the clean input is already misclassified.
inline MinPerturbation min_perturbation(const Network& net, const double* x, std::size_t y,
                                        double step, double eps_max, AttackScratch& s) {
  if (!(step > 0.0)) throw std::invalid_argument("min_perturbation: step must be positive");
  if (eps_max > 1.0) throw std::invalid_argument("min_perturbation: eps_max must be at most 1");
  if (predict(net, x, s) != y) return {0.0, true};
  const auto grid = static_cast<std::size_t>(eps_max / step + 1e-9);
  AttackConfig cfg;
  cfg.step_size = step;
  cfg.restarts = 1;
  cfg.random_start = false;
  cfg.target_class.reset();
  for (std::size_t g = 1; g <= grid; ++g) {
    cfg.epsilon = static_cast<double>(g) * step;
    cfg.iterations = g;
    const AttackOutcome oc = pgd(net, x, y, cfg, s);
    if (oc.success) return {cfg.epsilon, true};
  }
  return {eps_max, false};
}

inline MinPerturbation min_perturbation(const Network& net, const std::vector<double>& x,
                                        std::size_t y, double step, double eps_max) {
  AttackScratch s;
  return min_perturbation(net, x.data(), y, step, eps_max, s);
}

// Gradient-free random search: propose rewriting a random contiguous window
// of delta with fresh +-epsilon entries, keep the proposal only when the
// margin strictly drops, stop on misclassification or when query_budget
// forward evaluations are spent.
inline AttackOutcome square_patch_attack(const Network& net, const double* x, std::size_t y,
                                         double epsilon, std::size_t query_budget,
                                         std::uint64_t seed, AttackScratch& s) {
  const std::size_t d = net.input_dim();
  const std::size_t classes = net.class_count();
  if (y >= classes) throw std::invalid_argument("square_patch_attack: label out of range");
  if (query_budget == 0)
    throw std::invalid_argument("square_patch_attack: query_budget must be positive");

  s.x_row.resize(1, d);
  std::copy(x, x + d, s.x_row.row(0));
  forward(net, s.x_row, s.tr);
  std::size_t queries = 1;
  double cur_margin = margin_of(s.tr.pre.back().row(0), classes, y);
  std::size_t cur_pred = argmax_index(s.tr.pre.back().row(0), classes);

  AttackOutcome out;
  out.adv.assign(x, x + d);
  if (cur_pred != y) {
    out.success = true;
    out.kappa = 0;
    return out;
  }

  Rng rng(derive_seed(seed, 0x73717061ULL));
  s.delta.assign(d, 0.0);
  s.delta_prop.assign(d, 0.0);
  std::size_t first_success = query_budget;
  while (queries < query_budget && cur_pred == y) {
    const auto len = 1 + static_cast<std::size_t>(rng.below(d));
    const auto start = static_cast<std::size_t>(rng.below(d - len + 1));
    s.delta_prop = s.delta;
    for (std::size_t j = start; j < start + len; ++j)
      s.delta_prop[j] = rng.uniform() < 0.5 ? -epsilon : epsilon;
    for (std::size_t j = 0; j < d; ++j)
      s.x_row.row(0)[j] = std::clamp(x[j] + s.delta_prop[j], 0.0, 1.0);
    forward(net, s.x_row, s.tr);
    ++queries;
    const double prop_margin = margin_of(s.tr.pre.back().row(0), classes, y);
    if (prop_margin < cur_margin) {
      std::swap(s.delta, s.delta_prop);
      cur_margin = prop_margin;
      cur_pred = argmax_index(s.tr.pre.back().row(0), classes);
      for (std::size_t j = 0; j < d; ++j)
        out.adv[j] = std::clamp(x[j] + s.delta[j], 0.0, 1.0);
      if (cur_pred != y && first_success == query_budget) first_success = queries;
    }
  }
  out.success = cur_pred != y;
  out.kappa = out.success ? first_success : query_budget;
  return out;
}

inline AttackOutcome square_patch_attack(const Network& net, const std::vector<double>& x,
                                         std::size_t y, double epsilon,
                                         std::size_t query_budget, std::uint64_t seed) {
  AttackScratch s;
  return square_patch_attack(net, x.data(), y, epsilon, query_budget, seed, s);
}

// Adversarial input crafted against the surrogate, judged on the target.
inline AttackOutcome transfer_attack(const Network& surrogate, const Network& target,
                                     const double* x, std::size_t y, const AttackConfig& cfg,
                                     AttackScratch& s) {
  if (surrogate.input_dim() != target.input_dim() ||
      surrogate.class_count() != target.class_count())
    throw std::invalid_argument("transfer_attack: surrogate and target dimensions differ");
  AttackOutcome oc = pgd_multi_restart(surrogate, x, y, cfg, s);
  const std::size_t clean_pred = predict(target, x, s);
  s.x_row.resize(1, target.input_dim());
  std::copy(oc.adv.begin(), oc.adv.end(), s.x_row.row(0));
  forward(target, s.x_row, s.tr);
  const std::size_t adv_pred =
      argmax_index(s.tr.pre.back().row(0), target.class_count());
  oc.success = detail::fools(adv_pred, y, cfg.target_class);
  if (detail::fools(clean_pred, y, cfg.target_class))
    oc.kappa = 0;
  else if (oc.kappa == 0)
    oc.kappa = 1;
  return oc;
}

inline AttackOutcome transfer_attack(const Network& surrogate, const Network& target,
                                     const std::vector<double>& x, std::size_t y,
                                     const AttackConfig& cfg) {
  AttackScratch s;
  return transfer_attack(surrogate, target, x.data(), y, cfg, s);
}

}  // namespace advlab
