#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/errors.hpp"
#include "advlab/network.hpp"

namespace advlab {

enum class ObjectiveKind { standard, pgd_at, trades, mart, gairat };

inline std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::standard: return "standard";
    case ObjectiveKind::pgd_at: return "pgd_at";
    case ObjectiveKind::trades: return "trades";
    case ObjectiveKind::mart: return "mart";
    case ObjectiveKind::gairat: return "gairat";
  }
  throw std::invalid_argument("unknown objective kind");
}

inline ObjectiveKind objective_kind_from_string(const std::string& s) {
  if (s == "standard") return ObjectiveKind::standard;
  if (s == "pgd_at") return ObjectiveKind::pgd_at;
  if (s == "trades") return ObjectiveKind::trades;
  if (s == "mart") return ObjectiveKind::mart;
  if (s == "gairat") return ObjectiveKind::gairat;
  throw ValidationError("unknown objective kind: " + s);
}

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::pgd_at;
  double lambda = 6.0;        // divergence weight for trades/mart
  double gairat_lambda = 0.0; // tanh shift in the kappa weighting
  AttackConfig attack;
};

inline void validate(const ObjectiveConfig& cfg, std::size_t class_count) {
  if (cfg.lambda < 0.0) throw ValidationError("objective config: lambda must be nonnegative");
  if (cfg.kind != ObjectiveKind::standard) validate(cfg.attack, class_count);
}

struct ObjectiveResult {
  double loss = 0.0;
  Gradients grads;
  std::vector<std::size_t> kappas;
  std::size_t adv_correct = 0;  // argmax of the attacked branch still correct
};

// Buffers reused across batches by the training loop.
struct ObjectiveScratch {
  Trace tr_clean;
  Trace tr_adv;
  Mat probs_clean;
  Mat probs_adv;
  Mat dlog_clean;
  Mat dlog_adv;
  Mat x_adv;
  Mat delta;
  Mat iterate;
  Mat grad_in;
  Gradients grads_branch;
  AttackScratch atk;
  std::vector<double> row_metric;
  std::vector<double> weights;
};

inline double gairat_raw_weight(std::size_t kappa, std::size_t iterations,
                                double gairat_lambda) {
  if (iterations == 0) throw std::invalid_argument("gairat_weights: iterations must be positive");
  if (kappa > iterations)
    throw std::invalid_argument("gairat_weights: kappa exceeds the iteration count");
  const double frac = static_cast<double>(kappa) / static_cast<double>(iterations);
  return 0.5 * (1.0 + std::tanh(gairat_lambda + 5.0 * (1.0 - 2.0 * frac)));
}

// Raw weight (1 + tanh(lambda + 5*(1 - 2*kappa/K)))/2 per example, then
// divided by the batch mean so the weights average to exactly 1.
inline std::vector<double> gairat_weights(const std::vector<std::size_t>& kappas,
                                          std::size_t iterations, double gairat_lambda) {
  if (kappas.empty()) throw std::invalid_argument("gairat_weights: empty batch");
  std::vector<double> w(kappas.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    w[i] = gairat_raw_weight(kappas[i], iterations, gairat_lambda);
    sum += w[i];
  }
  const double mean = sum / static_cast<double>(kappas.size());
  for (double& v : w) v /= mean;
  return w;
}

namespace detail {

inline void forward_probs(const Network& net, const Mat& x, Trace& tr, Mat& probs) {
  forward(net, x, tr);
  softmax(tr.pre.back(), probs);
}

}  // namespace detail

// Mean cross-entropy on the given inputs; the workhorse for standard
// training and, applied to adversarial inputs, for PGD-AT.
inline void cross_entropy_loss(const Network& net, const Mat& x,
                               const std::vector<std::size_t>& y, ObjectiveResult& out,
                               ObjectiveScratch& s) {
  if (x.rows != y.size())
    throw std::invalid_argument("objective: batch and label counts differ");
  if (x.rows == 0) throw std::invalid_argument("objective: empty batch");
  const std::size_t n = x.rows;
  const std::size_t classes = net.class_count();
  detail::forward_probs(net, x, s.tr_adv, s.probs_adv);
  s.dlog_adv.resize(n, classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  out.adv_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* q = s.probs_adv.row(i);
    double* dl = s.dlog_adv.row(i);
    loss += cross_entropy(q, classes, y[i]);
    if (argmax_index(q, classes) == y[i]) ++out.adv_correct;
    for (std::size_t c = 0; c < classes; ++c) dl[c] = q[c] * inv_n;
    dl[y[i]] -= inv_n;
  }
  out.loss = loss * inv_n;
  backward(net, x, s.tr_adv, s.dlog_adv, out.grads);
}

inline void standard_loss(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                          ObjectiveResult& out, ObjectiveScratch& s) {
  cross_entropy_loss(net, x, y, out, s);
  out.kappas.clear();
}

inline ObjectiveResult standard_loss(const Network& net, const Mat& x,
                                     const std::vector<std::size_t>& y) {
  ObjectiveResult out;
  ObjectiveScratch s;
  standard_loss(net, x, y, out, s);
  return out;
}

// PGD-AT with the perturbations already chosen.
inline void pgd_at_loss_frozen(const Network& net, const Mat& x_adv,
                               const std::vector<std::size_t>& y, ObjectiveResult& out,
                               ObjectiveScratch& s) {
  cross_entropy_loss(net, x_adv, y, out, s);
}

inline void run_inner_pgd(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                          const AttackConfig& attack, ObjectiveScratch& s,
                          std::vector<std::size_t>& kappas) {
  const std::size_t n = x.rows;
  s.x_adv.resize(n, x.cols);
  kappas.resize(n);
  AttackConfig sub = attack;
  for (std::size_t i = 0; i < n; ++i) {
    sub.seed = derive_seed(attack.seed, 0x6f626a78ULL, i);
    const AttackOutcome oc = pgd(net, x.row(i), y[i], sub, s.atk);
    std::copy(oc.adv.begin(), oc.adv.end(), s.x_adv.row(i));
    kappas[i] = oc.kappa;
  }
}

inline void pgd_at_loss(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                        const ObjectiveConfig& cfg, ObjectiveResult& out, ObjectiveScratch& s) {
  run_inner_pgd(net, x, y, cfg.attack, s, out.kappas);
  pgd_at_loss_frozen(net, s.x_adv, y, out, s);
}

inline ObjectiveResult pgd_at_loss(const Network& net, const Mat& x,
                                   const std::vector<std::size_t>& y,
                                   const ObjectiveConfig& cfg) {
  ObjectiveResult out;
  ObjectiveScratch s;
  pgd_at_loss(net, x, y, cfg, out, s);
  return out;
}

// Clean cross-entropy plus lambda times the soft cross-entropy between the
// clean and adversarial predictive distributions; gradients flow through
// both branches.
inline void trades_loss_frozen(const Network& net, const Mat& x, const Mat& x_adv,
                               const std::vector<std::size_t>& y, double lambda,
                               ObjectiveResult& out, ObjectiveScratch& s) {
  if (x.rows != y.size() || x_adv.rows != y.size())
    throw std::invalid_argument("objective: batch and label counts differ");
  if (x.rows == 0) throw std::invalid_argument("objective: empty batch");
  const std::size_t n = x.rows;
  const std::size_t classes = net.class_count();
  detail::forward_probs(net, x, s.tr_clean, s.probs_clean);
  detail::forward_probs(net, x_adv, s.tr_adv, s.probs_adv);
  s.dlog_clean.resize(n, classes);
  s.dlog_adv.resize(n, classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  out.adv_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = s.probs_clean.row(i);
    const double* q = s.probs_adv.row(i);
    double* dc = s.dlog_clean.row(i);
    double* da = s.dlog_adv.row(i);
    const double sce = soft_cross_entropy(p, q, classes);
    if (argmax_index(q, classes) == y[i]) ++out.adv_correct;
    loss += cross_entropy(p, classes, y[i]) + lambda * sce;
    for (std::size_t c = 0; c < classes; ++c) {
      dc[c] = (p[c] + lambda * p[c] * (-sce - safe_log(q[c]))) * inv_n;
      da[c] = lambda * (q[c] - p[c]) * inv_n;
    }
    dc[y[i]] -= inv_n;
  }
  out.loss = loss * inv_n;
  backward(net, x, s.tr_clean, s.dlog_clean, out.grads);
  backward(net, x_adv, s.tr_adv, s.dlog_adv, s.grads_branch);
  add_scaled(out.grads, s.grads_branch, 1.0);
}

// Inner maximization of the divergence term: projected ascent on
// soft_cross_entropy(f(x), f(x + delta)) with best-iterate selection,
// stepped for the whole batch at once.
inline void trades_inner_attack(const Network& net, const Mat& x,
                                const AttackConfig& attack, ObjectiveScratch& s) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const std::size_t classes = net.class_count();
  detail::forward_probs(net, x, s.tr_clean, s.probs_clean);
  s.delta.resize(n, d);
  s.delta.fill(0.0);
  Mat& iterate = s.iterate;
  iterate.resize(n, d);
  if (attack.random_start && attack.epsilon > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(attack.seed, 0x74726473ULL, i));
      for (std::size_t j = 0; j < d; ++j)
        s.delta.row(i)[j] = rng.uniform(-attack.epsilon, attack.epsilon);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      iterate.row(i)[j] = std::clamp(x.row(i)[j] + s.delta.row(i)[j], 0.0, 1.0);

  s.x_adv = iterate;
  s.row_metric.assign(n, -1e300);
  auto consider = [&]() {
    detail::forward_probs(net, iterate, s.tr_adv, s.probs_adv);
    for (std::size_t i = 0; i < n; ++i) {
      const double sce =
          soft_cross_entropy(s.probs_clean.row(i), s.probs_adv.row(i), classes);
      if (sce > s.row_metric[i]) {
        s.row_metric[i] = sce;
        std::copy(iterate.row(i), iterate.row(i) + d, s.x_adv.row(i));
      }
    }
  };
  consider();
  s.dlog_adv.resize(n, classes);
  for (std::size_t k = 0; k < attack.iterations; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = s.probs_clean.row(i);
      const double* q = s.probs_adv.row(i);
      double* dl = s.dlog_adv.row(i);
      for (std::size_t c = 0; c < classes; ++c) dl[c] = q[c] - p[c];
    }
    backward_input_only(net, s.tr_adv, s.dlog_adv, s.grad_in);
    for (std::size_t i = 0; i < n; ++i) {
      double* dr = s.delta.row(i);
      const double* g = s.grad_in.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        dr[j] = std::clamp(dr[j] + attack.step_size * sign_of(g[j]), -attack.epsilon,
                           attack.epsilon);
        iterate.row(i)[j] = std::clamp(x.row(i)[j] + dr[j], 0.0, 1.0);
      }
    }
    consider();
  }
}

inline void trades_loss(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                        const ObjectiveConfig& cfg, ObjectiveResult& out, ObjectiveScratch& s) {
  trades_inner_attack(net, x, cfg.attack, s);
  trades_loss_frozen(net, x, s.x_adv, y, cfg.lambda, out, s);
  out.kappas.clear();
}

inline ObjectiveResult trades_loss(const Network& net, const Mat& x,
                                   const std::vector<std::size_t>& y,
                                   const ObjectiveConfig& cfg) {
  ObjectiveResult out;
  ObjectiveScratch s;
  trades_loss(net, x, y, cfg, out, s);
  return out;
}

// Adversarial cross-entropy plus lambda times the divergence term damped by
// (1 - f_y(x)) on the clean input.
inline void mart_loss_frozen(const Network& net, const Mat& x, const Mat& x_adv,
                             const std::vector<std::size_t>& y, double lambda,
                             ObjectiveResult& out, ObjectiveScratch& s) {
  if (x.rows != y.size() || x_adv.rows != y.size())
    throw std::invalid_argument("objective: batch and label counts differ");
  if (x.rows == 0) throw std::invalid_argument("objective: empty batch");
  const std::size_t n = x.rows;
  const std::size_t classes = net.class_count();
  detail::forward_probs(net, x, s.tr_clean, s.probs_clean);
  detail::forward_probs(net, x_adv, s.tr_adv, s.probs_adv);
  s.dlog_clean.resize(n, classes);
  s.dlog_adv.resize(n, classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  out.adv_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = s.probs_clean.row(i);
    const double* q = s.probs_adv.row(i);
    double* dc = s.dlog_clean.row(i);
    double* da = s.dlog_adv.row(i);
    const double sce = soft_cross_entropy(p, q, classes);
    if (argmax_index(q, classes) == y[i]) ++out.adv_correct;
    const double py = p[y[i]];
    loss += cross_entropy(q, classes, y[i]) + lambda * sce * (1.0 - py);
    for (std::size_t c = 0; c < classes; ++c) {
      da[c] = (q[c] + lambda * (1.0 - py) * (q[c] - p[c])) * inv_n;
      const double dsce = p[c] * (-sce - safe_log(q[c]));
      const double dpy = py * ((c == y[i] ? 1.0 : 0.0) - p[c]);
      dc[c] = lambda * ((1.0 - py) * dsce - sce * dpy) * inv_n;
    }
    da[y[i]] -= inv_n;
  }
  out.loss = loss * inv_n;
  backward(net, x_adv, s.tr_adv, s.dlog_adv, out.grads);
  backward(net, x, s.tr_clean, s.dlog_clean, s.grads_branch);
  add_scaled(out.grads, s.grads_branch, 1.0);
}

inline void mart_loss(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                      const ObjectiveConfig& cfg, ObjectiveResult& out, ObjectiveScratch& s) {
  run_inner_pgd(net, x, y, cfg.attack, s, out.kappas);
  mart_loss_frozen(net, x, s.x_adv, y, cfg.lambda, out, s);
}

inline ObjectiveResult mart_loss(const Network& net, const Mat& x,
                                 const std::vector<std::size_t>& y,
                                 const ObjectiveConfig& cfg) {
  ObjectiveResult out;
  ObjectiveScratch s;
  mart_loss(net, x, y, cfg, out, s);
  return out;
}

// Per-example adversarial cross-entropy scaled by the supplied weights.
inline void gairat_loss_frozen(const Network& net, const Mat& x_adv,
                               const std::vector<std::size_t>& y,
                               const std::vector<double>& weights, ObjectiveResult& out,
                               ObjectiveScratch& s) {
  if (x_adv.rows != y.size() || weights.size() != y.size())
    throw std::invalid_argument("objective: batch, label, and weight counts differ");
  if (x_adv.rows == 0) throw std::invalid_argument("objective: empty batch");
  const std::size_t n = x_adv.rows;
  const std::size_t classes = net.class_count();
  detail::forward_probs(net, x_adv, s.tr_adv, s.probs_adv);
  s.dlog_adv.resize(n, classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  out.adv_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* q = s.probs_adv.row(i);
    double* dl = s.dlog_adv.row(i);
    if (argmax_index(q, classes) == y[i]) ++out.adv_correct;
    loss += weights[i] * cross_entropy(q, classes, y[i]);
    const double scale = weights[i] * inv_n;
    for (std::size_t c = 0; c < classes; ++c) dl[c] = q[c] * scale;
    dl[y[i]] -= scale;
  }
  out.loss = loss * inv_n;
  backward(net, x_adv, s.tr_adv, s.dlog_adv, out.grads);
}

inline void gairat_loss(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                        const ObjectiveConfig& cfg, ObjectiveResult& out, ObjectiveScratch& s) {
  run_inner_pgd(net, x, y, cfg.attack, s, out.kappas);
  s.weights = gairat_weights(out.kappas, cfg.attack.iterations, cfg.gairat_lambda);
  gairat_loss_frozen(net, s.x_adv, y, s.weights, out, s);
}

inline ObjectiveResult gairat_loss(const Network& net, const Mat& x,
                                   const std::vector<std::size_t>& y,
                                   const ObjectiveConfig& cfg) {
  ObjectiveResult out;
  ObjectiveScratch s;
  gairat_loss(net, x, y, cfg, out, s);
  return out;
}

inline void objective_loss(const Network& net, const Mat& x, const std::vector<std::size_t>& y,
                           const ObjectiveConfig& cfg, ObjectiveResult& out,
                           ObjectiveScratch& s) {
  switch (cfg.kind) {
    case ObjectiveKind::standard: standard_loss(net, x, y, out, s); return;
    case ObjectiveKind::pgd_at: pgd_at_loss(net, x, y, cfg, out, s); return;
    case ObjectiveKind::trades: trades_loss(net, x, y, cfg, out, s); return;
    case ObjectiveKind::mart: mart_loss(net, x, y, cfg, out, s); return;
    case ObjectiveKind::gairat: gairat_loss(net, x, y, cfg, out, s); return;
  }
  throw std::invalid_argument("unknown objective kind");
}

}  // namespace advlab
