// Targeted fine-tuning demo: adversarially fine-tune a standard-trained
// model with a PGD attack aimed at one class c (examples of class c itself
// are redirected to a second class), then compare per-class test accuracy.
// The targeted class degrades far more than the rest; repeating the
// fine-tune on the low-ambiguity half of the data weakens the effect.

#include <cstdio>
#include <numeric>
#include <vector>

#include "advlab/advlab.hpp"

using namespace advlab;

namespace {

std::vector<double> per_class_accuracy(const Network& net, const Dataset& ds) {
  Mat x;
  std::vector<std::size_t> y;
  pack(ds, x, y);
  Trace tr;
  forward(net, x, tr);
  const Mat& logits = tr.pre.back();
  std::vector<double> hits(ds.classes, 0.0), totals(ds.classes, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    totals[y[i]] += 1.0;
    hits[y[i]] += argmax_index(logits.row(i), ds.classes) == y[i] ? 1.0 : 0.0;
  }
  for (std::size_t c = 0; c < ds.classes; ++c)
    hits[c] = totals[c] > 0.0 ? hits[c] / totals[c] : 0.0;
  return hits;
}

Network finetune_targeted(Network net, const Dataset& train, std::size_t target,
                          std::size_t redirect, const AttackConfig& attack,
                          const TrainConfig& cfg, std::uint64_t seed) {
  Mat X, Xb;
  std::vector<std::size_t> Y, Yb;
  pack(train, X, Y);
  SgdState sgd;
  sgd.init_like(net);
  ObjectiveScratch os;
  ObjectiveResult obj;
  AttackScratch atk;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Rng shuffle_rng(derive_seed(seed, 0x66747368ULL, e));
    shuffle_rng.shuffle(order);
    for (std::size_t off = 0, b = 0; off < order.size(); off += cfg.batch_size, ++b) {
      const std::size_t nb = std::min(cfg.batch_size, order.size() - off);
      Xb.resize(nb, train.dim);
      Yb.resize(nb);
      AttackConfig sub = attack;
      for (std::size_t r = 0; r < nb; ++r) {
        const std::size_t src = order[off + r];
        Yb[r] = Y[src];
        sub.target_class = Yb[r] == target ? redirect : target;
        sub.seed = derive_seed(seed, 0x66746174ULL, e, b * cfg.batch_size + r);
        const AttackOutcome oc = pgd(net, X.row(src), Yb[r], sub, atk);
        std::copy(oc.adv.begin(), oc.adv.end(), Xb.row(r));
      }
      cross_entropy_loss(net, Xb, Yb, obj, os);
      sgd_step(net, obj.grads, sgd, e, cfg);
    }
  }
  return net;
}

void print_row(const char* name, const std::vector<double>& acc) {
  std::printf("%-28s", name);
  for (double a : acc) std::printf("  %6.3f", a);
  std::printf("\n");
}

}  // namespace

int main() {
  SyntheticSpec spec;
  spec.n_per_class = 200;
  spec.seed = 7;
  const auto [full, ambiguity] = generate_synthetic(spec);
  const auto split = stratified_split(full, 0.25, spec.seed);
  const Dataset& train = split.first;
  const Dataset& test = split.second;

  ModelSpec model;
  model.hidden = {32, 32};
  TrainConfig base;
  base.epochs = 20;
  base.lr_decay_epochs = {};
  ObjectiveConfig standard;
  standard.kind = ObjectiveKind::standard;
  AttackConfig eval_attack;
  eval_attack.epsilon = 0.1;
  eval_attack.step_size = 0.025;
  TrainOptions opt;
  opt.profile_train = false;
  opt.eval_robust_test = false;

  std::printf("training the base model (%zu examples, %zu epochs)\n", train.size(),
              base.epochs);
  const RunResult base_run =
      train_run(train, test, model, base, standard, eval_attack, spec.seed, opt);

  const std::size_t target = 0;
  const std::size_t redirect = 1;
  AttackConfig ft_attack;
  ft_attack.epsilon = 0.1;
  ft_attack.step_size = 0.025;
  ft_attack.iterations = 7;
  TrainConfig ft = base;
  ft.epochs = 10;
  ft.base_lr = 0.01;

  std::printf("fine-tuning with the attack aimed at class %zu\n", target);
  const Network tuned =
      finetune_targeted(base_run.last_net, train, target, redirect, ft_attack, ft, spec.seed);

  std::vector<long long> ids = ids_of(train);
  std::vector<double> quality(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    quality[i] = -ambiguity[static_cast<std::size_t>(train.examples[i].id)];
  const QualityRanking ranking = quality_rank(ids, quality, QualityMeasure::stability);
  const Dataset high_half = class_balanced_halves(train, ranking).first;

  std::printf("fine-tuning again on the %zu lowest-ambiguity examples\n", high_half.size());
  const Network tuned_high = finetune_targeted(base_run.last_net, high_half, target, redirect,
                                               ft_attack, ft, spec.seed);

  std::printf("\nper-class clean test accuracy\n%-28s", "");
  for (std::size_t c = 0; c < test.classes; ++c) std::printf(" class%zu", c);
  std::printf("\n");
  print_row("standard training", per_class_accuracy(base_run.last_net, test));
  print_row("targeted fine-tune", per_class_accuracy(tuned, test));
  print_row("targeted fine-tune (high-q)", per_class_accuracy(tuned_high, test));
  std::printf("\nthe attacked class (%zu) should lose the most accuracy, and the\n"
              "high-quality fine-tune should blunt that loss.\n",
              target);
  return 0;
}
