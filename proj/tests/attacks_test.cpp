#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "advlab/attacks.hpp"
#include "test_util.hpp"

using namespace advlab;
using namespace advlab::testutil;

namespace {

double ce_of(const Network& net, const std::vector<double>& x, std::size_t y) {
  AttackScratch s;
  s.x_row.resize(1, net.input_dim());
  std::copy(x.begin(), x.end(), s.x_row.row(0));
  forward(net, s.x_row, s.tr);
  std::vector<double> probs(net.class_count());
  softmax_row(s.tr.pre.back().row(0), net.class_count(), probs.data());
  return cross_entropy(probs, y);
}

double margin_at(const Network& net, const std::vector<double>& x, std::size_t y) {
  AttackScratch s;
  s.x_row.resize(1, net.input_dim());
  std::copy(x.begin(), x.end(), s.x_row.row(0));
  forward(net, s.x_row, s.tr);
  return margin_of(s.tr.pre.back().row(0), net.class_count(), y);
}

std::size_t predict_vec(const Network& net, const std::vector<double>& x) {
  AttackScratch s;
  return predict(net, x.data(), s);
}

Network linear_net(const std::vector<double>& w0, const std::vector<double>& w1) {
  DenseLayer layer;
  layer.w.resize(2, w0.size());
  std::copy(w0.begin(), w0.end(), layer.w.row(0));
  std::copy(w1.begin(), w1.end(), layer.w.row(1));
  layer.b.assign(2, 0.0);
  std::vector<DenseLayer> layers;
  layers.push_back(std::move(layer));
  return Network(w0.size(), std::move(layers));
}

}  // namespace

TEST(AttackConfigValidate, RejectsEachBadField) {
  AttackConfig ok;
  EXPECT_NO_THROW(validate(ok, 3));
  AttackConfig c = ok;
  c.epsilon = 0.0;
  EXPECT_THROW(validate(c, 3), ValidationError);
  c = ok;
  c.epsilon = 1.5;
  EXPECT_THROW(validate(c, 3), ValidationError);
  c = ok;
  c.step_size = 0.0;
  EXPECT_THROW(validate(c, 3), ValidationError);
  c = ok;
  c.step_size = 3.0 * c.epsilon;
  EXPECT_THROW(validate(c, 3), ValidationError);
  c = ok;
  c.iterations = 0;
  EXPECT_THROW(validate(c, 3), ValidationError);
  c = ok;
  c.restarts = 0;
  EXPECT_THROW(validate(c, 3), ValidationError);
  c = ok;
  c.target_class = 3;
  EXPECT_THROW(validate(c, 3), ValidationError);
  c.target_class = 2;
  EXPECT_NO_THROW(validate(c, 3));
}

TEST(Pgd, RejectsOutOfRangeLabels) {
  const Network net = make_mlp(4, {6}, 3, 1);
  const std::vector<double> x(4, 0.5);
  AttackConfig cfg;
  EXPECT_THROW(pgd(net, x, 3, cfg), std::invalid_argument);
  cfg.target_class = 7;
  EXPECT_THROW(pgd(net, x, 0, cfg), std::invalid_argument);
}

TEST(Fgsm, IsBitwiseIdenticalToSingleStepFullEpsilonPgd) {
  Rng rng(101);
  for (int trial = 0; trial < 30; ++trial) {
    const Network net = random_net(rng, 6, {8}, 3);
    std::vector<double> x(6);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t y = rng.below(3);
    const double eps = rng.uniform(0.01, 0.3);

    AttackConfig cfg;
    cfg.epsilon = eps;
    cfg.step_size = eps;
    cfg.iterations = 1;
    cfg.restarts = 1;
    cfg.random_start = false;

    const AttackOutcome a = fgsm(net, x, y, eps);
    const AttackOutcome b = pgd(net, x, y, cfg);
    ASSERT_EQ(a.adv.size(), b.adv.size());
    for (std::size_t j = 0; j < a.adv.size(); ++j)
      EXPECT_EQ(a.adv[j], b.adv[j]) << "trial " << trial << " coord " << j;
    EXPECT_EQ(a.success, b.success) << "trial " << trial;
    EXPECT_EQ(a.kappa, b.kappa) << "trial " << trial;
  }
}

TEST(Pgd, StaysInsideTheBallAndTheUnitBox) {
  Rng rng(202);
  for (int trial = 0; trial < 60; ++trial) {
    const Network net = random_net(rng, 5, {7}, 3);
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t y = rng.below(3);

    AttackConfig cfg;
    cfg.epsilon = rng.uniform(1.0 / 255.0, 0.3);
    cfg.step_size = rng.uniform(0.2, 2.0) * cfg.epsilon;
    cfg.iterations = 1 + rng.below(12);
    cfg.restarts = 1 + rng.below(3);
    cfg.random_start = rng.uniform() < 0.5;
    cfg.seed = rng.next_u64();

    for (const AttackOutcome& oc :
         {pgd(net, x, y, cfg), pgd_multi_restart(net, x, y, cfg),
          square_patch_attack(net, x, y, cfg.epsilon, 40, cfg.seed)}) {
      ASSERT_EQ(oc.adv.size(), x.size());
      for (std::size_t j = 0; j < x.size(); ++j) {
        EXPECT_LE(std::fabs(oc.adv[j] - x[j]), cfg.epsilon + 1e-9);
        EXPECT_GE(oc.adv[j], 0.0);
        EXPECT_LE(oc.adv[j], 1.0);
      }
    }
  }
}

TEST(Pgd, NeverReturnsAWorseIterateThanTheCleanInput) {
  Rng rng(303);
  for (int trial = 0; trial < 40; ++trial) {
    const Network net = random_net(rng, 5, {6}, 3);
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t y = rng.below(3);
    AttackConfig cfg;
    cfg.epsilon = 0.1;
    cfg.step_size = 0.025;
    cfg.iterations = 7;
    cfg.random_start = trial % 2 == 0;
    cfg.seed = rng.next_u64();
    const AttackOutcome oc = pgd(net, x, y, cfg);
    EXPECT_GE(ce_of(net, oc.adv, y), ce_of(net, x, y) - 1e-15);
    EXPECT_EQ(oc.success, predict_vec(net, oc.adv) != y);
  }
}

TEST(Pgd, KappaIsZeroExactlyWhenTheCleanInputIsMisclassified) {
  Rng rng(404);
  AttackConfig cfg;
  cfg.epsilon = 0.08;
  cfg.step_size = 0.02;
  cfg.iterations = 6;
  cfg.seed = 9;
  int clean_wrong = 0, clean_right = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Network net = random_net(rng, 5, {6}, 3);
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t pred = predict_vec(net, x);
    {
      const std::size_t wrong_label = (pred + 1) % 3;
      const AttackOutcome oc = pgd(net, x, wrong_label, cfg);
      EXPECT_EQ(oc.kappa, 0u);
      EXPECT_TRUE(oc.success);
      ++clean_wrong;
    }
    {
      const AttackOutcome oc = pgd(net, x, pred, cfg);
      EXPECT_GE(oc.kappa, 1u);
      EXPECT_LE(oc.kappa, cfg.iterations);
      ++clean_right;
    }
  }
  EXPECT_EQ(clean_wrong, 40);
  EXPECT_EQ(clean_right, 40);
}

TEST(Pgd, ZeroRadiusOnACorrectExampleReturnsItUntouched) {
  Rng rng(505);
  const Network net = random_net(rng, 4, {5}, 2);
  std::vector<double> x(4);
  for (double& v : x) v = rng.uniform(0.2, 0.8);
  const std::size_t y = predict_vec(net, x);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  cfg.step_size = 0.01;
  cfg.iterations = 5;
  cfg.random_start = true;
  const AttackOutcome oc = pgd(net, x, y, cfg);
  EXPECT_FALSE(oc.success);
  EXPECT_EQ(oc.kappa, cfg.iterations);
  EXPECT_EQ(oc.adv, x);
}

TEST(Pgd, RandomStartIsSeedDeterministic) {
  Rng rng(606);
  const Network net = random_net(rng, 6, {8}, 3);
  std::vector<double> x(6);
  for (double& v : x) v = rng.uniform(0.0, 1.0);
  const std::size_t y = predict_vec(net, x);
  AttackConfig cfg;
  cfg.epsilon = 0.15;
  cfg.step_size = 0.04;
  cfg.iterations = 5;
  cfg.seed = 77;
  const AttackOutcome a = pgd(net, x, y, cfg);
  const AttackOutcome b = pgd(net, x, y, cfg);
  EXPECT_EQ(a.adv, b.adv);
  cfg.seed = 78;
  const AttackOutcome c = pgd(net, x, y, cfg);
  EXPECT_NE(a.adv, c.adv);
}

TEST(Pgd, TargetedModeCountsSuccessOnlyOnTheTarget) {
  Rng rng(707);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = random_net(rng, 5, {8}, 3);
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t pred = predict_vec(net, x);
    AttackConfig cfg;
    cfg.epsilon = 0.3;
    cfg.step_size = 0.08;
    cfg.iterations = 10;
    cfg.seed = rng.next_u64();

    cfg.target_class = (pred + 1) % 3;
    const AttackOutcome oc = pgd(net, x, pred, cfg);
    if (oc.success) EXPECT_EQ(predict_vec(net, oc.adv), *cfg.target_class);

    // Hitting the target on the clean input means kappa 0.
    cfg.target_class = pred;
    EXPECT_EQ(pgd(net, x, (pred + 1) % 3, cfg).kappa, 0u);
  }
}

TEST(MultiRestart, SingleRestartIsPlainPgd) {
  Rng rng(808);
  const Network net = random_net(rng, 6, {7}, 3);
  std::vector<double> x(6);
  for (double& v : x) v = rng.uniform(0.0, 1.0);
  const std::size_t y = predict_vec(net, x);
  AttackConfig cfg;
  cfg.epsilon = 0.12;
  cfg.step_size = 0.03;
  cfg.iterations = 8;
  cfg.restarts = 1;
  cfg.seed = 13;
  const AttackOutcome a = pgd(net, x, y, cfg);
  const AttackOutcome b = pgd_multi_restart(net, x, y, cfg);
  EXPECT_EQ(a.adv, b.adv);
  EXPECT_EQ(a.success, b.success);
  EXPECT_EQ(a.kappa, b.kappa);
}

TEST(MultiRestart, NeverLosesASuccessTheFirstRestartFound) {
  Rng rng(909);
  int successes = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Network net = random_net(rng, 5, {6}, 3);
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t y = predict_vec(net, x);
    AttackConfig cfg;
    cfg.epsilon = 0.25;
    cfg.step_size = 0.06;
    cfg.iterations = 8;
    cfg.seed = rng.next_u64();
    cfg.restarts = 1;
    const bool single = pgd(net, x, y, cfg).success;
    cfg.restarts = 4;
    const bool multi = pgd_multi_restart(net, x, y, cfg).success;
    if (single) {
      EXPECT_TRUE(multi) << "trial " << trial;
      ++successes;
    }
  }
  EXPECT_GT(successes, 0);
}

TEST(MinPerturbation, MatchesTheLinearModelOracle) {
  Rng rng(111);
  const double step = 1.0 / 255.0;
  int checked = 0;
  while (checked < 10) {
    std::vector<double> w0(6), w1(6), x(6);
    for (std::size_t j = 0; j < 6; ++j) {
      w0[j] = rng.uniform(-1.0, 1.0);
      w1[j] = rng.uniform(-1.0, 1.0);
      x[j] = rng.uniform(0.35, 0.65);
    }
    const Network net = linear_net(w0, w1);
    const std::size_t y = predict_vec(net, x);
    const double margin = margin_at(net, x, y);
    double l1 = 0.0;
    for (std::size_t j = 0; j < 6; ++j) l1 += std::fabs(w0[j] - w1[j]);
    if (margin < 1e-4 || margin / l1 > 0.2) continue;

    const MinPerturbation mp = min_perturbation(net, x, y, step, 0.25);
    ASSERT_TRUE(mp.found);
    EXPECT_LE(std::fabs(mp.epsilon_star - margin / l1), step + 1e-12)
        << "margin " << margin << " l1 " << l1;
    ++checked;
  }
}

TEST(MinPerturbation, HandlesEdgesAndRejectsBadArguments) {
  Rng rng(222);
  const Network net = random_net(rng, 4, {5}, 2);
  std::vector<double> x(4, 0.5);
  const std::size_t pred = predict_vec(net, x);

  const MinPerturbation wrong = min_perturbation(net, x, 1 - pred, 1.0 / 255.0, 0.25);
  EXPECT_TRUE(wrong.found);
  EXPECT_DOUBLE_EQ(wrong.epsilon_star, 0.0);

  const MinPerturbation capped = min_perturbation(net, x, pred, 1.0 / 255.0, 1.0 / 255.0 / 2.0);
  EXPECT_FALSE(capped.found);
  EXPECT_DOUBLE_EQ(capped.epsilon_star, 1.0 / 255.0 / 2.0);

  AttackScratch s;
  EXPECT_THROW(min_perturbation(net, x.data(), pred, 0.0, 0.25, s), std::invalid_argument);
  EXPECT_THROW(min_perturbation(net, x.data(), pred, 0.01, 1.5, s), std::invalid_argument);
}

TEST(SquarePatch, NeverIncreasesTheMarginAndReportsFirstSuccessQueries) {
  Rng rng(333);
  int successes = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Network net = random_net(rng, 5, {6}, 3);
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t y = predict_vec(net, x);
    const std::size_t budget = 60;
    const AttackOutcome oc = square_patch_attack(net, x, y, 0.2, budget, rng.next_u64());
    EXPECT_LE(margin_at(net, oc.adv, y), margin_at(net, x, y) + 1e-15);
    if (oc.success) {
      EXPECT_NE(predict_vec(net, oc.adv), y);
      EXPECT_GE(oc.kappa, 1u);
      EXPECT_LE(oc.kappa, budget);
      ++successes;
    } else {
      EXPECT_EQ(oc.kappa, budget);
    }
  }
  EXPECT_GT(successes, 0);
}

TEST(SquarePatch, HandlesMisclassifiedInputAndBadArguments) {
  Rng rng(444);
  const Network net = random_net(rng, 4, {5}, 3);
  std::vector<double> x(4);
  for (double& v : x) v = rng.uniform(0.0, 1.0);
  const std::size_t pred = predict_vec(net, x);

  const AttackOutcome oc = square_patch_attack(net, x, (pred + 1) % 3, 0.1, 50, 1);
  EXPECT_TRUE(oc.success);
  EXPECT_EQ(oc.kappa, 0u);
  EXPECT_EQ(oc.adv, x);

  const AttackOutcome a = square_patch_attack(net, x, pred, 0.1, 50, 7);
  const AttackOutcome b = square_patch_attack(net, x, pred, 0.1, 50, 7);
  EXPECT_EQ(a.adv, b.adv);
  EXPECT_EQ(a.kappa, b.kappa);

  EXPECT_THROW(square_patch_attack(net, x, 5, 0.1, 50, 1), std::invalid_argument);
  EXPECT_THROW(square_patch_attack(net, x, pred, 0.1, 0, 1), std::invalid_argument);
}

TEST(TransferAttack, JudgesOnTheTargetAndKeepsTheKappaContract) {
  Rng rng(555);
  const Network surrogate = random_net(rng, 5, {7}, 3);
  AttackConfig cfg;
  cfg.epsilon = 0.2;
  cfg.step_size = 0.05;
  cfg.iterations = 8;
  cfg.restarts = 2;
  cfg.seed = 3;

  for (int trial = 0; trial < 20; ++trial) {
    const Network target = random_net(rng, 5, {7}, 3);
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const std::size_t y = rng.below(3);
    const AttackOutcome oc = transfer_attack(surrogate, target, x, y, cfg);
    EXPECT_EQ(oc.success, predict_vec(target, oc.adv) != y);
    if (predict_vec(target, x) != y) {
      EXPECT_EQ(oc.kappa, 0u);
    } else {
      EXPECT_GE(oc.kappa, 1u);
    }
  }

  const Network narrow = random_net(rng, 4, {7}, 3);
  const std::vector<double> x(5, 0.5);
  EXPECT_THROW(transfer_attack(surrogate, narrow, x, 0, cfg), std::invalid_argument);
}
