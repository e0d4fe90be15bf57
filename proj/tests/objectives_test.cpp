#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "advlab/objectives.hpp"
#include "test_util.hpp"

using namespace advlab;
using namespace advlab::testutil;

namespace {

void expect_grads_close(const Gradients& a, const Gradients& b, double tol) {
  ASSERT_EQ(a.dw.size(), b.dw.size());
  for (std::size_t l = 0; l < a.dw.size(); ++l) {
    ASSERT_EQ(a.dw[l].size(), b.dw[l].size());
    for (std::size_t i = 0; i < a.dw[l].size(); ++i)
      EXPECT_NEAR(a.dw[l].data[i], b.dw[l].data[i], tol) << "layer " << l << " w " << i;
    ASSERT_EQ(a.db[l].size(), b.db[l].size());
    for (std::size_t i = 0; i < a.db[l].size(); ++i)
      EXPECT_NEAR(a.db[l][i], b.db[l][i], tol) << "layer " << l << " b " << i;
  }
}

void probs_of(const Network& net, const Mat& x, Mat& probs) {
  Trace tr;
  forward(net, x, tr);
  softmax(tr.pre.back(), probs);
}

// The decision boundary sits at feature 0 = 0.5 with a huge slope, so inputs
// away from it saturate the softmax exactly while inputs close to it do not.
Network saturating_net() {
  DenseLayer layer;
  layer.w.resize(2, 2);
  layer.w.at(0, 0) = 2000.0;
  layer.w.at(0, 1) = 0.0;
  layer.w.at(1, 0) = -2000.0;
  layer.w.at(1, 1) = 0.0;
  layer.b = {-1000.0, 1000.0};
  std::vector<DenseLayer> layers;
  layers.push_back(std::move(layer));
  return Network(2, std::move(layers));
}

template <typename LossFn>
void check_param_grads(Network& net, const Gradients& grads, LossFn loss_at,
                       const char* tag) {
  const double h = 1e-6;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (std::size_t i = 0; i < net.layers()[l].w.size(); ++i) {
      const double fd = fd_param(net, l, false, i, h, loss_at);
      EXPECT_TRUE(close_rel(grads.dw[l].data[i], fd, 1e-4))
          << tag << " layer " << l << " w[" << i << "]: " << grads.dw[l].data[i]
          << " vs " << fd;
    }
    for (std::size_t i = 0; i < net.layers()[l].b.size(); ++i) {
      const double fd = fd_param(net, l, true, i, h, loss_at);
      EXPECT_TRUE(close_rel(grads.db[l][i], fd, 1e-4))
          << tag << " layer " << l << " b[" << i << "]: " << grads.db[l][i]
          << " vs " << fd;
    }
  }
}

}  // namespace

TEST(ObjectiveKindStrings, RoundTrip) {
  for (ObjectiveKind k : {ObjectiveKind::standard, ObjectiveKind::pgd_at,
                          ObjectiveKind::trades, ObjectiveKind::mart, ObjectiveKind::gairat})
    EXPECT_EQ(objective_kind_from_string(to_string(k)), k);
  EXPECT_THROW(objective_kind_from_string("adv"), ValidationError);
}

TEST(ObjectiveConfigValidate, ChecksLambdaAndDelegatesAttackChecksUnlessStandard) {
  ObjectiveConfig cfg;
  EXPECT_NO_THROW(validate(cfg, 3));
  cfg.lambda = -1.0;
  EXPECT_THROW(validate(cfg, 3), ValidationError);
  cfg.lambda = 6.0;
  cfg.attack.iterations = 0;
  EXPECT_THROW(validate(cfg, 3), ValidationError);
  cfg.kind = ObjectiveKind::standard;
  EXPECT_NO_THROW(validate(cfg, 3));
}

TEST(StandardLoss, MatchesMeanCrossEntropyAndCountsCorrectPredictions) {
  Rng rng(21);
  Network net = random_net(rng, 4, {6}, 3);
  const Mat x = random_batch(rng, 5, 4);
  const auto y = random_labels(rng, 5, 3);

  const ObjectiveResult out = standard_loss(net, x, y);
  EXPECT_TRUE(out.kappas.empty());

  Mat probs;
  probs_of(net, x, probs);
  double expected = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    expected += cross_entropy(probs.row(i), 3, y[i]);
    if (argmax_index(probs.row(i), 3) == y[i]) ++correct;
  }
  EXPECT_NEAR(out.loss, expected / 5.0, 1e-15);
  EXPECT_EQ(out.adv_correct, correct);

  auto loss_at = [&] { return standard_loss(net, x, y).loss; };
  check_param_grads(net, out.grads, loss_at, "standard");

  Mat empty(0, 4);
  ObjectiveResult sink;
  ObjectiveScratch s;
  EXPECT_THROW(standard_loss(net, empty, {}, sink, s), std::invalid_argument);
  EXPECT_THROW(standard_loss(net, x, {0, 1}, sink, s), std::invalid_argument);
}

TEST(GairatRawWeight, MatchesTheTanhFormulaExactly) {
  EXPECT_EQ(gairat_raw_weight(5, 10, 0.0), 0.5);
  EXPECT_EQ(gairat_raw_weight(2, 4, 0.0), 0.5);
  EXPECT_NEAR(gairat_raw_weight(0, 10, 0.0), 0.9999546021312976, 1e-15);
  EXPECT_NEAR(gairat_raw_weight(10, 10, 0.0), 4.539786870243439e-05, 1e-15);
  // Large lambda saturates every weight to exactly 1.
  for (std::size_t kappa : {std::size_t{0}, std::size_t{3}, std::size_t{10}})
    EXPECT_EQ(gairat_raw_weight(kappa, 10, 50.0), 1.0);

  for (std::size_t kappa = 1; kappa <= 10; ++kappa)
    EXPECT_LE(gairat_raw_weight(kappa, 10, 0.3), gairat_raw_weight(kappa - 1, 10, 0.3));

  EXPECT_THROW(gairat_raw_weight(11, 10, 0.0), std::invalid_argument);
  EXPECT_THROW(gairat_raw_weight(0, 0, 0.0), std::invalid_argument);
}

TEST(GairatWeights, NormalizeToMeanOneAndPreserveOrdering) {
  const std::vector<std::size_t> kappas = {0, 2, 5, 7, 10, 10, 1};
  for (double lambda : {-1.0, 0.0, 0.7}) {
    const auto w = gairat_weights(kappas, 10, lambda);
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    EXPECT_NEAR(mean, 1.0, 1e-12);
    for (std::size_t i = 0; i < kappas.size(); ++i)
      for (std::size_t j = 0; j < kappas.size(); ++j)
        if (kappas[i] < kappas[j]) EXPECT_GE(w[i], w[j]);
  }

  const auto uniform = gairat_weights({4, 4, 4}, 8, 0.25);
  for (double v : uniform) EXPECT_EQ(v, 1.0);

  EXPECT_THROW(gairat_weights({}, 10, 0.0), std::invalid_argument);
  EXPECT_THROW(gairat_weights({11}, 10, 0.0), std::invalid_argument);
}

TEST(TradesLossFrozen, ZeroLambdaEqualsStandardLossOnTheCleanBatch) {
  Rng rng(23);
  Network net = random_net(rng, 5, {7}, 3);
  const Mat x = random_batch(rng, 6, 5);
  const Mat x_adv = random_batch(rng, 6, 5);
  const auto y = random_labels(rng, 6, 3);

  ObjectiveResult trades;
  ObjectiveScratch s;
  trades_loss_frozen(net, x, x_adv, y, 0.0, trades, s);
  const ObjectiveResult standard = standard_loss(net, x, y);

  EXPECT_NEAR(trades.loss, standard.loss, 1e-12);
  expect_grads_close(trades.grads, standard.grads, 1e-12);
}

TEST(TradesLossFrozen, GradientsMatchFiniteDifferencesThroughBothBranches) {
  Rng rng(29);
  Network net = random_net(rng, 4, {5}, 3);
  const Mat x = random_batch(rng, 4, 4);
  const Mat x_adv = random_batch(rng, 4, 4);
  const auto y = random_labels(rng, 4, 3);
  const double lambda = 3.0;

  ObjectiveResult out;
  ObjectiveScratch s;
  trades_loss_frozen(net, x, x_adv, y, lambda, out, s);

  auto loss_at = [&] {
    Mat p, q;
    probs_of(net, x, p);
    probs_of(net, x_adv, q);
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i)
      total += cross_entropy(p.row(i), 3, y[i]) +
               lambda * soft_cross_entropy(p.row(i), q.row(i), 3);
    return total / static_cast<double>(x.rows);
  };
  EXPECT_NEAR(out.loss, loss_at(), 1e-12);
  check_param_grads(net, out.grads, loss_at, "trades");

  ObjectiveResult sink;
  EXPECT_THROW(trades_loss_frozen(net, x, x_adv, {0, 1}, lambda, sink, s),
               std::invalid_argument);
}

TEST(MartLossFrozen, GradientsMatchFiniteDifferences) {
  Rng rng(31);
  Network net = random_net(rng, 4, {6}, 3);
  const Mat x = random_batch(rng, 4, 4);
  const Mat x_adv = random_batch(rng, 4, 4);
  const auto y = random_labels(rng, 4, 3);
  const double lambda = 5.0;

  ObjectiveResult out;
  ObjectiveScratch s;
  mart_loss_frozen(net, x, x_adv, y, lambda, out, s);

  auto loss_at = [&] {
    Mat p, q;
    probs_of(net, x, p);
    probs_of(net, x_adv, q);
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i)
      total += cross_entropy(q.row(i), 3, y[i]) +
               lambda * soft_cross_entropy(p.row(i), q.row(i), 3) *
                   (1.0 - p.row(i)[y[i]]);
    return total / static_cast<double>(x.rows);
  };
  EXPECT_NEAR(out.loss, loss_at(), 1e-12);
  check_param_grads(net, out.grads, loss_at, "mart");
}

TEST(MartLossFrozen, ReducesToPgdAtWhenTheCleanBranchIsSaturated) {
  Network net = saturating_net();
  Mat x(1, 2), x_adv(1, 2);
  x.at(0, 0) = 0.9;
  x.at(0, 1) = 0.5;
  x_adv.at(0, 0) = 0.50001;
  x_adv.at(0, 1) = 0.5;
  const std::vector<std::size_t> y = {0};

  Mat p;
  probs_of(net, x, p);
  ASSERT_EQ(p.at(0, 0), 1.0);

  ObjectiveResult mart, pgdat;
  ObjectiveScratch s1, s2;
  mart_loss_frozen(net, x, x_adv, y, 6.0, mart, s1);
  pgd_at_loss_frozen(net, x_adv, y, pgdat, s2);
  EXPECT_NEAR(mart.loss, pgdat.loss, 1e-12);
  expect_grads_close(mart.grads, pgdat.grads, 1e-12);
}

TEST(MartLossFrozen, ZeroLambdaEqualsPgdAt) {
  Rng rng(37);
  Network net = random_net(rng, 5, {6}, 3);
  const Mat x = random_batch(rng, 5, 5);
  const Mat x_adv = random_batch(rng, 5, 5);
  const auto y = random_labels(rng, 5, 3);

  ObjectiveResult mart, pgdat;
  ObjectiveScratch s1, s2;
  mart_loss_frozen(net, x, x_adv, y, 0.0, mart, s1);
  pgd_at_loss_frozen(net, x_adv, y, pgdat, s2);
  EXPECT_NEAR(mart.loss, pgdat.loss, 1e-12);
  expect_grads_close(mart.grads, pgdat.grads, 1e-12);
}

TEST(GairatLossFrozen, UnitWeightsEqualPgdAtAndGradientsMatchFiniteDifferences) {
  Rng rng(41);
  Network net = random_net(rng, 4, {5}, 3);
  const Mat x_adv = random_batch(rng, 4, 4);
  const auto y = random_labels(rng, 4, 3);

  ObjectiveResult uniform, pgdat;
  ObjectiveScratch s1, s2;
  gairat_loss_frozen(net, x_adv, y, {1.0, 1.0, 1.0, 1.0}, uniform, s1);
  pgd_at_loss_frozen(net, x_adv, y, pgdat, s2);
  EXPECT_NEAR(uniform.loss, pgdat.loss, 1e-12);
  expect_grads_close(uniform.grads, pgdat.grads, 1e-12);

  const std::vector<double> weights = {0.3, 1.7, 1.0, 1.0};
  ObjectiveResult weighted;
  gairat_loss_frozen(net, x_adv, y, weights, weighted, s1);
  auto loss_at = [&] {
    Mat q;
    probs_of(net, x_adv, q);
    double total = 0.0;
    for (std::size_t i = 0; i < x_adv.rows; ++i)
      total += weights[i] * cross_entropy(q.row(i), 3, y[i]);
    return total / static_cast<double>(x_adv.rows);
  };
  EXPECT_NEAR(weighted.loss, loss_at(), 1e-12);
  check_param_grads(net, weighted.grads, loss_at, "gairat");

  ObjectiveResult sink;
  EXPECT_THROW(gairat_loss_frozen(net, x_adv, y, {1.0}, sink, s1),
               std::invalid_argument);
}

TEST(ObjectiveLoss, GairatWithUniformKappasEqualsPgdAtEndToEnd) {
  Rng rng(43);
  Network net = random_net(rng, 5, {8}, 3);
  Mat x = random_batch(rng, 6, 5);
  // Label every row with the model's own prediction so no kappa can be 0,
  // and disable the perturbation so none can be below the iteration count.
  std::vector<std::size_t> y(6);
  AttackScratch as;
  for (std::size_t i = 0; i < 6; ++i) y[i] = predict(net, x.row(i), as);

  ObjectiveConfig cfg;
  cfg.attack.epsilon = 0.0;
  cfg.attack.step_size = 0.01;
  cfg.attack.iterations = 7;
  cfg.attack.random_start = false;
  cfg.gairat_lambda = 0.0;

  cfg.kind = ObjectiveKind::gairat;
  ObjectiveResult gairat;
  ObjectiveScratch s1;
  objective_loss(net, x, y, cfg, gairat, s1);
  ASSERT_EQ(gairat.kappas.size(), 6u);
  for (std::size_t k : gairat.kappas) EXPECT_EQ(k, 7u);

  cfg.kind = ObjectiveKind::pgd_at;
  ObjectiveResult pgdat;
  ObjectiveScratch s2;
  objective_loss(net, x, y, cfg, pgdat, s2);

  EXPECT_NEAR(gairat.loss, pgdat.loss, 1e-12);
  expect_grads_close(gairat.grads, pgdat.grads, 1e-12);
  EXPECT_EQ(gairat.adv_correct, pgdat.adv_correct);
}

TEST(ObjectiveLoss, DispatchesEveryKindDeterministically) {
  Rng rng(47);
  Network net = random_net(rng, 4, {6}, 3);
  const Mat x = random_batch(rng, 5, 4);
  const auto y = random_labels(rng, 5, 3);

  ObjectiveConfig cfg;
  cfg.attack.epsilon = 0.1;
  cfg.attack.step_size = 0.025;
  cfg.attack.iterations = 4;
  cfg.attack.seed = 17;

  for (ObjectiveKind kind : {ObjectiveKind::standard, ObjectiveKind::pgd_at,
                             ObjectiveKind::trades, ObjectiveKind::mart,
                             ObjectiveKind::gairat}) {
    cfg.kind = kind;
    ObjectiveResult a, b;
    ObjectiveScratch s1, s2;
    objective_loss(net, x, y, cfg, a, s1);
    objective_loss(net, x, y, cfg, b, s2);
    EXPECT_EQ(a.loss, b.loss) << to_string(kind);
    EXPECT_EQ(a.kappas, b.kappas) << to_string(kind);
    EXPECT_EQ(a.adv_correct, b.adv_correct) << to_string(kind);
    EXPECT_TRUE(std::isfinite(a.loss)) << to_string(kind);
    if (kind == ObjectiveKind::standard || kind == ObjectiveKind::trades) {
      EXPECT_TRUE(a.kappas.empty()) << to_string(kind);
    } else {
      EXPECT_EQ(a.kappas.size(), 5u) << to_string(kind);
    }
  }
}

TEST(TradesInnerAttack, KeepsThePerturbationInsideTheBallAndIsSeeded) {
  Rng rng(53);
  Network net = random_net(rng, 5, {6}, 3);
  const Mat x = random_batch(rng, 4, 5);
  const auto y = random_labels(rng, 4, 3);

  ObjectiveConfig cfg;
  cfg.kind = ObjectiveKind::trades;
  cfg.lambda = 6.0;
  cfg.attack.epsilon = 0.1;
  cfg.attack.step_size = 0.025;
  cfg.attack.iterations = 5;
  cfg.attack.seed = 7;

  ObjectiveResult out;
  ObjectiveScratch s;
  trades_loss(net, x, y, cfg, out, s);
  ASSERT_EQ(s.x_adv.rows, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      EXPECT_LE(std::fabs(s.x_adv.at(i, j) - x.at(i, j)), cfg.attack.epsilon + 1e-9);
      EXPECT_GE(s.x_adv.at(i, j), 0.0);
      EXPECT_LE(s.x_adv.at(i, j), 1.0);
    }

  ObjectiveScratch s2;
  ObjectiveResult out2;
  trades_loss(net, x, y, cfg, out2, s2);
  EXPECT_EQ(s.x_adv.data, s2.x_adv.data);
  EXPECT_EQ(out.loss, out2.loss);
}
