#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "advlab/profiler.hpp"
#include "test_util.hpp"

using namespace advlab;
using namespace advlab::testutil;

namespace {

ExampleRecord bits_record(long long id, std::initializer_list<int> bits) {
  ExampleRecord rec;
  rec.example_id = id;
  for (int b : bits) {
    rec.robust_correct.push_back(static_cast<std::uint8_t>(b));
    rec.clean_true_prob.push_back(b ? 0.75 : 0.25);
  }
  return rec;
}

}  // namespace

TEST(RecordEpoch, TracksRobustBitsAndCleanProbabilities) {
  Rng rng(61);
  const Network net = random_net(rng, 4, {6}, 3);
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 4;
  spec.n_per_class = 4;
  const Dataset ds = generate_synthetic(spec).first;
  Mat x;
  std::vector<std::size_t> y;
  pack(ds, x, y);

  AttackConfig eval_attack;
  eval_attack.epsilon = 0.1;
  eval_attack.step_size = 0.025;
  eval_attack.iterations = 4;
  eval_attack.seed = 5;

  RecordSet records = init_records(ds);
  ProfilerScratch s;
  record_epoch(records, 0, net, x, y, eval_attack, s);
  record_epoch(records, 1, net, x, y, eval_attack, s);

  Mat probs;
  Trace tr;
  forward(net, x, tr);
  softmax(tr.pre.back(), probs);

  AttackScratch atk;
  AttackConfig sub = eval_attack;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ASSERT_EQ(records[i].robust_correct.size(), 2u);
    EXPECT_EQ(records[i].example_id, ds.examples[i].id);
    EXPECT_DOUBLE_EQ(records[i].clean_true_prob[0], probs.row(i)[y[i]]);
    EXPECT_DOUBLE_EQ(records[i].clean_true_prob[1], probs.row(i)[y[i]]);
    for (std::size_t epoch = 0; epoch < 2; ++epoch) {
      sub.seed = derive_seed(eval_attack.seed, 0x70726f66ULL, epoch, i);
      const AttackOutcome oc = pgd(net, x.row(i), y[i], sub, atk);
      const std::uint8_t expected = oc.kappa != 0 && !oc.success ? 1 : 0;
      EXPECT_EQ(records[i].robust_correct[epoch], expected) << "example " << i;
    }
  }

  // Epoch indices must extend the sequence contiguously.
  EXPECT_THROW(record_epoch(records, 1, net, x, y, eval_attack, s),
               std::invalid_argument);
  EXPECT_THROW(record_epoch(records, 5, net, x, y, eval_attack, s),
               std::invalid_argument);
  RecordSet wrong(3);
  EXPECT_THROW(record_epoch(wrong, 0, net, x, y, eval_attack, s),
               std::invalid_argument);
}

TEST(Stability, CountsRobustEpochsOverFullAndWindowedRanges) {
  const ExampleRecord rec = bits_record(0, {1, 0, 1, 1, 0});
  EXPECT_DOUBLE_EQ(stability(rec, 5), 0.6);
  EXPECT_DOUBLE_EQ(stability(rec, 0, 2), 0.5);
  EXPECT_DOUBLE_EQ(stability(rec, 2, 5), 2.0 / 3.0);
  EXPECT_THROW(stability(rec, 4), std::invalid_argument);
  EXPECT_THROW(stability(rec, 0), std::invalid_argument);
  EXPECT_THROW(stability(rec, 3, 3), std::invalid_argument);
  EXPECT_THROW(stability(rec, 0, 6), std::invalid_argument);
}

TEST(FirstLearnedEpoch, FindsTheFirstRobustEpochOrNothing) {
  EXPECT_EQ(first_learned_epoch(bits_record(0, {0, 0, 1, 0})), 2u);
  EXPECT_EQ(first_learned_epoch(bits_record(0, {1, 1})), 0u);
  EXPECT_FALSE(first_learned_epoch(bits_record(0, {0, 0, 0})).has_value());
}

TEST(MeasureScores, ReducesEachMeasureWithItsOwnConventions) {
  RecordSet records = {bits_record(0, {0, 0, 0}), bits_record(1, {0, 1, 1}),
                       bits_record(2, {1, 1, 1})};
  records[0].min_perturbation = 0.02;
  records[1].min_perturbation = 0.05;
  records[2].min_perturbation = 0.2;

  const auto stab = measure_scores(records, QualityMeasure::stability, 3, 1);
  EXPECT_EQ(stab, (std::vector<double>{0.0, 2.0 / 3.0, 1.0}));

  const auto prob = measure_scores(records, QualityMeasure::probability, 3, 1);
  EXPECT_EQ(prob, (std::vector<double>{0.25, 0.75, 0.75}));

  const auto mp = measure_scores(records, QualityMeasure::min_perturbation, 3, 1);
  EXPECT_EQ(mp, (std::vector<double>{0.02, 0.05, 0.2}));

  const auto order = measure_scores(records, QualityMeasure::learning_order, 3, 1);
  EXPECT_EQ(order[0], std::numeric_limits<double>::infinity());
  EXPECT_EQ(order[1], 1.0);
  EXPECT_EQ(order[2], 0.0);

  EXPECT_THROW(measure_scores(records, QualityMeasure::probability, 3, 9),
               std::invalid_argument);
  records[1].min_perturbation.reset();
  EXPECT_THROW(measure_scores(records, QualityMeasure::min_perturbation, 3, 1),
               std::invalid_argument);
}

TEST(RankingFromRecords, NeverLearnedExamplesRankLowestUnderLearningOrder) {
  const RecordSet records = {bits_record(0, {1, 1, 1}), bits_record(1, {0, 0, 0}),
                             bits_record(2, {0, 1, 1})};
  const QualityRanking r =
      ranking_from_records(records, QualityMeasure::learning_order, 3, 0);
  // Lowest quality (rank 1) is the never-learned example.
  EXPECT_EQ(r.ids, (std::vector<long long>{0, 1, 2}));
  EXPECT_EQ(r.rank, (std::vector<double>{3.0, 1.0, 2.0}));
}

TEST(MeasureMinPerturbation, FillsEveryRecordAgainstTheGivenNet) {
  Rng rng(67);
  const Network net = random_net(rng, 3, {5}, 2);
  Mat x = random_batch(rng, 4, 3);
  std::vector<std::size_t> y(4);
  AttackScratch atk;
  for (std::size_t i = 0; i < 4; ++i) y[i] = predict(net, x.row(i), atk);

  RecordSet records(4);
  ProfilerScratch s;
  measure_min_perturbation(records, net, x, y, 1.0 / 255.0, 0.25, s);
  for (const ExampleRecord& rec : records) {
    ASSERT_TRUE(rec.min_perturbation.has_value());
    EXPECT_GE(*rec.min_perturbation, 0.0);
    EXPECT_LE(*rec.min_perturbation, 0.25);
  }
  RecordSet wrong(2);
  EXPECT_THROW(measure_min_perturbation(wrong, net, x, y, 1.0 / 255.0, 0.25, s),
               std::invalid_argument);
}

TEST(RecordsFile, RoundTripsValuesExactly) {
  TempDir tmp;
  RecordSet records = {bits_record(3, {1, 0, 1}), bits_record(7, {0, 0, 1})};
  records[0].clean_true_prob = {0.123456789012345678, 0.5, 1.0 / 3.0};
  const std::vector<std::size_t> labels = {2, 0};
  const std::string path = tmp.file("records.csv");
  save_records(records, labels, 3, path);

  const LoadedRecords back = load_records(path);
  EXPECT_EQ(back.epochs, 3u);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.labels, labels);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.records[i].example_id, records[i].example_id);
    EXPECT_EQ(back.records[i].robust_correct, records[i].robust_correct);
    EXPECT_EQ(back.records[i].clean_true_prob, records[i].clean_true_prob);
    EXPECT_FALSE(back.records[i].min_perturbation.has_value());
  }

  EXPECT_THROW(save_records(records, {1}, 3, tmp.file("x.csv")), std::invalid_argument);
  EXPECT_THROW(save_records(records, labels, 4, tmp.file("x.csv")), std::invalid_argument);
}

TEST(RecordsFile, RejectsMalformedRows) {
  TempDir tmp;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream os(tmp.file(name));
    os << body;
    return tmp.file(name);
  };
  EXPECT_THROW(load_records(tmp.file("gone.csv")), ValidationError);
  EXPECT_THROW(load_records(write("h.csv", "epoch=3\n")), ValidationError);
  EXPECT_THROW(load_records(write("empty.csv", "epochs=2\n")), ValidationError);
  EXPECT_THROW(load_records(write("f.csv", "epochs=2\n0,1,10\n")), ValidationError);
  EXPECT_THROW(load_records(write("len.csv", "epochs=2\n0,1,101,0.5;0.5;0.5\n")),
               ValidationError);
  EXPECT_THROW(load_records(write("bit.csv", "epochs=2\n0,1,1x,0.5;0.5\n")),
               ValidationError);
  EXPECT_THROW(load_records(write("plen.csv", "epochs=2\n0,1,10,0.5\n")),
               ValidationError);
  EXPECT_THROW(load_records(write("neg.csv", "epochs=2\n0,-1,10,0.5;0.5\n")),
               ValidationError);
}

TEST(Profile, ReducesRecordsAndRoundTripsThroughItsFile) {
  RecordSet records = {bits_record(0, {0, 1, 1}), bits_record(1, {0, 0, 0}),
                       bits_record(2, {1, 1, 1})};
  records[0].min_perturbation = 0.05;
  const std::vector<std::size_t> labels = {0, 1, 0};
  const QualityRanking ranking =
      ranking_from_records(records, QualityMeasure::stability, 3, 2);

  const auto rows = make_profile(records, labels, 3, 2, ranking);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].id, 0);
  EXPECT_EQ(rows[0].label, 0u);
  EXPECT_DOUBLE_EQ(rows[0].stability, 2.0 / 3.0);
  EXPECT_EQ(rows[0].first_learned_epoch, 1);
  EXPECT_DOUBLE_EQ(rows[0].best_epoch_probability, records[0].clean_true_prob[2]);
  EXPECT_DOUBLE_EQ(rows[0].min_perturbation, 0.05);
  EXPECT_DOUBLE_EQ(rows[0].quality_rank, 2.0);
  // Sentinels: never learned and unmeasured min perturbation become -1.
  EXPECT_EQ(rows[1].first_learned_epoch, -1);
  EXPECT_DOUBLE_EQ(rows[1].min_perturbation, -1.0);
  EXPECT_DOUBLE_EQ(rows[1].quality_rank, 1.0);

  TempDir tmp;
  const std::string path = tmp.file("profile.csv");
  save_profile(rows, path);
  const auto back = load_profile(path);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].id, rows[i].id);
    EXPECT_EQ(back[i].label, rows[i].label);
    EXPECT_EQ(back[i].stability, rows[i].stability);
    EXPECT_EQ(back[i].first_learned_epoch, rows[i].first_learned_epoch);
    EXPECT_EQ(back[i].best_epoch_probability, rows[i].best_epoch_probability);
    EXPECT_EQ(back[i].min_perturbation, rows[i].min_perturbation);
    EXPECT_EQ(back[i].quality_rank, rows[i].quality_rank);
  }

  EXPECT_THROW(make_profile(records, {0, 1}, 3, 2, ranking), std::invalid_argument);
  EXPECT_THROW(make_profile(records, labels, 3, 9, ranking), std::invalid_argument);
  QualityRanking missing = ranking;
  missing.ids[0] = 99;
  EXPECT_THROW(make_profile(records, labels, 3, 2, missing), std::invalid_argument);
}

TEST(ProfileFile, RejectsMalformedInput) {
  TempDir tmp;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream os(tmp.file(name));
    os << body;
    return tmp.file(name);
  };
  EXPECT_THROW(load_profile(tmp.file("gone.csv")), ValidationError);
  EXPECT_THROW(load_profile(write("h.csv", "id,label\n")), ValidationError);
  const std::string header = std::string(kProfileHeader) + "\n";
  EXPECT_THROW(load_profile(write("none.csv", header)), ValidationError);
  EXPECT_THROW(load_profile(write("short.csv", header + "0,0,0.5\n")), ValidationError);
  EXPECT_THROW(load_profile(write("neg.csv", header + "0,-2,0.5,0,0.5,-1,1\n")),
               ValidationError);
}

TEST(RankingFromProfile, RebuildsEachMeasureAndGuardsSentinels) {
  std::vector<ProfileRow> rows(3);
  for (std::size_t i = 0; i < 3; ++i) {
    rows[i].id = static_cast<long long>(i);
    rows[i].stability = 0.1 * static_cast<double>(i + 1);
    rows[i].best_epoch_probability = 0.9 - 0.1 * static_cast<double>(i);
    rows[i].first_learned_epoch = i == 2 ? -1 : static_cast<long long>(i);
    rows[i].min_perturbation = 0.01 * static_cast<double>(i + 1);
  }
  EXPECT_EQ(ranking_from_profile(rows, QualityMeasure::stability).rank,
            (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(ranking_from_profile(rows, QualityMeasure::probability).rank,
            (std::vector<double>{3.0, 2.0, 1.0}));
  EXPECT_EQ(ranking_from_profile(rows, QualityMeasure::min_perturbation).rank,
            (std::vector<double>{1.0, 2.0, 3.0}));
  // first_learned -1 means never learned, which is the lowest quality.
  EXPECT_EQ(ranking_from_profile(rows, QualityMeasure::learning_order).rank,
            (std::vector<double>{3.0, 2.0, 1.0}));

  rows[1].min_perturbation = -1.0;
  EXPECT_THROW(ranking_from_profile(rows, QualityMeasure::min_perturbation),
               ValidationError);
}

TEST(RankingFile, RoundTripsIncludingEnsembleAverages) {
  QualityRanking a = quality_rank({0, 1, 2}, {0.3, 0.1, 0.2}, QualityMeasure::stability);
  QualityRanking b = quality_rank({0, 1, 2}, {0.1, 0.3, 0.2}, QualityMeasure::stability);
  const QualityRanking ens = ensemble_rank({a, b});

  TempDir tmp;
  const std::string path = tmp.file("ranking.csv");
  save_ranking(ens, path);
  const QualityRanking back = load_ranking(path);
  EXPECT_EQ(back.measure, QualityMeasure::stability);
  EXPECT_EQ(back.ensemble_size, 2u);
  EXPECT_EQ(back.ids, ens.ids);
  EXPECT_EQ(back.rank, ens.rank);

  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream os(tmp.file(name));
    os << body;
    return tmp.file(name);
  };
  EXPECT_THROW(load_ranking(tmp.file("gone.csv")), ValidationError);
  EXPECT_THROW(load_ranking(write("h.csv", "measure=stability\n")), ValidationError);
  EXPECT_THROW(load_ranking(write("m.csv", "measure=entropy,ensemble_size=1\n0,1\n")),
               ValidationError);
  EXPECT_THROW(load_ranking(write("e.csv", "measure=stability,ensemble_size=0\n0,1\n")),
               ValidationError);
  EXPECT_THROW(load_ranking(write("none.csv", "measure=stability,ensemble_size=1\n")),
               ValidationError);
}
