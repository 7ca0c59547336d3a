#include <algorithm>

#include <gtest/gtest.h>

#include "facepain/error.hpp"
#include "facepain/rng.hpp"
#include "facepain/second_level.hpp"

using namespace facepain;

namespace {

// Training set where each label is the maximum of its score sequence.
AggregatorTrainingSet max_labelled(Rng& rng, std::size_t sequences, std::vector<std::vector<double>>* raw = nullptr) {
  AggregatorTrainingSet t;
  for (std::size_t s = 0; s < sequences; ++s) {
    std::vector<double> scores(20);
    for (auto& v : scores) v = rng.uniform(0.0, 0.5);
    scores[rng.below(20)] = rng.uniform(0.0, 1.0);
    const double label = *std::max_element(scores.begin(), scores.end());
    t.stats.push_back(sequence_stats(scores));
    t.scaled.push_back(label);
    t.significant.push_back(label > 0.5);
    if (raw) raw->push_back(scores);
  }
  return t;
}

}  // namespace

TEST(Stats, SingletonAndPair) {
  EXPECT_EQ(sequence_stats(std::vector<double>{0.3}), (SequenceStats{0.3, 0.3, 0.3, 0.3, 0.0}));
  const SequenceStats s = sequence_stats(std::vector<double>{0.0, 1.0});
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.median, 0.5);
  EXPECT_DOUBLE_EQ(s.variance, 0.25);
  EXPECT_DOUBLE_EQ(sequence_stats(std::vector<double>(7, 0.4)).variance, 0.0);
  EXPECT_THROW(sequence_stats(std::vector<double>{}), InvalidArgument);
}

TEST(Stats, MaxIsPermutationInvariant) {
  std::vector<double> s = {0.1, 0.9, 0.2};
  EXPECT_EQ(aggregate_max(s), 0.9);
  std::reverse(s.begin(), s.end());
  EXPECT_EQ(aggregate_max(s), 0.9);
  EXPECT_EQ(aggregate_max(std::vector<double>{0.4}), 0.4);
}

TEST(Scaler, StandardizesColumns) {
  std::vector<SequenceStats> stats = {sequence_stats(std::vector<double>{0.0, 1.0}),
                                      sequence_stats(std::vector<double>{0.2, 0.4, 0.6})};
  const StandardScaler sc = StandardScaler::fit(stats);
  const Eigen::VectorXd a = sc.transform(stats[0]);
  const Eigen::VectorXd b = sc.transform(stats[1]);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(a(i) + b(i), 0.0, 1e-12);
  // A constant column keeps unit scale instead of dividing by zero.
  const StandardScaler flat = StandardScaler::fit(std::vector<SequenceStats>(3, stats[0]));
  EXPECT_TRUE(flat.transform(stats[0]).isZero());
}

TEST(Aggregator, MaxPassThrough) {
  const Aggregator agg = train_aggregator(AggregatorKind::Max, {});
  EXPECT_EQ(predict_sequence(agg, std::vector<double>{0.2, 0.7}), 0.7);
  EXPECT_EQ(predict_sequence(agg, std::vector<double>{1.4}), 1.0);
}

TEST(Aggregator, SvrRecoversMaxStatistic) {
  Rng rng(1);
  std::vector<std::vector<double>> raw;
  const auto train = max_labelled(rng, 60, &raw);
  AggregatorOptions opt;
  opt.kernel = KernelSpec::linear();
  opt.svr_epsilon = 0.005;
  opt.svm.C = 100.0;
  const Aggregator agg = train_aggregator(AggregatorKind::Svr, train, opt);
  double err = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) err += std::abs(predict_sequence(agg, raw[i]) - train.scaled[i]);
  EXPECT_LT(err / static_cast<double>(raw.size()), 0.02);
}

TEST(Aggregator, GpInterpolatesThreeSequences) {
  const std::vector<std::vector<double>> raw = {{0.1, 0.2, 0.1}, {0.5, 0.6, 0.4, 0.9}, {0.3, 0.3}};
  AggregatorTrainingSet t;
  const std::vector<double> labels = {0.2, 0.8, 0.4};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    t.stats.push_back(sequence_stats(raw[i]));
    t.scaled.push_back(labels[i]);
    t.significant.push_back(labels[i] > 0.4);
  }
  AggregatorOptions opt;
  opt.gp_optimize = false;
  opt.gp_noise_ratio = 1e-12;
  const Aggregator agg = train_aggregator(AggregatorKind::Gp, t, opt);
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(predict_sequence(agg, raw[i]), labels[i], 1e-4);
}

TEST(Aggregator, SvcSignFlipsAcrossPlantedBoundary) {
  AggregatorTrainingSet t;
  for (int i = 0; i < 40; ++i) {
    const double level = i / 40.0;
    t.stats.push_back(sequence_stats(std::vector<double>{level, level + 0.05}));
    t.scaled.push_back(level);
    t.significant.push_back(level > 0.5);
  }
  const Aggregator agg = train_aggregator(AggregatorKind::Svc, t);
  EXPECT_LT(predict_sequence(agg, std::vector<double>{0.1, 0.15}), 0.0);
  EXPECT_GT(predict_sequence(agg, std::vector<double>{0.9, 0.95}), 0.0);
}

TEST(Aggregator, RegressionOutputsAreClamped) {
  Rng rng(2);
  const auto train = max_labelled(rng, 30);
  for (AggregatorKind kind : {AggregatorKind::Gp, AggregatorKind::Svr}) {
    const Aggregator agg = train_aggregator(kind, train);
    for (double level : {-50.0, 50.0}) {
      const double p = predict_sequence(agg, std::vector<double>{level, level});
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(Aggregator, Names) {
  EXPECT_EQ(to_string(AggregatorKind::Gp), "GP");
  EXPECT_EQ(to_string(AggregatorKind::Svc), "SVC");
}
