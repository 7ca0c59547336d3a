#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "facepain/error.hpp"
#include "facepain/metrics.hpp"
#include "facepain/rng.hpp"

#include "support/oracles.hpp"

using namespace facepain;

namespace {

std::vector<int> patients_with_sequences(int patients, int per_patient) {
  std::vector<int> ids;
  for (int p = 1; p <= patients; ++p)
    for (int s = 0; s < per_patient; ++s) ids.push_back(p);
  return ids;
}

}  // namespace

TEST(Loso, OneFoldPerPatient) {
  const SplitPlan plan = loso_folds(patients_with_sequences(26, 3));
  EXPECT_EQ(plan.folds.size(), 26u);
  EXPECT_TRUE(is_patient_disjoint(plan));
  for (std::size_t i = 0; i < plan.folds.size(); ++i) {
    EXPECT_EQ(plan.folds[i].test_patients, std::vector<int>{static_cast<int>(i) + 1});
    EXPECT_EQ(plan.folds[i].train_patients.size(), 25u);
  }
}

TEST(Loso, TwoPatientsAreComplementary) {
  const SplitPlan plan = loso_folds(std::vector<int>{7, 9, 7});
  ASSERT_EQ(plan.folds.size(), 2u);
  EXPECT_EQ(plan.folds[0].train_patients, plan.folds[1].test_patients);
  EXPECT_EQ(plan.folds[1].train_patients, plan.folds[0].test_patients);
}

TEST(RandomSplits, CountsAndDeterminism) {
  const auto ids = patients_with_sequences(10, 4);
  const SplitPlan a = random_patient_splits(ids, 0.8, 10, 42);
  ASSERT_EQ(a.folds.size(), 10u);
  for (const Fold& f : a.folds) {
    EXPECT_EQ(f.train_patients.size(), 8u);
    EXPECT_EQ(f.test_patients.size(), 2u);
  }
  EXPECT_TRUE(is_patient_disjoint(a));
  EXPECT_EQ(a, random_patient_splits(ids, 0.8, 10, 42));
  EXPECT_NE(a, random_patient_splits(ids, 0.8, 10, 43));
  EXPECT_THROW(random_patient_splits(ids, 1.0, 1, 0), InvalidArgument);
}

TEST(Disjointness, DetectsLeak) {
  SplitPlan plan;
  plan.folds.push_back({{1, 2}, {2, 3}});
  EXPECT_FALSE(is_patient_disjoint(plan));
}

TEST(Mae, HandComputed) {
  EXPECT_EQ(mae(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{5, 5}, std::vector<double>{3, 9}), 3.0);
  EXPECT_THROW(mae(std::vector<double>{1}, std::vector<double>{1, 2}), InvalidArgument);
}

TEST(Mae, MedianBeatsMeanOnSkewedSet) {
  const std::vector<double> t = {0.0, 1.0, 8.0};
  EXPECT_LT(mae(std::vector<double>(3, 1.0), t), mae(std::vector<double>(3, 3.0), t));
}

TEST(Roc, SeparatedTiedAndMixed) {
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<bool>{false, false, true, true}).auc, 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>(4, 0.5), std::vector<bool>{false, true, false, true}).auc, 0.5);
  const std::vector<double> s = {0.9, 0.4, 0.4, 0.7, 0.1, 0.6};
  const std::vector<bool> l = {true, true, false, false, false, true};
  EXPECT_NEAR(roc_auc(s, l).auc, oracle::concordance_auc(s, l), 1e-15);
}

TEST(Roc, CurveRunsFromOriginToOne) {
  const RocCurve c = roc_auc(std::vector<double>{0.3, 0.6, 0.6, 0.2}, std::vector<bool>{true, false, true, false});
  EXPECT_EQ(c.points.front(), (std::pair<double, double>{0.0, 0.0}));
  EXPECT_EQ(c.points.back(), (std::pair<double, double>{1.0, 1.0}));
  EXPECT_TRUE(std::is_sorted(c.points.begin(), c.points.end()));
}

TEST(Roc, SingleClassRejected) {
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<bool>{true, true}), InvalidArgument);
}
