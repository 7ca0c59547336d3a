#pragma once

// Subject-disjoint fold plans and the two reported metrics (MAE, ROC AUC).

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "facepain/features.hpp"

namespace facepain {

struct Fold {
  std::vector<int> train_patients;  // sorted
  std::vector<int> test_patients;   // sorted

  bool operator==(const Fold&) const = default;
};

struct SplitPlan {
  enum class Scheme { LeaveOneSubjectOut, RandomPatientSplits };

  Scheme scheme = Scheme::LeaveOneSubjectOut;
  double ratio = 0.0;          // random splits only
  int repetitions = 0;         // random splits only
  std::uint64_t seed = 0;      // random splits only
  std::vector<Fold> folds;

  bool operator==(const SplitPlan&) const = default;
};

std::string_view to_string(SplitPlan::Scheme scheme);

/// `patient_ids` holds one entry per sequence; duplicates are expected.
SplitPlan loso_folds(std::span<const int> patient_ids);
SplitPlan loso_folds(std::span<const SequenceSample> samples);

SplitPlan random_patient_splits(std::span<const int> patient_ids, double ratio, int repetitions,
                                std::uint64_t seed);
SplitPlan random_patient_splits(std::span<const SequenceSample> samples, double ratio, int repetitions,
                                std::uint64_t seed);

/// True iff no fold shares a patient between its train and test side.
bool is_patient_disjoint(const SplitPlan& plan);

double mae(std::span<const double> predictions, std::span<const double> targets);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr) from (0,0) to (1,1)
  double auc = 0.0;
};

/// Threshold sweep over the distinct decision values (higher = more positive).
RocCurve roc_auc(std::span<const double> decisions, std::span<const bool> labels);
RocCurve roc_auc(std::span<const double> decisions, const std::vector<bool>& labels);

}  // namespace facepain
