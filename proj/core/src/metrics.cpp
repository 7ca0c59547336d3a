#include "facepain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "facepain/error.hpp"
#include "facepain/rng.hpp"

namespace facepain {

std::string_view to_string(SplitPlan::Scheme scheme) {
  return scheme == SplitPlan::Scheme::LeaveOneSubjectOut ? "loso" : "random";
}

namespace {

std::vector<int> distinct_patients(std::span<const int> ids) {
  std::set<int> unique(ids.begin(), ids.end());
  if (unique.size() < 2) throw InvalidArgument("subject-disjoint splits need at least two patients");
  return {unique.begin(), unique.end()};
}

std::vector<int> patients_of(std::span<const SequenceSample> samples) {
  std::vector<int> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.patient_id);
  return ids;
}

}  // namespace

SplitPlan loso_folds(std::span<const int> patient_ids) {
  const auto patients = distinct_patients(patient_ids);
  SplitPlan plan;
  plan.scheme = SplitPlan::Scheme::LeaveOneSubjectOut;
  for (int held_out : patients) {
    Fold f;
    f.test_patients = {held_out};
    for (int p : patients)
      if (p != held_out) f.train_patients.push_back(p);
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

SplitPlan loso_folds(std::span<const SequenceSample> samples) {
  const auto ids = patients_of(samples);
  return loso_folds(std::span<const int>(ids));
}

SplitPlan random_patient_splits(std::span<const int> patient_ids, double ratio, int repetitions,
                                std::uint64_t seed) {
  auto patients = distinct_patients(patient_ids);
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split ratio must lie in (0, 1)");
  if (repetitions < 1) throw InvalidArgument("split repetitions must be >= 1");
  const auto total = patients.size();
  const auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(total) - 1e-9));
  if (n_train == 0 || n_train >= total)
    throw InvalidArgument(fmt::format("ratio {} leaves an empty side with {} patients", ratio, total));

  SplitPlan plan;
  plan.scheme = SplitPlan::Scheme::RandomPatientSplits;
  plan.ratio = ratio;
  plan.repetitions = repetitions;
  plan.seed = seed;
  Rng rng(seed);
  for (int r = 0; r < repetitions; ++r) {
    rng.shuffle(std::span<int>(patients));
    Fold f;
    f.train_patients.assign(patients.begin(), patients.begin() + static_cast<std::ptrdiff_t>(n_train));
    f.test_patients.assign(patients.begin() + static_cast<std::ptrdiff_t>(n_train), patients.end());
    std::sort(f.train_patients.begin(), f.train_patients.end());
    std::sort(f.test_patients.begin(), f.test_patients.end());
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

SplitPlan random_patient_splits(std::span<const SequenceSample> samples, double ratio, int repetitions,
                                std::uint64_t seed) {
  const auto ids = patients_of(samples);
  return random_patient_splits(std::span<const int>(ids), ratio, repetitions, seed);
}

bool is_patient_disjoint(const SplitPlan& plan) {
  for (const auto& f : plan.folds)
    for (int p : f.test_patients)
      if (std::binary_search(f.train_patients.begin(), f.train_patients.end(), p)) return false;
  return true;
}

double mae(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw InvalidArgument(fmt::format("mae: {} predictions vs {} targets", predictions.size(), targets.size()));
  if (predictions.empty()) throw InvalidArgument("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - targets[i]);
  return s / static_cast<double>(predictions.size());
}

RocCurve roc_auc(std::span<const double> decisions, std::span<const bool> labels) {
  if (decisions.size() != labels.size()) throw InvalidArgument("roc_auc: length mismatch");
  std::size_t pos = 0;
  for (bool l : labels) pos += l ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("roc_auc needs both positive and negative labels");
  for (double v : decisions)
    if (std::isnan(v)) throw InvalidArgument("roc_auc: NaN decision value");

  std::vector<std::size_t> order(decisions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return decisions[a] > decisions[b]; });

  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  double area = 0.0;  // in units of (tp * fp) counts
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = decisions[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && decisions[order[i]] == threshold; ++i) (labels[order[i]] ? tp : fp) += 1;
    area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) / 2.0;
    roc.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos));
  }
  roc.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

RocCurve roc_auc(std::span<const double> decisions, const std::vector<bool>& labels) {
  const std::unique_ptr<bool[]> tmp(new bool[labels.size()]);
  for (std::size_t i = 0; i < labels.size(); ++i) tmp[i] = labels[i];
  return roc_auc(decisions, std::span<const bool>(tmp.get(), labels.size()));
}

}  // namespace facepain
