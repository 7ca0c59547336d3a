#pragma once

// Sequence-level aggregation of first-level frame scores: the maximum score,
// or a GP / SVR / SVC over summary statistics of the score sequence.

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "facepain/gp.hpp"
#include "facepain/svm.hpp"

namespace facepain {

inline constexpr std::size_t kStatCount = 5;

struct SequenceStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double variance = 0.0;  // population

  std::array<double, kStatCount> as_array() const { return {min, max, mean, median, variance}; }
  bool operator==(const SequenceStats&) const = default;
};

SequenceStats sequence_stats(std::span<const double> scores);
double aggregate_max(std::span<const double> scores);

/// Per-column standardization fitted on a training fold.
struct StandardScaler {
  std::array<double, kStatCount> mean{};
  std::array<double, kStatCount> scale{1.0, 1.0, 1.0, 1.0, 1.0};

  static StandardScaler fit(std::span<const SequenceStats> stats);
  Eigen::VectorXd transform(const SequenceStats& s) const;
  bool operator==(const StandardScaler&) const = default;
};

enum class AggregatorKind { Max, Gp, Svr, Svc };

std::string_view to_string(AggregatorKind kind);

struct AggregatorOptions {
  bool gp_optimize = true;
  double gp_noise_ratio = 0.1;  // initial noise variance as a fraction of target variance
  SolverParams svm;
  std::optional<KernelSpec> kernel;  // default: RBF with gamma = 1 / kStatCount
  double svr_epsilon = 0.05;
};

struct MaxAggregate {};

struct Aggregator {
  AggregatorKind kind = AggregatorKind::Max;
  StandardScaler scaler;
  std::variant<MaxAggregate, GpModel, SvrModel, SvcModel> model;
};

/// `scaled` targets drive the regressors; `significant` drives the SVC.
struct AggregatorTrainingSet {
  std::vector<SequenceStats> stats;
  std::vector<double> scaled;
  std::vector<bool> significant;
};

Aggregator train_aggregator(AggregatorKind kind, const AggregatorTrainingSet& data,
                            const AggregatorOptions& options = {});

/// Max / GP / SVR: score in [0,1]. SVC: raw decision value (sign = class).
double predict_sequence(const Aggregator& agg, std::span<const double> scores);

}  // namespace facepain
