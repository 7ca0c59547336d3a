#pragma once

// Experiment grid over (feature kind x method) evaluated on subject-disjoint
// folds. Regression methods report MAE on the raw 0-10 scale, binary methods
// report ROC AUC.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facepain/features.hpp"
#include "facepain/metrics.hpp"
#include "facepain/mil.hpp"
#include "facepain/mlp.hpp"
#include "facepain/second_level.hpp"

namespace facepain {

enum class Method { DflMax, DflGp, DflSvr, DflBinary, MilCluster, MilRandom, MilUniform };

inline constexpr std::array<Method, 7> kAllMethods = {Method::DflMax,     Method::DflGp,     Method::DflSvr,
                                                      Method::DflBinary,  Method::MilCluster, Method::MilRandom,
                                                      Method::MilUniform};

/// Config key ("max", "gp", "svr", "dfl-binary", "mil-cluster", ...).
std::string_view to_string(Method m);
/// Column header as printed in the result tables.
std::string_view display_name(Method m);
std::optional<Method> parse_method(std::string_view name);
bool is_regression(Method m);

struct SplitConfig {
  SplitPlan::Scheme scheme = SplitPlan::Scheme::LeaveOneSubjectOut;
  double ratio = 0.8;
  int repetitions = 10;
};

struct MilSettings {
  std::size_t k = kDefaultBagSize;
  MilParams params;
};

struct ExperimentConfig {
  std::vector<FeatureKind> kinds{kAllFeatureKinds.begin(), kAllFeatureKinds.end()};
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  SplitConfig split;
  std::uint64_t seed = 0;
  MlpConfig mlp;  // input_dim and seed are set per kind and fold
  AggregatorOptions second_level;
  MilSettings mil;
  int workers = 1;

  void validate() const;
};

/// Echo of every setting that influences results (workers excluded).
std::string to_json(const ExperimentConfig& config);
/// Strict parse: unknown keys and wrong types are rejected with the key path.
ExperimentConfig experiment_config_from_json(std::string_view text);

struct PredictionRow {
  std::size_t fold = 0;
  std::string sequence_id;
  int patient_id = 0;
  double truth = 0.0;       // raw score (regression) or 0/1 (binary)
  double prediction = 0.0;  // raw-scale score (regression) or 0/1 class
  double decision = 0.0;    // [0,1] score (regression) or signed margin (binary)
};

struct FoldResult {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  std::size_t test_sequences = 0;
  std::optional<double> value;  // MAE or AUC; AUC is undefined on single-class test sets
  std::string error;            // non-empty: the fold failed and is excluded
};

struct CellResult {
  FeatureKind kind = FeatureKind::BlendShapes;
  Method method = Method::DflMax;
  std::vector<FoldResult> folds;
  std::optional<double> aggregate;   // pooled MAE, or mean of per-fold AUCs
  std::optional<double> pooled_auc;  // binary only: AUC over all test decisions
  std::size_t failed_folds = 0;
  std::vector<PredictionRow> predictions;

  std::string_view metric() const { return is_regression(method) ? "MAE" : "AUC"; }
};

struct EvalReport {
  ExperimentConfig config;
  SplitPlan plan;
  std::vector<CellResult> cells;
  std::string generated_at;  // UTC, the only non-deterministic field

  const CellResult* find(FeatureKind kind, Method method) const;
  std::size_t failed_folds() const;
};

using Datasets = std::map<FeatureKind, std::vector<SequenceSample>>;

/// Fold plan over the union of patients found in `data`.
SplitPlan make_plan(const ExperimentConfig& config, const Datasets& data);

EvalReport run_experiment(const ExperimentConfig& config, const Datasets& data);

std::string to_json(const EvalReport& report);
/// Aligned text tables: rows are feature kinds, columns are methods.
std::string to_text_table(const EvalReport& report);
/// `sequence_id,true,pred,decision`
std::string predictions_csv(const CellResult& cell);

}  // namespace facepain
