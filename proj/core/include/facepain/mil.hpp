#pragma once

// Multiple-instance learning: each sequence becomes a bag of k sampled frames,
// and MI-SVM alternates between fitting an SVC and re-picking the witness
// (max-decision instance) of every positive bag.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "facepain/feature_cache.hpp"
#include "facepain/features.hpp"
#include "facepain/svm.hpp"

namespace facepain {

inline constexpr std::size_t kDefaultBagSize = 30;

enum class SamplingStrategy { Random, Uniform, Cluster };

std::string_view to_string(SamplingStrategy s);
std::optional<SamplingStrategy> parse_sampling_strategy(std::string_view name);

struct SamplerConfig {
  std::size_t k = kDefaultBagSize;
  SamplingStrategy strategy = SamplingStrategy::Uniform;
  std::uint64_t seed = 0;
};

/// Sorted source-frame indices of min(k, n) frames.
std::vector<std::size_t> sample_random(std::size_t n, std::size_t k, std::uint64_t seed);
std::vector<std::size_t> sample_uniform(std::size_t n, std::size_t k);

struct Segment {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // exclusive

  std::size_t center() const { return begin + (end - begin - 1) / 2; }
  bool operator==(const Segment&) const = default;
};

/// Adjacency-constrained agglomerative segmentation (centroid linkage).
std::vector<Segment> cluster_segments(const SequenceSample& sample, std::size_t k);
std::vector<std::size_t> sample_cluster(const SequenceSample& sample, std::size_t k);

std::vector<std::size_t> sample_indices(const SequenceSample& sample, const SamplerConfig& config);

struct Bag {
  std::string bag_id;
  int patient_id = 0;
  Eigen::MatrixXd instances;  // one instance per row
  bool label = false;
  std::vector<std::size_t> source_indices;  // frame index of each instance
};

Bag make_bag(const SequenceSample& sample, const SamplerConfig& config);

/// Columnar dump of the bag instances (same format as the feature cache).
FeatureMatrix bag_matrix(const Bag& bag, FeatureKind kind);

struct MilModel {
  SvcModel svc;
  std::vector<std::size_t> positive_bags;              // index into the training bag list
  std::vector<std::vector<std::size_t>> history;       // per iteration, witness per positive bag
  std::vector<std::size_t> witnesses;                  // final witness per positive bag
  bool converged = false;

  std::size_t iterations() const { return history.size(); }
};

struct MilParams {
  SolverParams svm;
  KernelSpec kernel = KernelSpec::linear();
  int max_iterations = 20;
};

MilModel train_misvm(std::span<const Bag> bags, const MilParams& params);

/// Max instance decision value; the bag is positive iff the value is > 0.
double predict_bag(const MilModel& model, const Bag& bag);

}  // namespace facepain
