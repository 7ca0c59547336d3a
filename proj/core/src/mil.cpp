#include "facepain/mil.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "facepain/error.hpp"
#include "facepain/rng.hpp"

namespace facepain {

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::Random: return "random";
    case SamplingStrategy::Uniform: return "uniform";
    case SamplingStrategy::Cluster: return "cluster";
  }
  return "?";
}

std::optional<SamplingStrategy> parse_sampling_strategy(std::string_view name) {
  if (name == "random") return SamplingStrategy::Random;
  if (name == "uniform") return SamplingStrategy::Uniform;
  if (name == "cluster") return SamplingStrategy::Cluster;
  return std::nullopt;
}

std::vector<std::size_t> sample_random(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw InvalidArgument("sampler k must be >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  perm.resize(std::min(n, k));
  std::sort(perm.begin(), perm.end());
  return perm;
}

std::vector<std::size_t> sample_uniform(std::size_t n, std::size_t k) {
  if (k == 0) throw InvalidArgument("sampler k must be >= 1");
  std::vector<std::size_t> out;
  out.reserve(std::min(n, k));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t idx = i * n / k;
    if (idx < n && (out.empty() || out.back() != idx)) out.push_back(idx);
  }
  return out;
}

std::vector<Segment> cluster_segments(const SequenceSample& sample, std::size_t k) {
  if (k == 0) throw InvalidArgument("sampler k must be >= 1");
  const std::size_t n = sample.size();
  const std::size_t d = sample.dim();

  struct Cluster {
    Segment seg;
    std::vector<double> sum;
  };
  std::vector<Cluster> clusters(n);
  for (std::size_t i = 0; i < n; ++i) {
    clusters[i].seg = {i, i + 1};
    const auto f = sample.frame(i);
    clusters[i].sum.assign(f.begin(), f.end());
  }
  auto linkage = [d](const Cluster& a, const Cluster& b) {
    const double na = static_cast<double>(a.seg.end - a.seg.begin);
    const double nb = static_cast<double>(b.seg.end - b.seg.begin);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = a.sum[j] / na - b.sum[j] / nb;
      s += diff * diff;
    }
    return s;
  };
  // gap[i] is the linkage between clusters i and i+1.
  std::vector<double> gap(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i) gap[i] = linkage(clusters[i], clusters[i + 1]);

  while (clusters.size() > k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < gap.size(); ++i)
      if (gap[i] < gap[best]) best = i;
    Cluster& left = clusters[best];
    const Cluster& right = clusters[best + 1];
    left.seg.end = right.seg.end;
    for (std::size_t j = 0; j < d; ++j) left.sum[j] += right.sum[j];
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    gap.erase(gap.begin() + static_cast<std::ptrdiff_t>(best));
    if (best > 0) gap[best - 1] = linkage(clusters[best - 1], clusters[best]);
    if (best < gap.size()) gap[best] = linkage(clusters[best], clusters[best + 1]);
  }

  std::vector<Segment> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(c.seg);
  return out;
}

std::vector<std::size_t> sample_cluster(const SequenceSample& sample, std::size_t k) {
  std::vector<std::size_t> out;
  for (const auto& seg : cluster_segments(sample, k)) out.push_back(seg.center());
  return out;
}

std::vector<std::size_t> sample_indices(const SequenceSample& sample, const SamplerConfig& config) {
  switch (config.strategy) {
    case SamplingStrategy::Random: return sample_random(sample.size(), config.k, config.seed);
    case SamplingStrategy::Uniform: return sample_uniform(sample.size(), config.k);
    case SamplingStrategy::Cluster: return sample_cluster(sample, config.k);
  }
  return {};
}

Bag make_bag(const SequenceSample& sample, const SamplerConfig& config) {
  if (sample.size() == 0) throw InvalidArgument(fmt::format("sequence {} has no frames", sample.sequence_id));
  Bag bag;
  bag.bag_id = sample.sequence_id;
  bag.patient_id = sample.patient_id;
  bag.label = sample.label.significant;
  bag.source_indices = sample_indices(sample, config);
  const auto d = static_cast<Eigen::Index>(sample.dim());
  bag.instances.resize(static_cast<Eigen::Index>(bag.source_indices.size()), d);
  for (std::size_t r = 0; r < bag.source_indices.size(); ++r) {
    const auto f = sample.frame(bag.source_indices[r]);
    for (Eigen::Index c = 0; c < d; ++c) bag.instances(static_cast<Eigen::Index>(r), c) = f[static_cast<std::size_t>(c)];
  }
  return bag;
}

FeatureMatrix bag_matrix(const Bag& bag, FeatureKind kind) {
  FeatureMatrix m;
  m.kind = kind;
  m.rows = static_cast<std::uint64_t>(bag.instances.rows());
  m.dim = static_cast<std::uint64_t>(bag.instances.cols());
  m.values.reserve(static_cast<std::size_t>(m.rows * m.dim));
  for (Eigen::Index r = 0; r < bag.instances.rows(); ++r)
    for (Eigen::Index c = 0; c < bag.instances.cols(); ++c)
      m.values.push_back(static_cast<float>(bag.instances(r, c)));
  return m;
}

namespace {

std::vector<double> instance_decisions(const SvcModel& svc, const Eigen::MatrixXd& instances) {
  std::vector<double> out(static_cast<std::size_t>(instances.rows()));
  for (Eigen::Index r = 0; r < instances.rows(); ++r)
    out[static_cast<std::size_t>(r)] = decision_value(svc, Eigen::VectorXd(instances.row(r).transpose()));
  return out;
}

// Lowest index wins ties.
std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

MilModel train_misvm(std::span<const Bag> bags, const MilParams& params) {
  if (bags.empty()) throw InvalidArgument("train_misvm: no bags");
  const Eigen::Index d = bags.front().instances.cols();
  Eigen::Index negative_rows = 0;
  MilModel model;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    if (bags[b].instances.rows() < 1) throw InvalidArgument(fmt::format("bag {} is empty", bags[b].bag_id));
    if (bags[b].instances.cols() != d) throw InvalidArgument("train_misvm: instance dimension mismatch");
    if (bags[b].label)
      model.positive_bags.push_back(b);
    else
      negative_rows += bags[b].instances.rows();
  }
  if (model.positive_bags.empty() || negative_rows == 0)
    throw InvalidArgument("train_misvm needs at least one positive and one negative bag");

  const auto p = static_cast<Eigen::Index>(model.positive_bags.size());
  Eigen::MatrixXd x(negative_rows + p, d);
  std::vector<int> y(static_cast<std::size_t>(negative_rows + p), -1);
  Eigen::Index row = 0;
  for (const auto& bag : bags)
    if (!bag.label) {
      x.middleRows(row, bag.instances.rows()) = bag.instances;
      row += bag.instances.rows();
    }
  for (Eigen::Index i = 0; i < p; ++i) {
    x.row(negative_rows + i) = bags[model.positive_bags[static_cast<std::size_t>(i)]].instances.colwise().mean();
    y[static_cast<std::size_t>(negative_rows + i)] = 1;
  }

  for (int it = 0; it < params.max_iterations; ++it) {
    model.svc = train_svc(x, y, params.svm, params.kernel);
    std::vector<std::size_t> assignment(model.positive_bags.size());
    for (std::size_t i = 0; i < model.positive_bags.size(); ++i) {
      const Bag& bag = bags[model.positive_bags[i]];
      assignment[i] = argmax(instance_decisions(model.svc, bag.instances));
    }
    const bool fixed = !model.history.empty() && model.history.back() == assignment;
    model.history.push_back(assignment);
    if (fixed) {
      model.converged = true;
      break;
    }
    for (Eigen::Index i = 0; i < p; ++i)
      x.row(negative_rows + i) =
          bags[model.positive_bags[static_cast<std::size_t>(i)]].instances.row(static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(i)]));
  }
  model.witnesses = model.history.back();
  return model;
}

double predict_bag(const MilModel& model, const Bag& bag) {
  if (bag.instances.rows() < 1) throw InvalidArgument(fmt::format("bag {} is empty", bag.bag_id));
  if (bag.instances.cols() != model.svc.support_vectors.cols())
    throw InvalidArgument(fmt::format("bag {} has dimension {}, model expects {}", bag.bag_id,
                                      bag.instances.cols(), model.svc.support_vectors.cols()));
  const auto v = instance_decisions(model.svc, bag.instances);
  return *std::max_element(v.begin(), v.end());
}

}  // namespace facepain
