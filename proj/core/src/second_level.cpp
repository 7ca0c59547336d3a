#include "facepain/second_level.hpp"

#include <algorithm>
#include <cmath>

#include "facepain/error.hpp"

namespace facepain {

SequenceStats sequence_stats(std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("sequence_stats: empty score list");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  SequenceStats s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = std::clamp(sum / static_cast<double>(n), s.min, s.max);
  double ss = 0.0;
  for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
  s.variance = ss / static_cast<double>(n);
  return s;
}

double aggregate_max(std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("aggregate_max: empty score list");
  return *std::max_element(scores.begin(), scores.end());
}

StandardScaler StandardScaler::fit(std::span<const SequenceStats> stats) {
  StandardScaler sc;
  if (stats.empty()) return sc;
  const double n = static_cast<double>(stats.size());
  for (std::size_t c = 0; c < kStatCount; ++c) {
    double sum = 0.0;
    for (const auto& s : stats) sum += s.as_array()[c];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : stats) ss += (s.as_array()[c] - mean) * (s.as_array()[c] - mean);
    const double sd = std::sqrt(ss / n);
    sc.mean[c] = mean;
    sc.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return sc;
}

Eigen::VectorXd StandardScaler::transform(const SequenceStats& s) const {
  const auto a = s.as_array();
  Eigen::VectorXd z(static_cast<Eigen::Index>(kStatCount));
  for (std::size_t c = 0; c < kStatCount; ++c) z(static_cast<Eigen::Index>(c)) = (a[c] - mean[c]) / scale[c];
  return z;
}

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::Max: return "Max";
    case AggregatorKind::Gp: return "GP";
    case AggregatorKind::Svr: return "SVR";
    case AggregatorKind::Svc: return "SVC";
  }
  return "?";
}

Aggregator train_aggregator(AggregatorKind kind, const AggregatorTrainingSet& data,
                            const AggregatorOptions& options) {
  Aggregator agg;
  agg.kind = kind;
  if (kind == AggregatorKind::Max) return agg;

  const std::size_t m = data.stats.size();
  if (m == 0) throw InvalidArgument("train_aggregator: no training sequences");
  agg.scaler = StandardScaler::fit(data.stats);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(kStatCount));
  for (std::size_t i = 0; i < m; ++i) x.row(static_cast<Eigen::Index>(i)) = agg.scaler.transform(data.stats[i]).transpose();
  const KernelSpec kernel = options.kernel.value_or(KernelSpec::rbf(1.0 / static_cast<double>(kStatCount)));

  switch (kind) {
    case AggregatorKind::Gp: {
      if (data.scaled.size() != m) throw InvalidArgument("train_aggregator: missing regression targets");
      const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.scaled.data(), static_cast<Eigen::Index>(m));
      const double var = m > 1 ? (y.array() - y.mean()).square().mean() : 0.0;
      GpHyper init;
      init.length_scales.assign(kStatCount, 1.0);
      init.signal_variance = std::max(var, 1e-4);
      init.noise_variance = options.gp_noise_ratio * init.signal_variance;
      agg.model = fit(x, y, init, GpFitOptions{options.gp_optimize, 100});
      break;
    }
    case AggregatorKind::Svr: {
      if (data.scaled.size() != m) throw InvalidArgument("train_aggregator: missing regression targets");
      agg.model = train_svr(x, data.scaled, options.svm, options.svr_epsilon, kernel);
      break;
    }
    case AggregatorKind::Svc: {
      if (data.significant.size() != m) throw InvalidArgument("train_aggregator: missing class labels");
      std::vector<int> y(m);
      for (std::size_t i = 0; i < m; ++i) y[i] = data.significant[i] ? 1 : -1;
      agg.model = train_svc(x, y, options.svm, kernel);
      break;
    }
    case AggregatorKind::Max: break;
  }
  return agg;
}

double predict_sequence(const Aggregator& agg, std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("predict_sequence: empty score list");
  if (agg.kind == AggregatorKind::Max) return std::clamp(aggregate_max(scores), 0.0, 1.0);
  const Eigen::VectorXd z = agg.scaler.transform(sequence_stats(scores));
  switch (agg.kind) {
    case AggregatorKind::Gp: return std::clamp(predict_mean(std::get<GpModel>(agg.model), z), 0.0, 1.0);
    case AggregatorKind::Svr: return std::clamp(predict_svr(std::get<SvrModel>(agg.model), z), 0.0, 1.0);
    case AggregatorKind::Svc: return decision_value(std::get<SvcModel>(agg.model), z);
    case AggregatorKind::Max: break;
  }
  return 0.0;
}

}  // namespace facepain
