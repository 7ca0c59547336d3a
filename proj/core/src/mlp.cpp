#include "facepain/mlp.hpp"

#include <cmath>

#include <fmt/format.h>

namespace facepain {

void MlpConfig::validate() const {
  if (input_dim == 0) throw InvalidArgument("MlpConfig: input_dim must be positive");
  for (auto w : hidden_widths)
    if (w == 0) throw InvalidArgument("MlpConfig: hidden widths must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw InvalidArgument("MlpConfig: dropout_rate must be in [0,1)");
  if (!(learning_rate > 0.0)) throw InvalidArgument("MlpConfig: learning_rate must be positive");
  if (epochs < 1) throw InvalidArgument("MlpConfig: epochs must be >= 1");
  if (batch_size == 0) throw InvalidArgument("MlpConfig: batch_size must be >= 1");
  if (frames_per_sequence_per_epoch == 0)
    throw InvalidArgument("MlpConfig: frames_per_sequence_per_epoch must be >= 1");
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Eigen::VectorXd MlpModel::flat_parameters() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const auto& l : layers) {
    p.segment(at, l.weights.size()) = l.weights.reshaped();
    at += l.weights.size();
    p.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return p;
}

void MlpModel::set_flat_parameters(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != parameter_count())
    throw InvalidArgument("set_flat_parameters: size mismatch");
  Eigen::Index at = 0;
  for (auto& l : layers) {
    l.weights.reshaped() = p.segment(at, l.weights.size());
    at += l.weights.size();
    l.bias = p.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

MlpModel init_model(const MlpConfig& config) {
  config.validate();
  MlpModel m;
  m.config = config;
  Rng rng(derive_seed(config.seed, 0x1417));
  const std::array<std::size_t, 5> dims{config.input_dim, config.hidden_widths[0],
                                        config.hidden_widths[1], config.hidden_widths[2], 1};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto in = static_cast<Eigen::Index>(dims[i]);
    const auto out = static_cast<Eigen::Index>(dims[i + 1]);
    // He-uniform for ReLU layers, Glorot-uniform for the linear output.
    const double limit = i < 3 ? std::sqrt(6.0 / static_cast<double>(in))
                               : std::sqrt(6.0 / static_cast<double>(in + out));
    auto& l = m.layers[i];
    l.weights.resize(out, in);
    for (Eigen::Index c = 0; c < in; ++c)
      for (Eigen::Index r = 0; r < out; ++r) l.weights(r, c) = rng.uniform(-limit, limit);
    l.bias = Eigen::VectorXd::Zero(out);
  }
  return m;
}

namespace {

struct Activations {
  Eigen::MatrixXd input;
  std::array<Eigen::MatrixXd, 3> pre;     // pre-activations of hidden layers
  std::array<Eigen::MatrixXd, 3> hidden;  // post ReLU (and dropout)
  Eigen::RowVectorXd output;
};

Activations run(const MlpModel& model, const Eigen::MatrixXd& x, const DropoutMasks* masks) {
  if (static_cast<std::size_t>(x.rows()) != model.config.input_dim) {
    throw InvalidArgument(fmt::format("MLP expects {} inputs, got {}", model.config.input_dim, x.rows()));
  }
  Activations a;
  a.input = x;
  const Eigen::MatrixXd* prev = &a.input;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& l = model.layers[i];
    a.pre[i] = (l.weights * *prev).colwise() + l.bias;
    a.hidden[i] = a.pre[i].cwiseMax(0.0);
    if (masks && i == 1 && masks->layer2.size() > 0) a.hidden[i].array() *= masks->layer2.array();
    if (masks && i == 2 && masks->layer3.size() > 0) a.hidden[i].array() *= masks->layer3.array();
    prev = &a.hidden[i];
  }
  a.output = (model.layers[3].weights * *prev).array() + model.layers[3].bias(0);
  return a;
}

Eigen::MatrixXd to_columns(std::span<const float> x) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return m;
}

}  // namespace

DropoutMasks sample_masks(const MlpModel& model, std::size_t batch, Rng& rng) {
  DropoutMasks masks;
  const double p = model.config.dropout_rate;
  if (p <= 0.0) return masks;
  const double keep_scale = 1.0 / (1.0 - p);
  auto draw = [&](Eigen::Index rows) {
    Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(batch));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform() < p ? 0.0 : keep_scale;
    return m;
  };
  masks.layer2 = draw(static_cast<Eigen::Index>(model.config.hidden_widths[1]));
  masks.layer3 = draw(static_cast<Eigen::Index>(model.config.hidden_widths[2]));
  return masks;
}

double forward(const MlpModel& model, const Eigen::VectorXd& x, bool training, Rng& rng) {
  if (training && model.config.dropout_rate > 0.0) {
    const DropoutMasks masks = sample_masks(model, 1, rng);
    return run(model, x, &masks).output(0);
  }
  return run(model, x, nullptr).output(0);
}

double forward(const MlpModel& model, std::span<const float> x, bool training, Rng& rng) {
  return forward(model, Eigen::VectorXd(to_columns(x)), training, rng);
}

Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x,
                              const DropoutMasks* masks) {
  return run(model, x, masks).output.transpose();
}

MlpGradients compute_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& targets, const DropoutMasks* masks) {
  if (targets.size() != x.cols()) throw InvalidArgument("compute_gradients: target count mismatch");
  const Activations a = run(model, x, masks);
  const double batch = static_cast<double>(x.cols());
  const Eigen::RowVectorXd residual = a.output - targets.transpose();

  MlpGradients g;
  g.loss = residual.squaredNorm() / batch;

  Eigen::MatrixXd delta = (2.0 / batch) * residual;  // 1 x B, dL/d(output)
  for (int i = 3; i >= 0; --i) {
    const Eigen::MatrixXd& below = i == 0 ? a.input : a.hidden[static_cast<std::size_t>(i - 1)];
    g.layers[static_cast<std::size_t>(i)].weights = delta * below.transpose();
    g.layers[static_cast<std::size_t>(i)].bias = delta.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd up = model.layers[static_cast<std::size_t>(i)].weights.transpose() * delta;
    const auto h = static_cast<std::size_t>(i - 1);
    if (masks && h == 1 && masks->layer2.size() > 0) up.array() *= masks->layer2.array();
    if (masks && h == 2 && masks->layer3.size() > 0) up.array() *= masks->layer3.array();
    up.array() *= (a.pre[h].array() > 0.0).cast<double>();
    delta = std::move(up);
  }
  return g;
}

double train_step(MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                  double learning_rate, const DropoutMasks* masks) {
  const MlpGradients g = compute_gradients(model, x, targets, masks);
  for (std::size_t i = 0; i < 4; ++i) {
    model.layers[i].weights -= learning_rate * g.layers[i].weights;
    model.layers[i].bias -= learning_rate * g.layers[i].bias;
  }
  return g.loss;
}

std::pair<MlpModel, TrainReport> train_first_level(std::span<const SequenceSample> samples,
                                                   const MlpConfig& config) {
  std::size_t total = 0;
  for (const auto& s : samples) {
    if (s.kind != samples.front().kind) throw InvalidArgument("train_first_level: mixed feature kinds");
    total += s.size();
  }
  if (samples.empty() || total == 0) throw InvalidArgument("train_first_level: empty dataset");
  if (samples.front().dim() != config.input_dim)
    throw InvalidArgument("train_first_level: input_dim does not match the feature kind");

  MlpModel model = init_model(config);
  Rng rng(derive_seed(config.seed, 0x7A41));
  TrainReport report;
  report.seed = config.seed;
  report.config = config;

  struct Draw {
    std::size_t sample;
    std::size_t frame;
  };
  std::vector<Draw> pool;
  const auto d = static_cast<Eigen::Index>(config.input_dim);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    pool.clear();
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const std::size_t n = samples[s].size();
      if (n == 0) continue;
      for (std::size_t k = 0; k < config.frames_per_sequence_per_epoch; ++k) pool.push_back({s, rng.below(n)});
    }
    rng.shuffle(std::span<Draw>(pool));

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < pool.size(); begin += config.batch_size) {
      const std::size_t end = std::min(pool.size(), begin + config.batch_size);
      const auto b = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd x(d, b);
      Eigen::VectorXd y(b);
      for (Eigen::Index c = 0; c < b; ++c) {
        const auto& draw = pool[begin + static_cast<std::size_t>(c)];
        const auto frame = samples[draw.sample].frame(draw.frame);
        for (Eigen::Index r = 0; r < d; ++r) x(r, c) = frame[static_cast<std::size_t>(r)];
        y(c) = samples[draw.sample].label.scaled;
      }
      const DropoutMasks masks = sample_masks(model, static_cast<std::size_t>(b), rng);
      loss_sum += train_step(model, x, y, config.learning_rate, &masks) * static_cast<double>(b);
    }
    const double loss = loss_sum / static_cast<double>(pool.size());
    if (!std::isfinite(loss)) throw NumericError(fmt::format("MLP loss diverged at epoch {}", epoch + 1));
    report.epoch_loss.push_back(loss);
  }
  report.final_loss = report.epoch_loss.back();
  return {std::move(model), std::move(report)};
}

std::vector<double> predict_frames(const MlpModel& model, const SequenceSample& sample) {
  if (sample.dim() != model.config.input_dim)
    throw InvalidArgument("predict_frames: feature dimension does not match the model");
  const auto d = static_cast<Eigen::Index>(sample.dim());
  const auto n = static_cast<Eigen::Index>(sample.size());
  Eigen::MatrixXd x(d, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto f = sample.frame(static_cast<std::size_t>(c));
    for (Eigen::Index r = 0; r < d; ++r) x(r, c) = f[static_cast<std::size_t>(r)];
  }
  const Eigen::VectorXd out = forward_batch(model, x);
  return {out.data(), out.data() + out.size()};
}

double gradient_check(const MlpModel& model_in, const Eigen::VectorXd& x, double target,
                      std::optional<std::uint64_t> dropout_seed) {
  constexpr double kStep = 1e-4;
  constexpr double kKinkMargin = 1e-2;
  constexpr double kFloor = 1e-6;

  MlpModel model = model_in;
  std::optional<DropoutMasks> masks;
  if (dropout_seed) {
    Rng rng(*dropout_seed);
    masks = sample_masks(model, 1, rng);
  }
  const DropoutMasks* mp = masks ? &*masks : nullptr;

  // Move every hidden pre-activation at least kKinkMargin away from zero so
  // the finite-difference stencil never straddles a ReLU kink. The mask is
  // applied here too since it changes the pre-activations above it. Layers
  // are visited in order because nudging one shifts everything above it.
  for (std::size_t i = 0; i < 3; ++i) {
    const Activations a = run(model, x, mp);
    for (Eigen::Index u = 0; u < a.pre[i].rows(); ++u) {
      const double z = a.pre[i](u, 0);
      if (std::abs(z) < kKinkMargin) model.layers[i].bias(u) += (z >= 0.0 ? 2.0 : -2.0) * kKinkMargin;
    }
  }

  Eigen::MatrixXd xc = x;
  Eigen::VectorXd t(1);
  t(0) = target;

  const MlpGradients g = compute_gradients(model, xc, t, mp);
  Eigen::VectorXd analytic(static_cast<Eigen::Index>(model.parameter_count()));
  {
    Eigen::Index at = 0;
    for (const auto& l : g.layers) {
      analytic.segment(at, l.weights.size()) = l.weights.reshaped();
      at += l.weights.size();
      analytic.segment(at, l.bias.size()) = l.bias;
      at += l.bias.size();
    }
  }

  const Eigen::VectorXd base = model.flat_parameters();
  auto loss_at = [&](const Eigen::VectorXd& p) {
    MlpModel probe = model;
    probe.set_flat_parameters(p);
    const double f = forward_batch(probe, xc, mp)(0);
    return (f - target) * (f - target);
  };

  double worst = 0.0;
  Eigen::VectorXd p = base;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    p(i) = base(i) + kStep;
    const double up = loss_at(p);
    p(i) = base(i) - kStep;
    const double down = loss_at(p);
    p(i) = base(i);
    const double numeric = (up - down) / (2.0 * kStep);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), kFloor});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

}  // namespace facepain
