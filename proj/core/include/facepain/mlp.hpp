#pragma once

// First-level frame regressor: four fully-connected layers (three ReLU hidden
// layers, linear scalar output), inverted dropout after hidden layers 2 and 3,
// trained with minibatch gradient descent on MSE against weak (sequence) labels.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "facepain/features.hpp"
#include "facepain/rng.hpp"

namespace facepain {

struct MlpConfig {
  std::size_t input_dim = feature_dim(FeatureKind::BlendShapes);
  std::array<std::size_t, 3> hidden_widths{200, 100, 50};
  double dropout_rate = 0.5;
  double learning_rate = 1e-3;
  int epochs = 50;
  std::size_t batch_size = 64;
  std::size_t frames_per_sequence_per_epoch = 16;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out

  bool operator==(const DenseLayer& o) const { return weights == o.weights && bias == o.bias; }
};

struct MlpModel {
  MlpConfig config;
  std::array<DenseLayer, 4> layers;

  std::size_t parameter_count() const;
  /// All weights then biases, layer by layer.
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& p);

  bool operator==(const MlpModel&) const = default;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  MlpConfig config;

  bool operator==(const TrainReport&) const = default;
};

/// Dropout keep-masks for hidden layers 2 and 3 (1 = keep). Empty = no dropout.
struct DropoutMasks {
  Eigen::MatrixXd layer2;
  Eigen::MatrixXd layer3;
};

MlpModel init_model(const MlpConfig& config);

/// Single-frame forward pass. `rng` is only drawn from when `training` is set.
double forward(const MlpModel& model, std::span<const float> x, bool training, Rng& rng);
double forward(const MlpModel& model, const Eigen::VectorXd& x, bool training, Rng& rng);

/// Batched inference: columns of `x` are frames.
Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x,
                              const DropoutMasks* masks = nullptr);

DropoutMasks sample_masks(const MlpModel& model, std::size_t batch, Rng& rng);

struct MlpGradients {
  double loss = 0.0;
  std::array<DenseLayer, 4> layers;
};

/// Mean squared error over the batch and its gradient w.r.t. every parameter.
MlpGradients compute_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& targets, const DropoutMasks* masks = nullptr);

/// One gradient-descent update; returns the pre-update loss.
double train_step(MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                  double learning_rate, const DropoutMasks* masks = nullptr);

std::pair<MlpModel, TrainReport> train_first_level(std::span<const SequenceSample> samples,
                                                   const MlpConfig& config);

std::vector<double> predict_frames(const MlpModel& model, const SequenceSample& sample);

/// Max relative error between backprop and central finite differences
/// (step 1e-4) over every parameter, for the loss (f(x) - target)^2.
/// Hidden units whose pre-activation sits within 1e-2 of the ReLU kink are
/// nudged off it first. With `dropout_seed` a fixed training-mode mask is used.
double gradient_check(const MlpModel& model, const Eigen::VectorXd& x, double target,
                      std::optional<std::uint64_t> dropout_seed = std::nullopt);

}  // namespace facepain
