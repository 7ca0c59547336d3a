#pragma once

// Gaussian-process regression with an RBF-ARD kernel, zero mean function on
// centred targets, Cholesky-cached posterior, and optional ML-II fitting of the
// hyperparameters by gradient ascent in log space.

#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace facepain {

struct GpHyper {
  std::vector<double> length_scales;  // one per input dimension
  double signal_variance = 1.0;
  double noise_variance = 0.0;

  void validate(std::size_t dim) const;
  bool operator==(const GpHyper&) const = default;
};

double ard_kernel(const GpHyper& hyper, std::span<const double> a, std::span<const double> b);

struct GpModel {
  Eigen::MatrixXd inputs;   // m x d
  Eigen::VectorXd targets;  // as given
  double target_mean = 0.0;
  GpHyper hyper;
  double jitter = 0.0;      // added to the diagonal to factorize
  Eigen::LLT<Eigen::MatrixXd> cholesky;
  Eigen::VectorXd weights;  // (K + noise I + jitter I)^-1 (y - mean)
  double log_marginal_likelihood = 0.0;
  int optimizer_steps = 0;
};

Eigen::MatrixXd ard_gram(const GpHyper& hyper, const Eigen::MatrixXd& x);

/// Log marginal likelihood of centred targets `y`. When `grad` is given it
/// receives d/d(log l_1..log l_d, log signal_variance, log noise_variance);
/// the noise entry is 0 when noise_variance == 0.
double log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const GpHyper& hyper, Eigen::VectorXd* grad = nullptr,
                               double jitter = 0.0);

struct GpFitOptions {
  bool optimize = false;
  int steps = 100;
};

GpModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& init,
            const GpFitOptions& options = {});
inline GpModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& init,
                   bool optimize) {
  return fit(x, y, init, GpFitOptions{optimize, 100});
}

double predict_mean(const GpModel& model, std::span<const double> x);
double predict_mean(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Latent posterior variance (noise excluded).
double predict_variance(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace facepain
