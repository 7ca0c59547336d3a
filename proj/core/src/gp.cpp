#include "facepain/gp.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "facepain/error.hpp"

namespace facepain {

void GpHyper::validate(std::size_t dim) const {
  if (length_scales.size() != dim)
    throw InvalidArgument(fmt::format("GP expects {} length scales, got {}", dim, length_scales.size()));
  for (double l : length_scales)
    if (!(l > 0.0)) throw InvalidArgument("GP length scales must be positive");
  if (!(signal_variance > 0.0)) throw InvalidArgument("GP signal variance must be positive");
  if (!(noise_variance >= 0.0)) throw InvalidArgument("GP noise variance must be >= 0");
}

double ard_kernel(const GpHyper& hyper, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() != hyper.length_scales.size())
    throw InvalidArgument("ard_kernel: dimension mismatch");
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double z = (a[d] - b[d]) / hyper.length_scales[d];
    r2 += z * z;
  }
  return hyper.signal_variance * std::exp(-0.5 * r2);
}

Eigen::MatrixXd ard_gram(const GpHyper& hyper, const Eigen::MatrixXd& x) {
  const auto m = x.rows();
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    k(j, j) = hyper.signal_variance;
    for (Eigen::Index i = j + 1; i < m; ++i) {
      double r2 = 0.0;
      for (Eigen::Index d = 0; d < x.cols(); ++d) {
        const double z = (x(i, d) - x(j, d)) / hyper.length_scales[static_cast<std::size_t>(d)];
        r2 += z * z;
      }
      k(i, j) = k(j, i) = hyper.signal_variance * std::exp(-0.5 * r2);
    }
  }
  return k;
}

namespace {

constexpr std::array<double, 6> kJitterLadder = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

// Factorizes K + noise I + jitter I, escalating jitter (relative to the
// signal variance) until the Cholesky succeeds.
double factorize(const Eigen::MatrixXd& k, const GpHyper& hyper, Eigen::LLT<Eigen::MatrixXd>& llt) {
  for (double rel : kJitterLadder) {
    const double jitter = rel * hyper.signal_variance;
    Eigen::MatrixXd a = k;
    a.diagonal().array() += hyper.noise_variance + jitter;
    llt.compute(a);
    if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
      return jitter;
  }
  throw NumericError("GP kernel matrix is not positive definite after jitter escalation");
}

Eigen::VectorXd kernel_row(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.inputs.cols())
    throw InvalidArgument(fmt::format("GP expects {} inputs, got {}", model.inputs.cols(), x.size()));
  Eigen::VectorXd k(model.inputs.rows());
  for (Eigen::Index i = 0; i < model.inputs.rows(); ++i) {
    double r2 = 0.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      const double z = (model.inputs(i, d) - x(d)) / model.hyper.length_scales[static_cast<std::size_t>(d)];
      r2 += z * z;
    }
    k(i) = model.hyper.signal_variance * std::exp(-0.5 * r2);
  }
  return k;
}

}  // namespace

double log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const GpHyper& hyper, Eigen::VectorXd* grad, double jitter) {
  hyper.validate(static_cast<std::size_t>(x.cols()));
  const auto m = x.rows();
  const Eigen::MatrixXd k = ard_gram(hyper, x);
  Eigen::MatrixXd a = k;
  a.diagonal().array() += hyper.noise_variance + jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError("GP kernel matrix is not positive definite");

  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(alpha) - 0.5 * log_det -
                     0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi);

  if (grad) {
    const auto d = x.cols();
    grad->setZero(d + 2);
    // W = alpha alpha' - A^-1; dLML/dtheta = 1/2 tr(W dA/dtheta)
    const Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(m, m));
    for (Eigen::Index dim = 0; dim < d; ++dim) {
      const double l2 = hyper.length_scales[static_cast<std::size_t>(dim)] *
                        hyper.length_scales[static_cast<std::size_t>(dim)];
      double g = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < m; ++i) {
          const double diff = x(i, dim) - x(j, dim);
          g += w(i, j) * k(i, j) * diff * diff / l2;
        }
      (*grad)(dim) = 0.5 * g;
    }
    (*grad)(d) = 0.5 * (w.array() * k.array()).sum();
    (*grad)(d + 1) = hyper.noise_variance > 0.0 ? 0.5 * hyper.noise_variance * w.trace() : 0.0;
  }
  return lml;
}

GpModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& init,
            const GpFitOptions& options) {
  if (x.rows() < 1) throw InvalidArgument("GP fit needs at least one example");
  if (x.rows() != y.size()) throw InvalidArgument("GP fit: target count does not match rows");
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("GP fit: non-finite inputs");
  init.validate(static_cast<std::size_t>(x.cols()));

  GpModel model;
  model.inputs = x;
  model.targets = y;
  model.target_mean = y.mean();
  model.hyper = init;
  const Eigen::VectorXd yc = y.array() - model.target_mean;

  if (options.optimize) {
    const auto d = x.cols();
    const bool fit_noise = init.noise_variance > 0.0;
    auto pack = [&](const GpHyper& h) {
      Eigen::VectorXd t(d + 2);
      for (Eigen::Index i = 0; i < d; ++i) t(i) = std::log(h.length_scales[static_cast<std::size_t>(i)]);
      t(d) = std::log(h.signal_variance);
      t(d + 1) = fit_noise ? std::log(h.noise_variance) : 0.0;
      return t;
    };
    auto unpack = [&](const Eigen::VectorXd& t) {
      GpHyper h = init;
      for (Eigen::Index i = 0; i < d; ++i) h.length_scales[static_cast<std::size_t>(i)] = std::exp(t(i));
      h.signal_variance = std::exp(t(d));
      if (fit_noise) h.noise_variance = std::exp(t(d + 1));
      return h;
    };
    // Keep log-parameters in a range where the Cholesky stays well posed.
    auto clamp = [&](Eigen::VectorXd t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = std::clamp(t(i), -9.0, 9.0);
      if (fit_noise) t(d + 1) = std::clamp(t(d + 1), -18.0, 4.0);
      return t;
    };
    auto evaluate = [&](const Eigen::VectorXd& t, Eigen::VectorXd* g) -> double {
      try {
        return log_marginal_likelihood(x, yc, unpack(t), g);
      } catch (const NumericError&) {
        return -std::numeric_limits<double>::infinity();
      }
    };

    Eigen::VectorXd theta = clamp(pack(init));
    Eigen::VectorXd g;
    double current = evaluate(theta, &g);
    double step = 0.1;
    int taken = 0;
    for (int it = 0; it < options.steps && std::isfinite(current); ++it) {
      if (!fit_noise) g(d + 1) = 0.0;
      if (g.norm() < 1e-9) break;
      const Eigen::VectorXd dir = g / std::max(1.0, g.norm());
      bool accepted = false;
      for (int halvings = 0; halvings < 30; ++halvings, step *= 0.5) {
        const Eigen::VectorXd candidate = clamp(theta + step * dir);
        Eigen::VectorXd cg;
        const double value = evaluate(candidate, &cg);
        if (value > current) {
          theta = candidate;
          current = value;
          g = cg;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      ++taken;
      step *= 2.0;
    }
    model.hyper = unpack(theta);
    model.optimizer_steps = taken;
  }

  model.jitter = factorize(ard_gram(model.hyper, x), model.hyper, model.cholesky);
  model.weights = model.cholesky.solve(yc);
  model.log_marginal_likelihood = log_marginal_likelihood(x, yc, model.hyper, nullptr, model.jitter);
  return model;
}

double predict_mean(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.target_mean + kernel_row(model, x).dot(model.weights);
}

double predict_mean(const GpModel& model, std::span<const double> x) {
  return predict_mean(model, Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
}

double predict_variance(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::VectorXd k = kernel_row(model, x);
  const Eigen::VectorXd v = model.cholesky.matrixL().solve(k);
  return std::max(0.0, model.hyper.signal_variance - v.squaredNorm());
}

}  // namespace facepain
