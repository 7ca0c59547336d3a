#include <cmath>

#include <gtest/gtest.h>

#include "facepain/error.hpp"
#include "facepain/gp.hpp"

#include "support/oracles.hpp"

using namespace facepain;

TEST(ArdKernel, ClosedForms) {
  const GpHyper h{{1.0, 1.0}, 2.0, 0.0};
  const std::vector<double> a = {1.0, 0.0};
  const std::vector<double> b = {0.0, 1.0};
  EXPECT_DOUBLE_EQ(ard_kernel(h, a, a), 2.0);
  const GpHyper unit{{1.0, 1.0}, 1.0, 0.0};
  EXPECT_NEAR(ard_kernel(unit, a, b), std::exp(-1.0), 1e-15);
  const GpHyper wide{{1.0, 1e12}, 1.0, 0.0};
  const GpHyper one_d{{1.0}, 1.0, 0.0};
  EXPECT_NEAR(ard_kernel(wide, a, b), ard_kernel(one_d, std::vector<double>{1.0}, std::vector<double>{0.0}), 1e-12);
}

TEST(Gp, SinglePointInterpolation) {
  Eigen::MatrixXd x(1, 2);
  x << 0.3, -0.4;
  Eigen::VectorXd y(1);
  y << 1.7;
  const GpModel m = fit(x, y, GpHyper{{1.0, 1.0}, 1.0, 0.0}, false);
  EXPECT_NEAR(predict_mean(m, Eigen::VectorXd(x.row(0))), 1.7, 1e-10);
}

TEST(Gp, ZeroTargetsPredictZero) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 2);
  const GpModel m = fit(x, Eigen::VectorXd::Zero(5), GpHyper{{1.0, 1.0}, 1.0, 0.1}, false);
  EXPECT_EQ(predict_mean(m, Eigen::VectorXd::Constant(2, 0.2)), 0.0);
}

TEST(Gp, FarFieldReturnsTrainingMean) {
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 1.0, 2.0;
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 6.0;
  const GpModel m = fit(x, y, GpHyper{{0.5}, 1.0, 0.01}, false);
  EXPECT_NEAR(predict_mean(m, Eigen::VectorXd::Constant(1, 1e3)), 3.0, 1e-12);
  EXPECT_NEAR(predict_variance(m, Eigen::VectorXd::Constant(1, 1e3)), 1.0, 1e-12);
}

TEST(Gp, ThreePointDenseOracle) {
  Eigen::MatrixXd x(3, 1);
  x << -1.0, 0.2, 1.5;
  Eigen::VectorXd y(3);
  y << 0.5, -0.3, 1.1;
  const GpHyper h{{0.8}, 1.3, 0.05};
  const GpModel m = fit(x, y, h, false);
  for (double q : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
    const Eigen::VectorXd query = Eigen::VectorXd::Constant(1, q);
    EXPECT_NEAR(predict_mean(m, query), oracle::gp_mean_dense(x, y, h.length_scales, 1.3, 0.05, query), 1e-8);
  }
}

TEST(Gp, GradientMatchesFiniteDifferences) {
  Eigen::MatrixXd x(6, 2);
  x << 0.1, 0.5, -0.3, 1.2, 0.8, -0.7, 1.5, 0.3, -1.1, -0.4, 0.4, 0.9;
  Eigen::VectorXd y(6);
  y << 0.2, -0.1, 0.4, 0.9, -0.6, 0.1;
  const GpHyper h{{0.7, 1.4}, 0.9, 0.2};
  Eigen::VectorXd g;
  log_marginal_likelihood(x, y, h, &g);
  ASSERT_EQ(g.size(), 4);
  const double step = 1e-5;
  for (Eigen::Index k = 0; k < 4; ++k) {
    auto at = [&](double delta) {
      GpHyper s = h;
      if (k < 2) s.length_scales[static_cast<std::size_t>(k)] *= std::exp(delta);
      else if (k == 2) s.signal_variance *= std::exp(delta);
      else s.noise_variance *= std::exp(delta);
      return log_marginal_likelihood(x, y, s);
    };
    const double fd = (at(step) - at(-step)) / (2 * step);
    EXPECT_LT(std::abs(fd - g(k)) / std::max(std::abs(fd), 1e-3), 1e-5) << "parameter " << k;
  }
}

TEST(Gp, OptimizationDoesNotLowerLikelihood) {
  Eigen::MatrixXd x(12, 1);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    x(i, 0) = i * 0.3;
    y(i) = std::sin(x(i, 0));
  }
  const GpHyper init{{3.0}, 0.5, 0.1};
  const GpModel fixed = fit(x, y, init, false);
  const GpModel tuned = fit(x, y, init, true);
  EXPECT_GE(tuned.log_marginal_likelihood, fixed.log_marginal_likelihood);
  EXPECT_GT(tuned.optimizer_steps, 0);
}

TEST(Gp, DuplicateInputsNeedJitter) {
  Eigen::MatrixXd x(3, 1);
  x << 0.5, 0.5, 0.5;
  const GpModel m = fit(x, Eigen::VectorXd::Constant(3, 1.0), GpHyper{{1.0}, 1.0, 0.0}, false);
  EXPECT_GT(m.jitter, 0.0);
  EXPECT_NEAR(predict_mean(m, Eigen::VectorXd::Constant(1, 0.5)), 1.0, 1e-6);
}

TEST(Gp, InvalidHyperparameters) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(fit(x, Eigen::VectorXd::Zero(2), GpHyper{{1.0}, 1.0, 0.0}, false), InvalidArgument);
  EXPECT_THROW(fit(x, Eigen::VectorXd::Zero(2), GpHyper{{1.0, -1.0}, 1.0, 0.0}, false), InvalidArgument);
  EXPECT_THROW(fit(x, Eigen::VectorXd::Zero(3), GpHyper{{1.0, 1.0}, 1.0, 0.0}, false), InvalidArgument);
}
