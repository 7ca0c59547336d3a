#pragma once

// Soft-margin support vector classification and epsilon-regression solved by
// sequential minimal optimization over a full Gram matrix.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace facepain {

struct KernelSpec {
  enum class Type { Linear, Rbf };

  Type type = Type::Linear;
  double gamma = 1.0;  // Rbf only

  static KernelSpec linear() { return {Type::Linear, 1.0}; }
  static KernelSpec rbf(double gamma) { return {Type::Rbf, gamma}; }

  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

double kernel_value(const KernelSpec& k, std::span<const double> a, std::span<const double> b);
double kernel_value(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b);

/// Snapshot handed to SolverParams::observer after every pair update.
struct SmoIterate {
  std::size_t iteration = 0;
  std::span<const double> alpha;
  std::span<const double> signs;  // +1 / -1 per dual variable
  double upper_bound = 0.0;
  double dual_objective = 0.0;    // maximization form
};

struct SolverParams {
  double C = 1.0;
  double tolerance = 1e-3;  // maximal KKT violation at termination
  int max_passes = 100;     // iteration cap = max_passes * number of dual variables
  std::uint64_t seed = 0;   // tie-breaking order in working-set selection
  std::function<void(const SmoIterate&)> observer;

  void validate() const;
};

struct SolverStats {
  std::size_t iterations = 0;
  bool converged = false;
  double dual_objective = 0.0;
};

struct SvcModel {
  Eigen::MatrixXd support_vectors;    // rows
  Eigen::VectorXd dual_coefficients;  // alpha_i * y_i
  double bias = 0.0;
  KernelSpec kernel;
  double C = 1.0;
  std::vector<std::size_t> support_indices;  // rows of the training matrix
  SolverStats stats;
};

struct SvrModel {
  Eigen::MatrixXd support_vectors;
  Eigen::VectorXd dual_coefficients;  // alpha_i - alpha_i^*
  double bias = 0.0;
  KernelSpec kernel;
  double C = 1.0;
  double epsilon = 0.0;
  std::vector<std::size_t> support_indices;
  SolverStats stats;
};

/// Full dual solution for a classification problem, kept for oracle checks.
struct SvcDual {
  Eigen::VectorXd alpha;
  double bias = 0.0;
  SolverStats stats;
};

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& x);

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
double svc_dual_objective(const Eigen::MatrixXd& gram, std::span<const int> y,
                          const Eigen::VectorXd& alpha);

SvcDual solve_svc_dual(const Eigen::MatrixXd& x, std::span<const int> y, const SolverParams& params,
                       const KernelSpec& kernel);

/// `x` holds one example per row; labels are +1 / -1.
SvcModel train_svc(const Eigen::MatrixXd& x, std::span<const int> y, const SolverParams& params,
                   const KernelSpec& kernel);
double decision_value(const SvcModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double decision_value(const SvcModel& model, std::span<const double> x);

SvrModel train_svr(const Eigen::MatrixXd& x, std::span<const double> y, const SolverParams& params,
                   double epsilon, const KernelSpec& kernel);
double predict_svr(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_svr(const SvrModel& model, std::span<const double> x);

}  // namespace facepain
