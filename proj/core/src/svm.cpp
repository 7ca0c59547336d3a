#include "facepain/svm.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "facepain/error.hpp"
#include "facepain/rng.hpp"

namespace facepain {

void KernelSpec::validate() const {
  if (type == Type::Rbf && !(gamma > 0.0)) throw InvalidArgument("RBF kernel needs gamma > 0");
}

void SolverParams::validate() const {
  if (!(C > 0.0)) throw InvalidArgument("SolverParams: C must be positive");
  if (!(tolerance > 0.0)) throw InvalidArgument("SolverParams: tolerance must be positive");
  if (max_passes < 1) throw InvalidArgument("SolverParams: max_passes must be >= 1");
}

double kernel_value(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size())
    throw InvalidArgument(fmt::format("kernel_value: dimensions {} and {} differ", a.size(), b.size()));
  if (k.type == KernelSpec::Type::Linear) return a.dot(b);
  return std::exp(-k.gamma * (a - b).squaredNorm());
}

double kernel_value(const KernelSpec& k, std::span<const double> a, std::span<const double> b) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return kernel_value(k, Map(a.data(), static_cast<Eigen::Index>(a.size())),
                      Map(b.data(), static_cast<Eigen::Index>(b.size())));
}

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd g = x * x.transpose();
  if (k.type == KernelSpec::Type::Rbf) {
    const Eigen::VectorXd sq = g.diagonal();
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        g(i, j) = i == j ? 1.0 : std::exp(-k.gamma * std::max(0.0, sq(i) + sq(j) - 2.0 * g(i, j)));
  }
  return g;
}

double svc_dual_objective(const Eigen::MatrixXd& gram, std::span<const int> y,
                          const Eigen::VectorXd& alpha) {
  const auto n = alpha.size();
  Eigen::VectorXd ya(n);
  for (Eigen::Index i = 0; i < n; ++i) ya(i) = alpha(i) * y[static_cast<std::size_t>(i)];
  return alpha.sum() - 0.5 * ya.dot(gram * ya);
}

namespace {

constexpr double kTau = 1e-12;

// Solves  min 1/2 a'Qa + p'a  s.t.  s'a = 0, 0 <= a <= C  with
// Q_ij = s_i s_j K(i mod n, j mod n), first-order maximal violating pair.
struct SmoResult {
  std::vector<double> alpha;
  std::vector<double> grad;
  double rho = 0.0;
  SolverStats stats;
};

SmoResult smo(const Eigen::MatrixXd& gram, std::span<const double> p, std::span<const double> s,
              const SolverParams& params) {
  const std::size_t l = p.size();
  const auto n = static_cast<std::size_t>(gram.rows());
  const double C = params.C;
  auto q = [&](std::size_t i, std::size_t j) {
    return s[i] * s[j] * gram(static_cast<Eigen::Index>(i % n), static_cast<Eigen::Index>(j % n));
  };

  SmoResult r;
  r.alpha.assign(l, 0.0);
  r.grad.assign(p.begin(), p.end());
  auto& alpha = r.alpha;
  auto& G = r.grad;

  std::vector<std::size_t> order(l);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(params.seed);
  rng.shuffle(std::span<std::size_t>(order));

  auto in_up = [&](std::size_t t) { return s[t] > 0 ? alpha[t] < C : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return s[t] > 0 ? alpha[t] > 0.0 : alpha[t] < C; };
  auto objective = [&] {
    double f = 0.0;
    for (std::size_t t = 0; t < l; ++t) f += alpha[t] * (G[t] + p[t]);
    return -0.5 * f;
  };

  const std::size_t max_iter = static_cast<std::size_t>(params.max_passes) * std::max<std::size_t>(l, 1);
  std::size_t iter = 0;
  while (iter < max_iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = l, j = l;
    for (std::size_t t : order) {
      const double v = -s[t] * G[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == l || j == l || gmax - gmin < params.tolerance) {
      r.stats.converged = true;
      break;
    }
    ++iter;

    const double old_i = alpha[i], old_j = alpha[j];
    const double qii = q(i, i), qjj = q(j, j), qij = q(i, j);
    if (s[i] != s[j]) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double ci = s[i] * (alpha[i] - old_i);
    const double cj = s[j] * (alpha[j] - old_j);
    // Gram is symmetric, so columns i and j are the rows we need.
    const double* ki = gram.col(static_cast<Eigen::Index>(i % n)).data();
    const double* kj = gram.col(static_cast<Eigen::Index>(j % n)).data();
    for (std::size_t t = 0; t < l; ++t) {
      const std::size_t u = t < n ? t : t - n;
      G[t] += s[t] * (ci * ki[u] + cj * kj[u]);
    }

    if (params.observer) {
      params.observer(SmoIterate{iter, alpha, s, C, objective()});
    }
  }
  r.stats.iterations = iter;
  r.stats.dual_objective = objective();

  // Offset from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < l; ++t) {
    const double yg = s[t] * G[t];
    if (alpha[t] >= C) {
      if (s[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (s[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  r.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  return r;
}

void check_finite(const Eigen::MatrixXd& x) {
  if (!x.allFinite()) throw InvalidArgument("SVM training data contains non-finite values");
}

}  // namespace

SvcDual solve_svc_dual(const Eigen::MatrixXd& x, std::span<const int> y, const SolverParams& params,
                       const KernelSpec& kernel) {
  params.validate();
  kernel.validate();
  check_finite(x);
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw InvalidArgument("train_svc: label count does not match rows");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw InvalidArgument("train_svc: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw InvalidArgument("train_svc: need examples of both classes");

  const Eigen::MatrixXd gram = gram_matrix(kernel, x);
  const std::vector<double> p(y.size(), -1.0);
  const std::vector<double> s(y.begin(), y.end());
  SmoResult r = smo(gram, p, s, params);

  SvcDual dual;
  dual.alpha = Eigen::Map<Eigen::VectorXd>(r.alpha.data(), static_cast<Eigen::Index>(r.alpha.size()));
  dual.bias = -r.rho;
  dual.stats = r.stats;
  return dual;
}

SvcModel train_svc(const Eigen::MatrixXd& x, std::span<const int> y, const SolverParams& params,
                   const KernelSpec& kernel) {
  const SvcDual dual = solve_svc_dual(x, y, params, kernel);
  SvcModel m;
  m.kernel = kernel;
  m.C = params.C;
  m.bias = dual.bias;
  m.stats = dual.stats;
  for (Eigen::Index i = 0; i < dual.alpha.size(); ++i)
    if (dual.alpha(i) > 0.0) m.support_indices.push_back(static_cast<std::size_t>(i));
  const auto k = static_cast<Eigen::Index>(m.support_indices.size());
  m.support_vectors.resize(k, x.cols());
  m.dual_coefficients.resize(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto src = static_cast<Eigen::Index>(m.support_indices[static_cast<std::size_t>(r)]);
    m.support_vectors.row(r) = x.row(src);
    m.dual_coefficients(r) = dual.alpha(src) * y[static_cast<std::size_t>(src)];
  }
  return m;
}

namespace {

template <typename Model>
double expand(const Model& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (m.support_vectors.rows() > 0 && x.size() != m.support_vectors.cols())
    throw InvalidArgument(fmt::format("SVM expects {} features, got {}", m.support_vectors.cols(), x.size()));
  double f = m.bias;
  for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r)
    f += m.dual_coefficients(r) * kernel_value(m.kernel, m.support_vectors.row(r).transpose(), x);
  return f;
}

}  // namespace

double decision_value(const SvcModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return expand(model, x);
}

double decision_value(const SvcModel& model, std::span<const double> x) {
  return expand(model, Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
}

SvrModel train_svr(const Eigen::MatrixXd& x, std::span<const double> y, const SolverParams& params,
                   double epsilon, const KernelSpec& kernel) {
  params.validate();
  kernel.validate();
  check_finite(x);
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw InvalidArgument("train_svr: target count does not match rows");
  if (y.size() < 2) throw InvalidArgument("train_svr: need at least two examples");
  if (!(epsilon >= 0.0)) throw InvalidArgument("train_svr: epsilon must be >= 0");
  for (double v : y)
    if (!std::isfinite(v)) throw InvalidArgument("train_svr: non-finite target");

  const std::size_t n = y.size();
  const Eigen::MatrixXd gram = gram_matrix(kernel, x);
  std::vector<double> p(2 * n), s(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = epsilon - y[i];
    s[i] = 1.0;
    p[i + n] = epsilon + y[i];
    s[i + n] = -1.0;
  }
  const SmoResult r = smo(gram, p, s, params);

  SvrModel m;
  m.kernel = kernel;
  m.C = params.C;
  m.epsilon = epsilon;
  m.bias = -r.rho;
  m.stats = r.stats;
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i) {
    coef[i] = r.alpha[i] - r.alpha[i + n];
    if (coef[i] != 0.0) m.support_indices.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(m.support_indices.size());
  m.support_vectors.resize(k, x.cols());
  m.dual_coefficients.resize(k);
  for (Eigen::Index row = 0; row < k; ++row) {
    const auto src = m.support_indices[static_cast<std::size_t>(row)];
    m.support_vectors.row(row) = x.row(static_cast<Eigen::Index>(src));
    m.dual_coefficients(row) = coef[src];
  }
  return m;
}

double predict_svr(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return expand(model, x);
}

double predict_svr(const SvrModel& model, std::span<const double> x) {
  return expand(model, Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
}

}  // namespace facepain
