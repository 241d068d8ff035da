#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace netcpd {

// Group Lasso reparameterisation of the fused problem
//   min_{gamma,beta}  lambda sum_t ||beta_t||_2 + kappa/2 ||M - 1 gamma - X beta||_F^2
// with the T x (T-1) design X_ij = 1 for i > j. The slack is recovered as
// nu = 1 gamma + X beta, so gamma = nu^1 and beta_t = nu^{t+1} - nu^t.
// X is never materialised: X_{.,t}^T v is a suffix sum and X_{.,t}^T X_{.,t} = T - t.
struct GflProblem {
  Eigen::MatrixXd target;  // M, T x d
  double lambda = 0.0;
  double kappa = 1.0;

  int horizon() const { return static_cast<int>(target.rows()); }
  int dim() const { return static_cast<int>(target.cols()); }
};

struct GflSolution {
  Eigen::RowVectorXd gamma;  // 1 x d
  Eigen::MatrixXd beta;      // (T-1) x d
  double kkt = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  std::vector<double> objective_trace;  // one entry per completed sweep

  static GflSolution zeros(int T, int d) {
    GflSolution s;
    s.gamma = Eigen::RowVectorXd::Zero(d);
    s.beta = Eigen::MatrixXd::Zero(T - 1, d);
    return s;
  }

  Eigen::MatrixXd reconstruct() const {
    const int T = static_cast<int>(beta.rows()) + 1;
    Eigen::MatrixXd nu(T, gamma.cols());
    nu.row(0) = gamma;
    for (int t = 1; t < T; ++t) nu.row(t) = nu.row(t - 1) + beta.row(t - 1);
    return nu;
  }
};

inline void validate(const GflProblem& p) {
  if (p.horizon() < 2) throw std::invalid_argument("gfl target needs at least 2 rows");
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda))
    throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(p.kappa > 0.0) || !std::isfinite(p.kappa))
    throw std::invalid_argument("kappa must be finite and > 0");
}

// X_{.,t}^T X_{.,t} for the implicit design; t is 1-based in [1, T-1].
inline int design_column_dot(int T, int t) {
  if (t < 1 || t > T - 1)
    throw std::out_of_range("design column " + std::to_string(t) + " outside [1," +
                            std::to_string(T - 1) + "]");
  return T - t;
}

namespace detail {

// Residual M - 1 gamma - X beta.
inline Eigen::MatrixXd gfl_residual(const GflProblem& p, const Eigen::RowVectorXd& gamma,
                                    const Eigen::MatrixXd& beta) {
  const int T = p.horizon();
  Eigen::MatrixXd res(T, p.dim());
  Eigen::RowVectorXd prefix = gamma;  // row t of 1 gamma + X beta
  res.row(0) = p.target.row(0) - prefix;
  for (int t = 1; t < T; ++t) {
    prefix += beta.row(t - 1);
    res.row(t) = p.target.row(t) - prefix;
  }
  return res;
}

inline Eigen::RowVectorXd shrink(const Eigen::RowVectorXd& b, double lambda, double denom) {
  const double norm = b.norm();
  if (norm <= lambda || norm == 0.0) return Eigen::RowVectorXd::Zero(b.cols());
  return ((1.0 - lambda / norm) / denom) * b;
}

}  // namespace detail

inline double gfl_objective(const GflProblem& p, const Eigen::RowVectorXd& gamma,
                            const Eigen::MatrixXd& beta) {
  double penalty = 0.0;
  for (int t = 0; t < beta.rows(); ++t) penalty += beta.row(t).norm();
  const double fit = detail::gfl_residual(p, gamma, beta).squaredNorm();
  return p.lambda * penalty + 0.5 * p.kappa * fit;
}

// b_t = kappa X_{.,t}^T (M - 1 gamma - X_{.,-t} beta_{-t}); t is 1-based.
inline Eigen::RowVectorXd beta_block_target(const GflProblem& p, const Eigen::RowVectorXd& gamma,
                                            const Eigen::MatrixXd& beta, int t) {
  const int T = p.horizon();
  design_column_dot(T, t);  // range check
  const Eigen::MatrixXd res = detail::gfl_residual(p, gamma, beta);
  Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(p.dim());
  for (int i = t; i < T; ++i) suffix += res.row(i);
  return p.kappa * (suffix + static_cast<double>(T - t) * beta.row(t - 1));
}

// Block update of Proposition 2: (1/(kappa (T-t))) (1 - lambda/||b_t||)_+ b_t,
// exactly zero when ||b_t||_2 <= lambda.
inline Eigen::RowVectorXd update_beta_row(const GflProblem& p, const Eigen::RowVectorXd& gamma,
                                          const Eigen::MatrixXd& beta, int t) {
  const Eigen::RowVectorXd b = beta_block_target(p, gamma, beta, t);
  return detail::shrink(b, p.lambda, p.kappa * design_column_dot(p.horizon(), t));
}

// gamma = (1/T) 1^T (M - X beta).
inline Eigen::RowVectorXd update_gamma(const GflProblem& p, const Eigen::MatrixXd& beta) {
  const int T = p.horizon();
  Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(p.dim());
  Eigen::RowVectorXd prefix = Eigen::RowVectorXd::Zero(p.dim());
  total += p.target.row(0);
  for (int t = 1; t < T; ++t) {
    prefix += beta.row(t - 1);
    total += p.target.row(t) - prefix;
  }
  return total / static_cast<double>(T);
}

// max over blocks of the stationarity violation:
//   beta_t != 0:  || lambda beta_t/||beta_t|| - g_t ||_2
//   beta_t == 0:  ( ||g_t|| - lambda )_+
// with g_t = kappa X_{.,t}^T (M - 1 gamma - X beta).
inline double kkt_residual(const GflProblem& p, const GflSolution& sol) {
  const int T = p.horizon();
  const Eigen::MatrixXd res = detail::gfl_residual(p, sol.gamma, sol.beta);
  Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(p.dim());
  double worst = 0.0;
  for (int t = T - 1; t >= 1; --t) {
    suffix += res.row(t);
    const Eigen::RowVectorXd g = p.kappa * suffix;
    const double beta_norm = sol.beta.row(t - 1).norm();
    double violation;
    if (beta_norm > 0.0) {
      violation = (p.lambda / beta_norm * sol.beta.row(t - 1) - g).norm();
    } else {
      violation = std::max(g.norm() - p.lambda, 0.0);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

// Block coordinate descent: full ascending beta sweep then a gamma update,
// until the KKT residual reaches tol or max_sweeps is exhausted. Each sweep
// costs O(T d) via running suffix sums of the residual.
inline GflSolution solve(const GflProblem& p, GflSolution init, int max_sweeps, double tol) {
  validate(p);
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
  const int T = p.horizon();
  const int d = p.dim();
  GflSolution sol = std::move(init);
  if (sol.beta.rows() != T - 1 || sol.beta.cols() != d || sol.gamma.cols() != d)
    sol = GflSolution::zeros(T, d);
  sol.objective_trace.clear();

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Eigen::MatrixXd res = detail::gfl_residual(p, sol.gamma, sol.beta);
    // suffix[t] = sum_{i > t} of the pre-sweep residual rows (1-based t)
    Eigen::MatrixXd suffix = Eigen::MatrixXd::Zero(T, d);
    for (int i = T - 1; i >= 1; --i) suffix.row(i - 1) = suffix.row(i) + res.row(i);
    Eigen::RowVectorXd applied = Eigen::RowVectorXd::Zero(d);  // sum of beta changes so far
    for (int t = 1; t <= T - 1; ++t) {
      const double cols = static_cast<double>(T - t);
      const Eigen::RowVectorXd current_suffix = suffix.row(t - 1) - cols * applied;
      const Eigen::RowVectorXd b = p.kappa * (current_suffix + cols * sol.beta.row(t - 1));
      const Eigen::RowVectorXd updated = detail::shrink(b, p.lambda, p.kappa * cols);
      applied += updated - sol.beta.row(t - 1);
      sol.beta.row(t - 1) = updated;
    }
    sol.gamma = update_gamma(p, sol.beta);
    sol.sweeps = sweep + 1;
    sol.objective_trace.push_back(gfl_objective(p, sol.gamma, sol.beta));
    sol.kkt = kkt_residual(p, sol);
    if (sol.kkt <= tol) break;
  }
  return sol;
}

}  // namespace netcpd
