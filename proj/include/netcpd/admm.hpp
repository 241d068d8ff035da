#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netcpd/decoder.hpp"
#include "netcpd/gfl.hpp"
#include "netcpd/graph.hpp"
#include "netcpd/langevin.hpp"
#include "netcpd/parallel.hpp"
#include "netcpd/random.hpp"

namespace netcpd {

struct AdmmConfig {
  double lambda = 50.0;
  double kappa0 = 10.0;
  int iterations = 50;         // A
  int decoder_steps = 20;      // B
  int bcd_sweeps = 20;         // D
  double learning_rate = 0.01; // eta for Adam
  double stop_tol = 1e-5;      // eps_tol of the relative log-likelihood change
  int patience = 5;            // a': consecutive quiet iterations before stopping
  double kkt_tol = 1e-6;
  LangevinConfig langevin;
  DecoderConfig decoder;
  std::uint64_t seed = 1;
  int threads = 0;
  bool adapt_penalty = true;       // test hook: freeze kappa when false
  bool disable_likelihood = false; // test hook: prior-only sampling, no decoder updates
};

inline void validate(const AdmmConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(cfg.kappa0 > 0.0)) throw std::invalid_argument("kappa0 must be > 0");
  if (cfg.iterations < 1 || cfg.decoder_steps < 1 || cfg.bcd_sweeps < 1 || cfg.patience < 1)
    throw std::invalid_argument("iteration counts must be >= 1");
  if (!(cfg.stop_tol > 0.0)) throw std::invalid_argument("stopping tolerance must be > 0");
  validate(cfg.langevin);
}

struct AdmmDiagnosticsRow {
  int iteration = 0;
  double r_primal = 0.0;
  double r_dual = 0.0;
  double kappa = 0.0;
  double approx_log_lik = 0.0;
};

struct FitResult {
  Eigen::MatrixXd mu;
  DecoderParameters phi;
  GflSolution gfl;
  std::vector<AdmmDiagnosticsRow> trace;
  int iterations_run = 0;
  bool converged = false;
};

// Proposition 1 closed form, applied row-wise:
//   mu^t = 1/(1+kappa) E[z^t|y^t] + kappa/(1+kappa) (nu^t - w^t).
inline Eigen::MatrixXd update_mu(const Eigen::MatrixXd& posterior_means,
                                 const Eigen::MatrixXd& nu, const Eigen::MatrixXd& w,
                                 double kappa) {
  if (posterior_means.rows() != nu.rows() || posterior_means.cols() != nu.cols() ||
      nu.rows() != w.rows() || nu.cols() != w.cols())
    throw std::invalid_argument("shape mismatch in mu update");
  if (!posterior_means.allFinite()) throw std::runtime_error("non-finite posterior means");
  return (posterior_means + kappa * (nu - w)) / (1.0 + kappa);
}

// Scaled dual ascent: w <- w + mu - nu.
inline Eigen::MatrixXd update_dual(const Eigen::MatrixXd& w, const Eigen::MatrixXd& mu,
                                   const Eigen::MatrixXd& nu) {
  return w + mu - nu;
}

// Root-mean-square primal (mu - nu) and dual (nu - nu_prev) residuals.
inline std::pair<double, double> residuals(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& nu,
                                           const Eigen::MatrixXd& nu_prev) {
  const double scale = static_cast<double>(mu.rows()) * static_cast<double>(mu.cols());
  const double primal = std::sqrt((mu - nu).squaredNorm() / scale);
  const double dual = std::sqrt((nu - nu_prev).squaredNorm() / scale);
  return {primal, dual};
}

// Joint penalty/dual rescaling: double kappa (halve w) when the primal
// residual dominates by 10x, halve kappa (double w) in the opposite case.
inline void adapt_kappa(double& kappa, Eigen::MatrixXd& w, double r_primal, double r_dual) {
  if (r_primal > 10.0 * r_dual) {
    kappa *= 2.0;
    w *= 0.5;
  } else if (r_dual > 10.0 * r_primal) {
    kappa *= 0.5;
    w *= 2.0;
  }
}

// Monte Carlo marginal log-likelihood with prior samples and log-sum-exp
// stabilisation: sum_t { C^t + log sum_u exp(log P(y^t|z_u) - C^t) } - T log s.
// Row t of mu_rows provides the prior mean paired with graph t.
inline double marginal_log_likelihood(const DecoderParameters& phi, const GraphSequence& graphs,
                                      const Eigen::MatrixXd& mu_rows, int num_samples,
                                      std::uint64_t seed, int threads = 0) {
  const int T = graphs.length();
  if (mu_rows.rows() < T)
    throw std::invalid_argument("prior mean rows do not cover the graph sequence");
  if (num_samples < 1) throw std::invalid_argument("need >= 1 prior sample");
  std::vector<double> terms(static_cast<std::size_t>(T), 0.0);
  parallel_for(T, threads, [&](int idx) {
    const int t = idx + 1;
    const Eigen::MatrixXd draws = sample_prior(mu_rows.row(idx).transpose(), num_samples,
                                               derive_seed(seed, static_cast<std::uint64_t>(t)));
    Eigen::VectorXd logs(num_samples);
    for (int u = 0; u < num_samples; ++u)
      logs[u] = decoder_log_likelihood(phi, draws.row(u).transpose(), graphs.at(t));
    const double peak = logs.maxCoeff();
    terms[static_cast<std::size_t>(idx)] =
        peak + std::log((logs.array() - peak).exp().sum());
  });
  double total = 0.0;
  for (double v : terms) total += v;
  return total - static_cast<double>(T) * std::log(static_cast<double>(num_samples));
}

// Stopping rule: |(l_{a+1} - l_a) / l_a| <= tol for `patience` consecutive
// iteration pairs, evaluated on the trailing end of the history.
inline bool should_stop(const std::vector<double>& history, double tol, int patience) {
  if (static_cast<int>(history.size()) < patience + 1) return false;
  for (int back = 0; back < patience; ++back) {
    const std::size_t hi = history.size() - 1 - static_cast<std::size_t>(back);
    const double prev = history[hi - 1];
    const double ratio = std::abs((history[hi] - prev) / prev);
    if (!(ratio <= tol)) return false;
  }
  return true;
}

// B Adam steps on the Monte Carlo estimate of the decoder objective, the
// negated expectation of grad log P(y^t | z^t) averaged over each t's
// posterior samples and summed over t.
inline void update_phi(DecoderParameters& phi, AdamState& adam, const GraphSequence& graphs,
                       const std::vector<Eigen::MatrixXd>& samples_per_t, int steps,
                       double learning_rate, int threads = 0) {
  const int T = graphs.length();
  if (static_cast<int>(samples_per_t.size()) != T)
    throw std::invalid_argument("need one sample block per time point");
  const DecoderConfig shape{phi.d, phi.k, phi.hidden};
  std::vector<DecoderParameters> partial(
      static_cast<std::size_t>(T), DecoderParameters::zeros(phi.n, phi.directed, shape));
  DecoderParameters grad = DecoderParameters::zeros(phi.n, phi.directed, shape);
  for (int b = 0; b < steps; ++b) {
    parallel_for(T, threads, [&](int idx) {
      const Eigen::MatrixXd& draws = samples_per_t[static_cast<std::size_t>(idx)];
      const int s = static_cast<int>(draws.rows());
      DecoderParameters& acc = partial[static_cast<std::size_t>(idx)];
      acc.set_zero();
      // Eq. (10) term for this t: the sample average of grad log P(y^t|z)
      for (int u = 0; u < s; ++u)
        decoder_grad_phi_accumulate(phi, draws.row(u).transpose(), graphs.at(idx + 1), acc,
                                    1.0 / static_cast<double>(s));
    });
    // objective is the negative expected log-likelihood, summed over t
    grad.set_zero();
    for (int idx = 0; idx < T; ++idx)
      DecoderParameters::for_each_block(
          [&](auto& a, const auto& gb) { a -= gb; }, grad, partial[static_cast<std::size_t>(idx)]);
    adam_step(phi, grad, adam, learning_rate);
  }
}

namespace detail {
// sub-stream tags for the per-iteration RNG derivations
inline constexpr std::uint64_t kTagLangevin = 1;
inline constexpr std::uint64_t kTagLogLik = 2;
inline constexpr std::uint64_t kTagDecoderInit = 3;
}  // namespace detail

// Full ADMM loop (mu, phi, (gamma, beta), dual, penalty adaptation, stopping).
inline FitResult fit(const GraphSequence& graphs, const AdmmConfig& cfg) {
  validate(cfg);
  validate_graph_sequence(graphs);
  const int T = graphs.length();
  if (T < 2) throw std::invalid_argument("need at least two time points to fit");
  const int n = graphs.nodes();
  const int d = cfg.decoder.latent_dim;

  FitResult result;
  result.mu = Eigen::MatrixXd::Zero(T, d);
  result.phi = DecoderParameters::init(n, graphs.directed, cfg.decoder,
                                       derive_seed(cfg.seed, detail::kTagDecoderInit));
  result.gfl = GflSolution::zeros(T, d);
  AdamState adam = AdamState::for_parameters(result.phi);
  Eigen::MatrixXd nu = Eigen::MatrixXd::Zero(T, d);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(T, d);
  double kappa = cfg.kappa0;
  std::vector<double> loglik_history;

  for (int a = 1; a <= cfg.iterations; ++a) {
    const Eigen::MatrixXd nu_prev = nu;

    // posterior sampling and Proposition 1 row updates
    std::vector<Eigen::MatrixXd> samples(static_cast<std::size_t>(T));
    Eigen::MatrixXd posterior_means(T, d);
    parallel_for(T, cfg.threads, [&](int idx) {
      const int t = idx + 1;
      LangevinConfig chain = cfg.langevin;
      chain.seed = derive_seed(cfg.seed, detail::kTagLangevin, static_cast<std::uint64_t>(a),
                               static_cast<std::uint64_t>(t));
      chain.disable_likelihood = chain.disable_likelihood || cfg.disable_likelihood;
      try {
        samples[static_cast<std::size_t>(idx)] =
            sample_posterior(result.phi, result.mu.row(idx).transpose(), graphs.at(t), chain);
      } catch (const std::exception& e) {
        throw std::runtime_error("iteration " + std::to_string(a) + ", t=" + std::to_string(t) +
                                 ": " + e.what());
      }
      posterior_means.row(idx) = posterior_mean(samples[static_cast<std::size_t>(idx)]);
    });
    result.mu = update_mu(posterior_means, nu, w, kappa);

    if (!cfg.disable_likelihood)
      update_phi(result.phi, adam, graphs, samples, cfg.decoder_steps, cfg.learning_rate,
                 cfg.threads);

    // group fused lasso block, warm-started from the previous iterate
    GflProblem problem{result.mu + w, cfg.lambda, kappa};
    result.gfl = solve(problem, std::move(result.gfl), cfg.bcd_sweeps, cfg.kkt_tol);
    nu = result.gfl.reconstruct();

    w = update_dual(w, result.mu, nu);

    const auto [r_primal, r_dual] = residuals(result.mu, nu, nu_prev);
    const double loglik =
        marginal_log_likelihood(result.phi, graphs, result.mu, cfg.langevin.num_samples,
                                derive_seed(cfg.seed, detail::kTagLogLik,
                                            static_cast<std::uint64_t>(a)),
                                cfg.threads);
    result.trace.push_back({a, r_primal, r_dual, kappa, loglik});
    result.iterations_run = a;

    if (cfg.adapt_penalty) adapt_kappa(kappa, w, r_primal, r_dual);

    loglik_history.push_back(loglik);
    if (should_stop(loglik_history, cfg.stop_tol, cfg.patience)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

// One row per iteration: iteration, r_primal, r_dual, kappa, approx_log_lik.
inline void write_diagnostics_csv(std::ostream& os, const std::vector<AdmmDiagnosticsRow>& rows) {
  os << "iteration,r_primal,r_dual,kappa,approx_log_lik\n";
  char buf[192];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.r_primal,
                  r.r_dual, r.kappa, r.approx_log_lik);
    os << buf;
  }
}

// T rows, d comma-separated columns.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      os << (j > 0 ? "," : "") << buf;
    }
    os << "\n";
  }
}

}  // namespace netcpd
