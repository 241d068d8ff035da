#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netcpd/admm.hpp"
#include "netcpd/graph.hpp"

namespace netcpd {

// Odd-indexed snapshots (1,3,5,...) form the training sequence, even-indexed
// ones (2,4,...) the testing sequence, each re-indexed from 1.
inline std::pair<GraphSequence, GraphSequence> split_odd_even(const GraphSequence& graphs) {
  if (graphs.length() < 4)
    throw std::invalid_argument("cross-validation split needs at least four time points");
  GraphSequence train, test;
  train.directed = test.directed = graphs.directed;
  for (int t = 1; t <= graphs.length(); ++t)
    (t % 2 == 1 ? train : test).snapshots.push_back(graphs.at(t));
  return {std::move(train), std::move(test)};
}

// Marginal log-likelihood of the test sequence, pairing test graph j (original
// time 2j) with trained prior row j (original time 2j-1, its left neighbour).
inline double test_log_likelihood(const DecoderParameters& phi, const Eigen::MatrixXd& mu_train,
                                  const GraphSequence& test, int num_samples, std::uint64_t seed,
                                  int threads = 0) {
  if (mu_train.rows() < test.length())
    throw std::invalid_argument("trained prior rows do not cover the test sequence");
  return marginal_log_likelihood(phi, test, mu_train, num_samples, seed, threads);
}

struct LambdaScore {
  double lambda = 0.0;
  double score = -std::numeric_limits<double>::infinity();
  bool ok = false;
  bool selected = false;
};

struct LambdaSelection {
  double best_lambda = 0.0;
  std::vector<LambdaScore> scores;
};

namespace detail {
inline constexpr std::uint64_t kTagCvFit = 11;
inline constexpr std::uint64_t kTagCvScore = 12;
inline constexpr std::uint64_t kTagRefit = 13;
}  // namespace detail

// Odd/even cross-validation over the lambda grid; the grid is deduplicated and
// scanned in ascending order, with ties resolved toward the larger lambda.
// A lambda whose fit throws is skipped with its failure recorded; if every fit
// fails the error propagates.
inline LambdaSelection select_lambda(const GraphSequence& graphs, std::vector<double> grid,
                                     const AdmmConfig& base) {
  if (grid.empty()) throw std::invalid_argument("lambda grid must be non-empty");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const auto [train, test] = split_odd_even(graphs);

  LambdaSelection out;
  std::string last_error = "no candidate evaluated";
  int best = -1;
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    LambdaScore entry;
    entry.lambda = grid[idx];
    AdmmConfig cfg = base;
    cfg.lambda = grid[idx];
    cfg.seed = derive_seed(base.seed, detail::kTagCvFit, idx);
    try {
      const FitResult fit_result = fit(train, cfg);
      entry.score = test_log_likelihood(fit_result.phi, fit_result.mu, test,
                                        cfg.langevin.num_samples,
                                        derive_seed(base.seed, detail::kTagCvScore, idx),
                                        cfg.threads);
      entry.ok = true;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
    out.scores.push_back(entry);
    if (entry.ok && (best < 0 || entry.score >= out.scores[static_cast<std::size_t>(best)].score))
      best = static_cast<int>(idx);
  }
  if (best < 0) throw std::runtime_error("every lambda fit failed; last error: " + last_error);
  out.scores[static_cast<std::size_t>(best)].selected = true;
  out.best_lambda = out.scores[static_cast<std::size_t>(best)].lambda;
  return out;
}

struct RefitResult {
  FitResult fit;
  std::vector<double> coefficients_of_variation;
  int chosen_repeat = 0;
};

namespace detail {

// mean(delta)/sd(delta) with the degenerate rule sd = 0 -> +inf when the mean
// is positive and 0 when the mean is 0.
inline double coefficient_of_variation(const Eigen::MatrixXd& mu) {
  const int T = static_cast<int>(mu.rows());
  Eigen::VectorXd delta(T - 1);
  for (int t = 1; t < T; ++t) delta[t - 1] = (mu.row(t) - mu.row(t - 1)).norm();
  const double mean = delta.mean();
  double sd = 0.0;
  if (T - 1 >= 2)
    sd = std::sqrt((delta.array() - mean).square().sum() / static_cast<double>(T - 2));
  if (sd == 0.0) return mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return mean / sd;
}

}  // namespace detail

// Refits on the full series `repeats` times with distinct seeds and returns
// the fit whose consecutive-difference norms have the largest coefficient of
// variation (first winner on ties).
inline RefitResult refit_and_pick(const GraphSequence& graphs, double lambda, int repeats,
                                  const AdmmConfig& base) {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  RefitResult out;
  double best_cov = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < repeats; ++r) {
    AdmmConfig cfg = base;
    cfg.lambda = lambda;
    cfg.seed = derive_seed(base.seed, detail::kTagRefit, static_cast<std::uint64_t>(r));
    FitResult candidate = fit(graphs, cfg);
    const double cov = detail::coefficient_of_variation(candidate.mu);
    out.coefficients_of_variation.push_back(cov);
    if (cov > best_cov) {
      best_cov = cov;
      out.fit = std::move(candidate);
      out.chosen_repeat = r;
    }
  }
  return out;
}

// One row per candidate: lambda, test log-likelihood, selected flag.
inline void write_lambda_scores_csv(std::ostream& os, const LambdaSelection& selection) {
  os << "lambda,test_log_lik,selected\n";
  char buf[128];
  for (const auto& s : selection.scores) {
    if (s.ok)
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", s.lambda, s.score,
                    s.selected ? 1 : 0);
    else
      std::snprintf(buf, sizeof(buf), "%.17g,failed,0\n", s.lambda);
    os << buf;
  }
}

}  // namespace netcpd
