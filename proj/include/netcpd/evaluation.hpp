#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "netcpd/graph.hpp"
#include "netcpd/random.hpp"

namespace netcpd {

inline int count_error(const ChangePointSet& truth, const ChangePointSet& detected) {
  return std::abs(truth.count() - detected.count());
}

// d(A|B) = max_{b in B} min_{a in A} |a - b|: the worst distance from a point
// of B to its nearest point of A. By convention d(empty|B) = +inf and
// d(A|empty) = -inf.
inline double hausdorff_one_sided(const ChangePointSet& a, const ChangePointSet& b) {
  if (a.points.empty()) return std::numeric_limits<double>::infinity();
  if (b.points.empty()) return -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (int target : b.points) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int candidate : a.points)
      nearest = std::min(nearest, static_cast<double>(std::abs(candidate - target)));
    worst = std::max(worst, nearest);
  }
  return worst;
}

// C(G, G') = (1/T) sum_{A in G} |A| max_{A' in G'} |A n A'| / |A u A'|.
inline double coverage(const Partition& truth, const Partition& detected, int T) {
  const auto check = [T](const Partition& part) {
    int covered = 0;
    for (const auto& [lo, hi] : part.intervals) {
      if (lo < 1 || hi > T || lo > hi) throw std::invalid_argument("interval outside [1,T]");
      covered += hi - lo + 1;
    }
    if (covered != T) throw std::invalid_argument("partition does not cover {1..T}");
  };
  check(truth);
  check(detected);
  double total = 0.0;
  for (const auto& [lo, hi] : truth.intervals) {
    const int len = hi - lo + 1;
    double best = 0.0;
    for (const auto& [lo2, hi2] : detected.intervals) {
      const int inter = std::max(0, std::min(hi, hi2) - std::max(lo, lo2) + 1);
      const int uni = (hi - lo + 1) + (hi2 - lo2 + 1) - inter;
      best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
    }
    total += static_cast<double>(len) * best;
  }
  return total / static_cast<double>(T);
}

// Degree-corrected stochastic block model fitted to a (weighted) adjacency
// matrix by pseudo-likelihood EM. Labels are 0-based internally.
struct DcsbmModel {
  int communities = 0;
  std::vector<int> labels;
  Eigen::MatrixXd block_sums;  // B_kl over the fitted matrix
  Eigen::VectorXd theta;       // degree parameters
  Eigen::VectorXd mixing;      // pi
  std::vector<double> pseudo_likelihood_trace;
};

namespace detail {

// Lloyd iterations with farthest-first seeding from row 0; deterministic.
inline std::vector<int> kmeans_labels(const Eigen::MatrixXd& rows, int K) {
  const int n = static_cast<int>(rows.rows());
  Eigen::MatrixXd centers(K, rows.cols());
  centers.row(0) = rows.row(0);
  for (int c = 1; c < K; ++c) {
    int far = 0;
    double far_dist = -1.0;
    for (int i = 0; i < n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (int p = 0; p < c; ++p)
        nearest = std::min(nearest, (rows.row(i) - centers.row(p)).squaredNorm());
      if (nearest > far_dist) {
        far_dist = nearest;
        far = i;
      }
    }
    centers.row(c) = rows.row(far);
  }
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int round = 0; round < 100; ++round) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (int c = 0; c < K; ++c) {
        const double dist = (rows.row(i) - centers.row(c)).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        moved = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, rows.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (int i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += rows.row(i);
      counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int c = 0; c < K; ++c)
      if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
    if (!moved) break;
  }
  return labels;
}

// Leading-eigenvector embedding of the symmetrised normalised adjacency.
inline std::vector<int> spectral_labels(const Eigen::MatrixXd& adj, int K) {
  const int n = static_cast<int>(adj.rows());
  Eigen::MatrixXd sym = 0.5 * (adj + adj.transpose());
  Eigen::VectorXd deg = sym.rowwise().sum();
  Eigen::VectorXd scale(n);
  for (int i = 0; i < n; ++i) scale[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;
  const Eigen::MatrixXd norm = scale.asDiagonal() * sym * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(norm);
  if (eig.info() != Eigen::Success) {
    std::vector<int> fallback(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) fallback[static_cast<std::size_t>(i)] = i % K;
    return fallback;
  }
  // eigenvalues come sorted ascending; take the K largest in magnitude of the top end
  const Eigen::MatrixXd embedding = eig.eigenvectors().rightCols(K);
  return kmeans_labels(embedding, K);
}

inline Eigen::MatrixXd node_block_sums(const Eigen::MatrixXd& adj, const std::vector<int>& labels,
                                       int K) {
  const int n = static_cast<int>(adj.rows());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, K);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, labels[static_cast<std::size_t>(j)]) += adj(i, j);
  return b;
}

// log of the conditional pseudo-likelihood sum_i log sum_l pi_l prod_k theta_lk^{b_ik}.
inline double pseudo_likelihood(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi,
                                const Eigen::MatrixXd& theta) {
  const int n = static_cast<int>(b.rows());
  const int K = static_cast<int>(pi.size());
  constexpr double tiny = 1e-12;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd logs(K);
    for (int l = 0; l < K; ++l) {
      double acc = std::log(std::max(pi[l], tiny));
      for (int k = 0; k < K; ++k) acc += b(i, k) * std::log(std::max(theta(l, k), tiny));
      logs[l] = acc;
    }
    const double peak = logs.maxCoeff();
    total += peak + std::log((logs.array() - peak).exp().sum());
  }
  return total;
}

}  // namespace detail

// Pseudo-likelihood EM. Each round runs one E/M update on the block sums of
// the current labels; the pseudo-likelihood is non-decreasing within a round
// by EM monotonicity (recorded in the trace as before/after pairs). Rounds
// stop when the labels stabilise or max_rounds is reached.
inline DcsbmModel fit_dcsbm(const Eigen::MatrixXd& adj, int K, std::vector<int> init_labels = {},
                            int max_rounds = 50) {
  const int n = static_cast<int>(adj.rows());
  if (adj.cols() != n || n < 1) throw std::invalid_argument("adjacency must be square");
  if (K < 2) throw std::invalid_argument("community count must be >= 2");
  if (adj.sum() <= 0.0) throw std::invalid_argument("graph has no edges");
  constexpr double tiny = 1e-12;

  std::vector<int> labels = init_labels.empty() ? detail::spectral_labels(adj, K)
                                                : std::move(init_labels);
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("initial labels must cover all nodes");
  for (int l : labels)
    if (l < 0 || l >= K) throw std::invalid_argument("initial label out of range");

  const Eigen::VectorXd degrees = adj.rowwise().sum();
  DcsbmModel model;
  model.communities = K;

  // Re-seed any emptied block with the upper half of the largest one.
  const auto fix_empty_blocks = [&](std::vector<int>& lab) {
    for (int k = 0; k < K; ++k) {
      if (std::count(lab.begin(), lab.end(), k) > 0) continue;
      int largest = 0, largest_size = -1;
      for (int l = 0; l < K; ++l) {
        const int size = static_cast<int>(std::count(lab.begin(), lab.end(), l));
        if (size > largest_size) {
          largest_size = size;
          largest = l;
        }
      }
      if (largest_size < 2) continue;
      int moved = 0;
      const int quota = largest_size / 2;
      for (int i = n - 1; i >= 0 && moved < quota; --i) {
        if (lab[static_cast<std::size_t>(i)] == largest) {
          lab[static_cast<std::size_t>(i)] = k;
          ++moved;
        }
      }
    }
  };
  fix_empty_blocks(labels);

  Eigen::VectorXd pi = Eigen::VectorXd::Zero(K);
  for (int l : labels) pi[l] += 1.0 / static_cast<double>(n);
  // theta initialised once from the hard labels, then carried through EM
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(K, K);
  {
    const Eigen::MatrixXd b0 = detail::node_block_sums(adj, labels, K);
    Eigen::VectorXd block_degree = Eigen::VectorXd::Constant(K, tiny);
    for (int i = 0; i < n; ++i) {
      theta.row(labels[static_cast<std::size_t>(i)]) += b0.row(i);
      block_degree[labels[static_cast<std::size_t>(i)]] += degrees[i];
    }
    for (int l = 0; l < K; ++l) theta.row(l) /= block_degree[l];
  }

  for (int round = 0; round < max_rounds; ++round) {
    const Eigen::MatrixXd b = detail::node_block_sums(adj, labels, K);
    model.pseudo_likelihood_trace.push_back(detail::pseudo_likelihood(b, pi, theta));

    // E-step: responsibilities in log space
    Eigen::MatrixXd resp(n, K);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd logs(K);
      for (int l = 0; l < K; ++l) {
        double acc = std::log(std::max(pi[l], tiny));
        for (int k = 0; k < K; ++k) acc += b(i, k) * std::log(std::max(theta(l, k), tiny));
        logs[l] = acc;
      }
      const double peak = logs.maxCoeff();
      const Eigen::VectorXd weights = (logs.array() - peak).exp();
      resp.row(i) = weights.transpose() / weights.sum();
    }
    // M-step
    pi = resp.colwise().mean();
    Eigen::VectorXd weighted_degree = Eigen::VectorXd::Constant(K, tiny);
    theta.setZero();
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < K; ++l) {
        theta.row(l) += resp(i, l) * b.row(i);
        weighted_degree[l] += resp(i, l) * degrees[i];
      }
    }
    for (int l = 0; l < K; ++l) theta.row(l) /= weighted_degree[l];

    model.pseudo_likelihood_trace.push_back(detail::pseudo_likelihood(b, pi, theta));

    std::vector<int> updated(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      int best;
      resp.row(i).maxCoeff(&best);
      updated[static_cast<std::size_t>(i)] = best;
    }
    fix_empty_blocks(updated);
    const bool stable = updated == labels;
    labels = std::move(updated);
    if (stable) break;
  }

  model.labels = labels;
  model.mixing = pi;
  model.block_sums = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      model.block_sums(labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)]) +=
          adj(i, j);
  model.theta = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double row_total = model.block_sums.row(labels[static_cast<std::size_t>(i)]).sum();
    model.theta[i] = row_total > 0.0 ? degrees[i] / row_total : 0.0;
  }
  return model;
}

// Profile log-likelihood of `adj` under the model's labels:
//   sum_ij A_ij log(theta_i theta_j B_{e_i e_j})
//   - 1/2 ( sum_kl B_kl + sum_k B_kk sum_{i in k} theta_i^2 )
//   + sum_k n_k log(n_k / n)
// with B, theta, d recomputed from the scored matrix.
inline double dcsbm_log_likelihood(const DcsbmModel& model, const Eigen::MatrixXd& adj) {
  const int n = static_cast<int>(adj.rows());
  if (adj.cols() != n) throw std::invalid_argument("adjacency must be square");
  if (static_cast<int>(model.labels.size()) != n)
    throw std::invalid_argument("model labels do not cover the graph's nodes");
  const int K = model.communities;
  const auto& e = model.labels;

  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd deg = adj.rowwise().sum();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      block(e[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(j)]) += adj(i, j);
  Eigen::VectorXd theta(n);
  for (int i = 0; i < n; ++i) {
    const double row_total = block.row(e[static_cast<std::size_t>(i)]).sum();
    theta[i] = row_total > 0.0 ? deg[i] / row_total : 0.0;
  }

  constexpr double tiny = 1e-300;
  double loglik = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (adj(i, j) == 0.0) continue;
      const double rate =
          theta[i] * theta[j] * block(e[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(j)]);
      loglik += adj(i, j) * std::log(std::max(rate, tiny));
    }
  }
  double correction = block.sum();
  for (int k = 0; k < K; ++k) {
    double sq = 0.0;
    for (int i = 0; i < n; ++i)
      if (e[static_cast<std::size_t>(i)] == k) sq += theta[i] * theta[i];
    correction += block(k, k) * sq;
  }
  loglik -= 0.5 * correction;
  for (int k = 0; k < K; ++k) {
    const int nk = static_cast<int>(std::count(e.begin(), e.end(), k));
    if (nk > 0)
      loglik += static_cast<double>(nk) *
                std::log(static_cast<double>(nk) / static_cast<double>(n));
  }
  return loglik;
}

// BIC used to pick the community count per interval:
//   -2 loglik + (K^2 + n) log(#dyads).
inline double dcsbm_bic(const DcsbmModel& model, const Eigen::MatrixXd& adj, bool directed) {
  const int n = static_cast<int>(adj.rows());
  const double dyads = directed ? static_cast<double>(n) * (n - 1)
                                : 0.5 * static_cast<double>(n) * (n - 1);
  const double penalty = (static_cast<double>(model.communities) * model.communities + n) *
                         std::log(std::max(dyads, 2.0));
  return -2.0 * dcsbm_log_likelihood(model, adj) + penalty;
}

// Appendix-style hold-out protocol: remove graphs at multiples of `gap`, fit a
// DCSBM per detected interval on the average of the remaining snapshots (K by
// lowest BIC over the grid), and sum the log-likelihood of the removed graphs
// under their interval's model.
inline double interval_holdout_score(const GraphSequence& graphs, const ChangePointSet& points,
                                     int gap, std::vector<int> k_grid = {2, 3, 4, 5},
                                     int max_rounds = 50) {
  const int T = graphs.length();
  if (gap < 2) throw std::invalid_argument("holdout gap must be >= 2");
  if (gap > T) throw std::invalid_argument("holdout gap exceeds the series length");
  if (k_grid.empty()) throw std::invalid_argument("community grid must be non-empty");
  std::sort(k_grid.begin(), k_grid.end());
  k_grid.erase(std::unique(k_grid.begin(), k_grid.end()), k_grid.end());

  std::vector<char> removed(static_cast<std::size_t>(T + 1), 0);
  for (int t = gap; t <= T; t += gap) removed[static_cast<std::size_t>(t)] = 1;

  const Partition segments = partition_from_change_points(T, points.points);
  double total = 0.0;
  for (const auto& [lo, hi] : segments.intervals) {
    std::vector<int> kept, held_out;
    for (int t = lo; t <= hi; ++t)
      (removed[static_cast<std::size_t>(t)] ? held_out : kept).push_back(t);
    if (held_out.empty()) continue;
    if (kept.empty())
      throw std::runtime_error("interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                               "] has no graphs left to fit after the holdout");
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(graphs.nodes(), graphs.nodes());
    for (int t : kept) avg += graphs.at(t);
    avg /= static_cast<double>(kept.size());

    double best_bic = std::numeric_limits<double>::infinity();
    DcsbmModel best_model;
    for (int K : k_grid) {
      DcsbmModel candidate = fit_dcsbm(avg, K, {}, max_rounds);
      const double bic = dcsbm_bic(candidate, avg, graphs.directed);
      if (bic < best_bic) {
        best_bic = bic;
        best_model = std::move(candidate);
      }
    }
    for (int t : held_out) total += dcsbm_log_likelihood(best_model, graphs.at(t));
  }
  return total;
}

// One row per trial: count error, both one-sided Hausdorff distances, coverage.
inline void write_metrics_csv(std::ostream& os, const ChangePointSet& truth,
                              const ChangePointSet& detected, int T) {
  const Partition truth_part = partition_from_change_points(T, truth.points);
  const Partition detect_part = partition_from_change_points(T, detected.points);
  char buf[160];
  os << "count_error,hausdorff_detected_truth,hausdorff_truth_detected,coverage\n";
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", count_error(truth, detected),
                hausdorff_one_sided(detected, truth), hausdorff_one_sided(truth, detected),
                coverage(truth_part, detect_part, T));
  os << buf;
}

}  // namespace netcpd
