#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netcpd/decoder.hpp"
#include "netcpd/graph.hpp"
#include "netcpd/random.hpp"

namespace netcpd {

// Temporally dependent stochastic block model. Regimes alternate between the
// P rates (odd intervals) and Q rates (even intervals) across the planted
// schedule; edges persist through the two-branch rule with strength rho.
struct SbmSpec {
  int n = 50;
  int T = 100;
  int blocks = 3;
  double p_within = 0.5, p_between = 0.3;
  double q_within = 0.45, q_between = 0.2;
  double rho = 0.5;
  std::vector<int> change_points = {26, 51, 76};
  bool directed = true;
  std::uint64_t seed = 1;
};

// Latent-regime generator: z^t is drawn from N(mean_low 1, regime_var I) on
// odd intervals and N(mean_high 1, regime_var I) on even ones, then pushed
// through a fixed random-weight decoder to dyad probabilities.
struct GeneratorSpec {
  int n = 50;
  int T = 100;
  int latent_dim = 10;
  int factor_rank = 5;
  int hidden_width = 64;
  double mean_low = -1.0;
  double mean_high = 5.0;
  double regime_var = 0.1;
  std::vector<int> change_points = {26, 51, 76};
  bool directed = true;
  std::uint64_t seed = 1;
};

// Contiguous intervals between consecutive planted points.
inline Partition plant_schedule(int T, const std::vector<int>& change_points) {
  return partition_from_change_points(T, change_points);
}

namespace detail {

inline void check_rate(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
}

// interval index (0-based) of each time point under the planted schedule
inline std::vector<int> interval_of_time(int T, const std::vector<int>& change_points) {
  const Partition part = plant_schedule(T, change_points);
  std::vector<int> idx(static_cast<std::size_t>(T + 1), 0);
  for (std::size_t seg = 0; seg < part.intervals.size(); ++seg)
    for (int t = part.intervals[seg].first; t <= part.intervals[seg].second; ++t)
      idx[static_cast<std::size_t>(t)] = static_cast<int>(seg);
  return idx;
}

inline void sample_adjacency(Eigen::MatrixXd& y, const Eigen::MatrixXd& probs, bool directed,
                             Rng& rng) {
  const int n = static_cast<int>(probs.rows());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  y.setZero();
  for (int i = 0; i < n; ++i) {
    for (int j = directed ? 0 : i + 1; j < n; ++j) {
      if (j == i) continue;
      const double edge = unif(rng) < probs(i, j) ? 1.0 : 0.0;
      y(i, j) = edge;
      if (!directed) y(j, i) = edge;
    }
  }
}

}  // namespace detail

inline std::pair<GraphSequence, ChangePointSet> simulate_sbm(const SbmSpec& spec) {
  if (spec.n < 2 || spec.T < 2) throw std::invalid_argument("need n >= 2 and T >= 2");
  if (spec.blocks < 1 || spec.blocks > spec.n)
    throw std::invalid_argument("block count must lie in [1, n]");
  detail::check_rate(spec.p_within, "p_within");
  detail::check_rate(spec.p_between, "p_between");
  detail::check_rate(spec.q_within, "q_within");
  detail::check_rate(spec.q_between, "q_between");
  detail::check_rate(spec.rho, "rho");

  // near-even contiguous blocks; the first n % blocks get one extra node
  std::vector<int> block_of(static_cast<std::size_t>(spec.n));
  {
    const int base = spec.n / spec.blocks;
    int extra = spec.n % spec.blocks;
    int node = 0;
    for (int b = 0; b < spec.blocks; ++b) {
      const int size = base + (extra-- > 0 ? 1 : 0);
      for (int s = 0; s < size; ++s) block_of[static_cast<std::size_t>(node++)] = b;
    }
  }
  const auto rate = [&](int i, int j, bool p_regime) {
    const bool same = block_of[static_cast<std::size_t>(i)] == block_of[static_cast<std::size_t>(j)];
    if (p_regime) return same ? spec.p_within : spec.p_between;
    return same ? spec.q_within : spec.q_between;
  };

  const std::vector<int> segment = detail::interval_of_time(spec.T, spec.change_points);
  GraphSequence g;
  g.directed = spec.directed;
  g.snapshots.assign(static_cast<std::size_t>(spec.T),
                     Eigen::MatrixXd::Zero(spec.n, spec.n));
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int t = 1; t <= spec.T; ++t) {
    const bool p_regime = segment[static_cast<std::size_t>(t)] % 2 == 0;
    Eigen::MatrixXd& y = g.snapshots[static_cast<std::size_t>(t - 1)];
    const Eigen::MatrixXd* prev = t > 1 ? &g.snapshots[static_cast<std::size_t>(t - 2)] : nullptr;
    for (int i = 0; i < spec.n; ++i) {
      for (int j = spec.directed ? 0 : i + 1; j < spec.n; ++j) {
        if (j == i) continue;
        const double e = rate(i, j, p_regime);
        double prob;
        if (prev == nullptr) {
          prob = e;
        } else if ((*prev)(i, j) != 0.0) {
          prob = spec.rho * (1.0 - e) + e;
        } else {
          prob = (1.0 - spec.rho) * e;
        }
        const double edge = unif(rng) < prob ? 1.0 : 0.0;
        y(i, j) = edge;
        if (!spec.directed) y(j, i) = edge;
      }
    }
  }
  return {std::move(g), ChangePointSet{spec.change_points}};
}

// The fixed random-weight network mapping latent draws to dyad probabilities.
inline DecoderParameters generator_decoder(const GeneratorSpec& spec) {
  const DecoderConfig cfg{spec.latent_dim, spec.factor_rank, spec.hidden_width};
  return DecoderParameters::init(spec.n, spec.directed, cfg, derive_seed(spec.seed, 0x67656eULL));
}

inline std::pair<GraphSequence, ChangePointSet> simulate_generator(const GeneratorSpec& spec,
                                                                   const DecoderParameters& generator) {
  if (spec.n < 2 || spec.T < 2) throw std::invalid_argument("need n >= 2 and T >= 2");
  if (spec.latent_dim < 1 || spec.factor_rank < 1)
    throw std::invalid_argument("latent dimensions must be >= 1");
  if (!(spec.regime_var >= 0.0)) throw std::invalid_argument("regime variance must be >= 0");
  if (generator.n != spec.n || generator.d != spec.latent_dim)
    throw std::invalid_argument("generator network does not match the spec dimensions");
  const std::vector<int> segment = detail::interval_of_time(spec.T, spec.change_points);
  const double sd = std::sqrt(spec.regime_var);

  GraphSequence g;
  g.directed = spec.directed;
  g.snapshots.assign(static_cast<std::size_t>(spec.T),
                     Eigen::MatrixXd::Zero(spec.n, spec.n));
  Rng rng(derive_seed(spec.seed, 0x647261ULL));
  for (int t = 1; t <= spec.T; ++t) {
    const double mean =
        segment[static_cast<std::size_t>(t)] % 2 == 0 ? spec.mean_low : spec.mean_high;
    Eigen::VectorXd z = Eigen::VectorXd::Constant(spec.latent_dim, mean) +
                        sd * gaussian_vector(rng, spec.latent_dim);
    const Eigen::MatrixXd probs = decoder_forward(generator, z);
    detail::sample_adjacency(g.snapshots[static_cast<std::size_t>(t - 1)], probs, spec.directed,
                             rng);
  }
  return {std::move(g), ChangePointSet{spec.change_points}};
}

inline std::pair<GraphSequence, ChangePointSet> simulate_generator(const GeneratorSpec& spec) {
  return simulate_generator(spec, generator_decoder(spec));
}

}  // namespace netcpd
