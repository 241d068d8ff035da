#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "netcpd/decoder.hpp"
#include "netcpd/random.hpp"

namespace netcpd {

struct LangevinConfig {
  double step_size = 0.5;  // delta
  int steps = 30;          // chain length l
  int num_samples = 200;   // independent chains s
  std::uint64_t seed = 0;
  // Test hook: drop the decoder term so the chain targets the prior alone.
  bool disable_likelihood = false;
};

inline void validate(const LangevinConfig& cfg) {
  // step_size 0 is allowed: chains then stay at their initialisation.
  if (!(cfg.step_size >= 0.0)) throw std::invalid_argument("langevin step size must be >= 0");
  if (cfg.steps < 1) throw std::invalid_argument("langevin steps must be >= 1");
  if (cfg.num_samples < 1) throw std::invalid_argument("langevin sample count must be >= 1");
}

// Short-run Langevin dynamics targeting P(z|y) under the prior N(mu_t, I):
//   z <- z + delta [ grad_z log P(y|z) - (z - mu_t) ] + sqrt(2 delta) eps.
// Each chain starts at mu_t, runs `steps` iterations with its own RNG stream,
// and contributes its final state as one sample (rows of the result).
inline Eigen::MatrixXd sample_posterior(const DecoderParameters& phi,
                                        const Eigen::VectorXd& mu_t,
                                        const Eigen::MatrixXd& y_t,
                                        const LangevinConfig& cfg) {
  validate(cfg);
  if (mu_t.size() != phi.d)
    throw std::invalid_argument("prior mean has wrong dimension for decoder");
  const int d = static_cast<int>(mu_t.size());
  const double noise_scale = std::sqrt(2.0 * cfg.step_size);
  Eigen::MatrixXd samples(cfg.num_samples, d);
  for (int chain = 0; chain < cfg.num_samples; ++chain) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(chain)));
    std::normal_distribution<double> normal;
    Eigen::VectorXd z = mu_t;
    for (int step = 0; step < cfg.steps; ++step) {
      Eigen::VectorXd drift = -(z - mu_t);
      if (!cfg.disable_likelihood) drift += decoder_grad_z(phi, z, y_t);
      for (int i = 0; i < d; ++i) z[i] += cfg.step_size * drift[i] + noise_scale * normal(rng);
      if (!z.allFinite())
        throw std::runtime_error("langevin chain diverged at step " + std::to_string(step + 1) +
                                 ", chain " + std::to_string(chain));
    }
    samples.row(chain) = z;
  }
  return samples;
}

inline Eigen::VectorXd posterior_mean(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 1) throw std::invalid_argument("posterior mean needs >= 1 sample");
  return samples.colwise().mean();
}

// i.i.d. draws from N(mu_t, I_d), one per row.
inline Eigen::MatrixXd sample_prior(const Eigen::VectorXd& mu_t, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("prior sample count must be >= 1");
  const int d = static_cast<int>(mu_t.size());
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd samples(count, d);
  for (int r = 0; r < count; ++r)
    for (int i = 0; i < d; ++i) samples(r, i) = mu_t[i] + normal(rng);
  return samples;
}

}  // namespace netcpd
