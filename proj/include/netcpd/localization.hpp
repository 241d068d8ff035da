#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "netcpd/graph.hpp"
#include "netcpd/random.hpp"

namespace netcpd {

enum class LocalizationMethod { kGamma, kDataDriven };

struct LocalizationConfig {
  LocalizationMethod method = LocalizationMethod::kDataDriven;
  double alpha = 0.01;    // Gamma method significance level
  int num_draws = 0;      // m; 0 picks 500 when d >= 10 and 1000 otherwise
  double quantile = 0.9;  // q for the data-driven threshold Z_q
  int spacing = 5;        // eps_spc
  int endpoint_trim = 5;  // eps_end
  std::uint64_t seed = 0;

  int resolved_draws(int d) const { return num_draws > 0 ? num_draws : (d >= 10 ? 500 : 1000); }
};

inline void validate(const LocalizationConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  if (cfg.num_draws < 0) throw std::invalid_argument("num_draws must be >= 1 (or 0 for default)");
  if (!(cfg.quantile > 0.0 && cfg.quantile < 1.0))
    throw std::invalid_argument("quantile must be in (0,1)");
  if (cfg.spacing < 0 || cfg.endpoint_trim < 0)
    throw std::invalid_argument("spacing and endpoint trim must be >= 0");
}

// Per-step change magnitudes over t = 2..T (entry i corresponds to t = i + 2).
// score holds the standardised difference (data-driven method) or the
// simulated Gamma statistic v-bar (Gamma method); flagged records the raw
// threshold exceedances before post-processing.
struct ChangeMagnitudes {
  Eigen::VectorXd delta_mu;  // ||mu^t - mu^{t-1}||_2
  Eigen::VectorXd score;
  double threshold = 0.0;
  std::vector<char> flagged;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sample standard deviation (denominator count - 1).
inline double sample_std(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
}

inline Eigen::VectorXd consecutive_difference_norms(const Eigen::MatrixXd& mu) {
  const int T = static_cast<int>(mu.rows());
  Eigen::VectorXd delta(T - 1);
  for (int t = 1; t < T; ++t) delta[t - 1] = (mu.row(t) - mu.row(t - 1)).norm();
  return delta;
}

}  // namespace detail

// 1 - alpha/(T-1) quantile of Gamma(shape = m d / 2, scale = 2 / m), the null
// law of the mean of m variates (1/2)||N(0, 2 I_d)||^2.
inline double gamma_null_quantile(int d, int m, double alpha, int T) {
  if (d < 1 || m < 1) throw std::invalid_argument("d and m must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  if (T < 2) throw std::invalid_argument("T must be >= 2");
  const boost::math::gamma_distribution<double> null_law(0.5 * m * d, 2.0 / m);
  return boost::math::quantile(null_law, 1.0 - alpha / static_cast<double>(T - 1));
}

// Keeps the larger-score point of any pair closer than `spacing` (resolved
// left to right), then drops points below endpoint_trim or above
// T - endpoint_trim. score_of(t) must be defined for every input point.
template <typename ScoreFn>
inline ChangePointSet post_process_with(const ChangePointSet& points, ScoreFn&& score_of,
                                        int spacing, int endpoint_trim, int T) {
  std::vector<int> kept;
  for (int p : points.points) {
    if (!kept.empty() && p - kept.back() < spacing) {
      if (score_of(p) > score_of(kept.back())) kept.back() = p;
    } else {
      kept.push_back(p);
    }
  }
  std::vector<int> trimmed;
  for (int p : kept)
    if (p >= endpoint_trim && p <= T - endpoint_trim) trimmed.push_back(p);
  return ChangePointSet{std::move(trimmed)};
}

inline ChangePointSet post_process(const ChangePointSet& points, const ChangeMagnitudes& mags,
                                   int spacing, int endpoint_trim, int T) {
  return post_process_with(
      points, [&](int t) { return mags.score[t - 2]; }, spacing, endpoint_trim, T);
}

// Gamma-quantile rule: simulate m draws of z^t - z^{t-1} ~ N(mu^t - mu^{t-1}, 2 I_d)
// per step, compare the mean of (1/2)||.||^2 against the null quantile.
inline std::pair<ChangePointSet, ChangeMagnitudes> detect_gamma(const Eigen::MatrixXd& mu,
                                                                const LocalizationConfig& cfg) {
  validate(cfg);
  const int T = static_cast<int>(mu.rows());
  const int d = static_cast<int>(mu.cols());
  if (T < 2) throw std::invalid_argument("need at least two time points");
  const int m = cfg.resolved_draws(d);
  ChangeMagnitudes mags;
  mags.delta_mu = detail::consecutive_difference_norms(mu);
  mags.score.resize(T - 1);
  mags.threshold = gamma_null_quantile(d, m, cfg.alpha, T);
  mags.flagged.assign(static_cast<std::size_t>(T - 1), 0);
  ChangePointSet raw;
  const double root2 = std::sqrt(2.0);
  for (int t = 2; t <= T; ++t) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    std::normal_distribution<double> normal;
    const Eigen::RowVectorXd shift = mu.row(t - 1) - mu.row(t - 2);
    double total = 0.0;
    for (int rep = 0; rep < m; ++rep) {
      double sq = 0.0;
      for (int i = 0; i < d; ++i) {
        const double x = shift[i] + root2 * normal(rng);
        sq += x * x;
      }
      total += 0.5 * sq;
    }
    const double vbar = total / static_cast<double>(m);
    mags.score[t - 2] = vbar;
    if (vbar > mags.threshold) {
      mags.flagged[static_cast<std::size_t>(t - 2)] = 1;
      raw.points.push_back(t);
    }
  }
  return {post_process(raw, mags, cfg.spacing, cfg.endpoint_trim, T), std::move(mags)};
}

// Data-driven rule: standardise the difference norms by median/std and flag
// scores above mean + Z_q std. A flat series (std zero) yields no points.
inline std::pair<ChangePointSet, ChangeMagnitudes> detect_data_driven(
    const Eigen::MatrixXd& mu, const LocalizationConfig& cfg) {
  validate(cfg);
  const int T = static_cast<int>(mu.rows());
  if (T < 3) throw std::invalid_argument("data-driven rule needs at least three time points");
  ChangeMagnitudes mags;
  mags.delta_mu = detail::consecutive_difference_norms(mu);
  mags.score = Eigen::VectorXd::Zero(T - 1);
  mags.flagged.assign(static_cast<std::size_t>(T - 1), 0);
  const double spread = detail::sample_std(mags.delta_mu);
  ChangePointSet raw;
  if (spread == 0.0) {
    mags.threshold = 0.0;
    return {raw, std::move(mags)};
  }
  const std::vector<double> values(mags.delta_mu.data(), mags.delta_mu.data() + T - 1);
  const double center = detail::median(values);
  mags.score = ((mags.delta_mu.array() - center) / spread).matrix();
  const boost::math::normal_distribution<double> std_normal;
  const double z_q = boost::math::quantile(std_normal, cfg.quantile);
  mags.threshold = mags.score.mean() + z_q * detail::sample_std(mags.score);
  for (int t = 2; t <= T; ++t) {
    if (mags.score[t - 2] > mags.threshold) {
      mags.flagged[static_cast<std::size_t>(t - 2)] = 1;
      raw.points.push_back(t);
    }
  }
  return {post_process(raw, mags, cfg.spacing, cfg.endpoint_trim, T), std::move(mags)};
}

inline std::pair<ChangePointSet, ChangeMagnitudes> detect_change_points(
    const Eigen::MatrixXd& mu, const LocalizationConfig& cfg) {
  return cfg.method == LocalizationMethod::kGamma ? detect_gamma(mu, cfg)
                                                  : detect_data_driven(mu, cfg);
}

// One row per step: t, delta_mu, score, threshold, flagged.
inline void write_magnitudes_csv(std::ostream& os, const ChangeMagnitudes& mags) {
  os << "t,delta_mu,score,threshold,flagged\n";
  char buf[128];
  for (Eigen::Index i = 0; i < mags.delta_mu.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d\n", static_cast<int>(i) + 2,
                  mags.delta_mu[i], mags.score[i], mags.threshold,
                  static_cast<int>(mags.flagged[static_cast<std::size_t>(i)]));
    os << buf;
  }
}

}  // namespace netcpd
