#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "netcpd/random.hpp"

namespace netcpd {

// Probabilities are clamped to [kProbEps, 1-kProbEps] before taking logs.
inline constexpr double kProbEps = 1e-7;

struct DecoderConfig {
  int latent_dim = 10;   // d
  int factor_rank = 5;   // k
  int hidden_width = 64; // h_w
};

// Feed-forward graph decoder h: R^d -> R^{n x k} factor matrices.
//   hidden = tanh(w1 z + b1)
//   U      = reshape(w2u hidden + b2u, n x k)   (V likewise when directed)
//   R      = sigmoid(U V^T)  or  sigmoid(U U^T) for undirected graphs
// Flat head outputs map to factors row-major: entry i*k+c is factor (i, c).
struct DecoderParameters {
  bool directed = true;
  int n = 0, d = 0, k = 0, hidden = 0;
  Eigen::MatrixXd w1;   // hidden x d
  Eigen::VectorXd b1;   // hidden
  Eigen::MatrixXd w2u;  // (n*k) x hidden
  Eigen::VectorXd b2u;  // n*k
  Eigen::MatrixXd w2v;  // (n*k) x hidden, directed only
  Eigen::VectorXd b2v;  // n*k, directed only

  static DecoderParameters zeros(int n, bool directed, const DecoderConfig& cfg) {
    DecoderParameters p;
    p.directed = directed;
    p.n = n;
    p.d = cfg.latent_dim;
    p.k = cfg.factor_rank;
    p.hidden = cfg.hidden_width;
    if (n < 1 || p.d < 1 || p.k < 1 || p.hidden < 1)
      throw std::invalid_argument("decoder dimensions must be positive");
    p.w1 = Eigen::MatrixXd::Zero(p.hidden, p.d);
    p.b1 = Eigen::VectorXd::Zero(p.hidden);
    p.w2u = Eigen::MatrixXd::Zero(n * p.k, p.hidden);
    p.b2u = Eigen::VectorXd::Zero(n * p.k);
    if (directed) {
      p.w2v = Eigen::MatrixXd::Zero(n * p.k, p.hidden);
      p.b2v = Eigen::VectorXd::Zero(n * p.k);
    }
    return p;
  }

  // Weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static DecoderParameters init(int n, bool directed, const DecoderConfig& cfg,
                                std::uint64_t seed) {
    DecoderParameters p = zeros(n, directed, cfg);
    Rng rng(seed);
    const auto fill_uniform = [&rng](Eigen::MatrixXd& m, int fan_in) {
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-a, a);
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
    };
    fill_uniform(p.w1, p.d);
    fill_uniform(p.w2u, p.hidden);
    if (directed) fill_uniform(p.w2v, p.hidden);
    return p;
  }

  bool same_shape(const DecoderParameters& o) const {
    return directed == o.directed && n == o.n && d == o.d && k == o.k && hidden == o.hidden;
  }

  bool all_finite() const {
    const bool base = w1.allFinite() && b1.allFinite() && w2u.allFinite() && b2u.allFinite();
    if (!directed) return base;
    return base && w2v.allFinite() && b2v.allFinite();
  }

  // Visits corresponding blocks of several same-shaped parameter structs.
  template <typename Fn, typename... Rest>
  static void for_each_block(Fn&& fn, DecoderParameters& first, Rest&... rest) {
    fn(first.w1, rest.w1...);
    fn(first.b1, rest.b1...);
    fn(first.w2u, rest.w2u...);
    fn(first.b2u, rest.b2u...);
    if (first.directed) {
      fn(first.w2v, rest.w2v...);
      fn(first.b2v, rest.b2v...);
    }
  }

  void set_zero() {
    for_each_block([](auto& block) { block.setZero(); }, *this);
  }
};

namespace detail {

struct DecoderForward {
  Eigen::VectorXd hidden;      // post-tanh
  Eigen::MatrixXd factor_u;    // n x k
  Eigen::MatrixXd factor_v;    // n x k (aliases factor_u when undirected)
  Eigen::MatrixXd probs;       // n x n, unclamped sigmoid(U V^T)
};

inline DecoderForward decoder_run(const DecoderParameters& p, const Eigen::VectorXd& z) {
  if (z.size() != p.d)
    throw std::invalid_argument("latent vector has length " + std::to_string(z.size()) +
                                ", decoder expects " + std::to_string(p.d));
  DecoderForward f;
  f.hidden = (p.w1 * z + p.b1).array().tanh().matrix();
  const Eigen::VectorXd uflat = p.w2u * f.hidden + p.b2u;
  f.factor_u = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(uflat.data(), p.n, p.k);
  if (p.directed) {
    const Eigen::VectorXd vflat = p.w2v * f.hidden + p.b2v;
    f.factor_v = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(vflat.data(), p.n, p.k);
  } else {
    f.factor_v = f.factor_u;
  }
  f.probs = (1.0 / (1.0 + (-(f.factor_u * f.factor_v.transpose()).array()).exp())).matrix();
  return f;
}

// Residual y - R over the dyad set: zero diagonal, symmetric for undirected.
inline Eigen::MatrixXd dyad_residual(const DecoderForward& f, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd g = y - f.probs;
  g.diagonal().setZero();
  return g;
}

inline Eigen::VectorXd flatten_row_major(const Eigen::MatrixXd& m) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  return Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size());
}

}  // namespace detail

// Bernoulli edge probabilities r_ij = sigmoid(h(z))_ij. The diagonal is not
// part of the dyad set; it is returned zeroed.
inline Eigen::MatrixXd decoder_forward(const DecoderParameters& p, const Eigen::VectorXd& z) {
  detail::DecoderForward f = detail::decoder_run(p, z);
  f.probs.diagonal().setZero();
  return f.probs;
}

// sum over dyads of y log r + (1-y) log(1-r); unordered pairs count once for
// undirected graphs.
inline double decoder_log_likelihood(const DecoderParameters& p, const Eigen::VectorXd& z,
                                     const Eigen::MatrixXd& y) {
  if (y.rows() != p.n || y.cols() != p.n)
    throw std::invalid_argument("adjacency shape does not match decoder node count");
  const detail::DecoderForward f = detail::decoder_run(p, z);
  const Eigen::ArrayXXd r = f.probs.array().max(kProbEps).min(1.0 - kProbEps);
  Eigen::ArrayXXd terms = y.array() * r.log() + (1.0 - y.array()) * (1.0 - r).log();
  terms.matrix().diagonal().setZero();
  const double total = terms.sum();
  return p.directed ? total : 0.5 * total;
}

// Exact gradient of the dyadic log-likelihood with respect to z.
inline Eigen::VectorXd decoder_grad_z(const DecoderParameters& p, const Eigen::VectorXd& z,
                                      const Eigen::MatrixXd& y) {
  if (y.rows() != p.n || y.cols() != p.n)
    throw std::invalid_argument("adjacency shape does not match decoder node count");
  const detail::DecoderForward f = detail::decoder_run(p, z);
  const Eigen::MatrixXd g = detail::dyad_residual(f, y);
  Eigen::VectorXd grad_hidden;
  if (p.directed) {
    grad_hidden = p.w2u.transpose() * detail::flatten_row_major(g * f.factor_v) +
                  p.w2v.transpose() * detail::flatten_row_major(g.transpose() * f.factor_u);
  } else {
    grad_hidden = p.w2u.transpose() * detail::flatten_row_major(g * f.factor_u);
  }
  const Eigen::VectorXd grad_pre =
      ((1.0 - f.hidden.array().square()) * grad_hidden.array()).matrix();
  return p.w1.transpose() * grad_pre;
}

// Adds `weight` times the log-likelihood gradient with respect to every
// weight and bias into `acc`. Writing into a caller-owned accumulator keeps
// the per-sample hot path free of large allocations.
inline void decoder_grad_phi_accumulate(const DecoderParameters& p, const Eigen::VectorXd& z,
                                        const Eigen::MatrixXd& y, DecoderParameters& acc,
                                        double weight = 1.0) {
  if (y.rows() != p.n || y.cols() != p.n)
    throw std::invalid_argument("adjacency shape does not match decoder node count");
  if (!p.same_shape(acc)) throw std::invalid_argument("accumulator shape mismatch");
  const detail::DecoderForward f = detail::decoder_run(p, z);
  const Eigen::MatrixXd g = detail::dyad_residual(f, y);

  Eigen::VectorXd grad_hidden = Eigen::VectorXd::Zero(p.hidden);
  const Eigen::VectorXd gu = detail::flatten_row_major(
      p.directed ? Eigen::MatrixXd(g * f.factor_v) : Eigen::MatrixXd(g * f.factor_u));
  acc.w2u.noalias() += weight * gu * f.hidden.transpose();
  acc.b2u.noalias() += weight * gu;
  grad_hidden.noalias() += p.w2u.transpose() * gu;
  if (p.directed) {
    const Eigen::VectorXd gv = detail::flatten_row_major(g.transpose() * f.factor_u);
    acc.w2v.noalias() += weight * gv * f.hidden.transpose();
    acc.b2v.noalias() += weight * gv;
    grad_hidden.noalias() += p.w2v.transpose() * gv;
  }
  const Eigen::VectorXd grad_pre =
      ((1.0 - f.hidden.array().square()) * grad_hidden.array()).matrix();
  acc.w1.noalias() += weight * grad_pre * z.transpose();
  acc.b1.noalias() += weight * grad_pre;
}

// Exact gradient of the dyadic log-likelihood with respect to every weight
// and bias, in a parameter-shaped struct.
inline DecoderParameters decoder_grad_phi(const DecoderParameters& p, const Eigen::VectorXd& z,
                                          const Eigen::MatrixXd& y) {
  DecoderParameters grad = DecoderParameters::zeros(p.n, p.directed, {p.d, p.k, p.hidden});
  decoder_grad_phi_accumulate(p, z, y, grad);
  return grad;
}

struct AdamState {
  DecoderParameters m;
  DecoderParameters v;
  long step = 0;

  static AdamState for_parameters(const DecoderParameters& p) {
    AdamState s;
    s.m = DecoderParameters::zeros(p.n, p.directed, {p.d, p.k, p.hidden});
    s.v = DecoderParameters::zeros(p.n, p.directed, {p.d, p.k, p.hidden});
    return s;
  }
};

// One Adam step minimising the objective whose gradient is `grad`.
// beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
inline void adam_step(DecoderParameters& params, const DecoderParameters& grad,
                      AdamState& state, double learning_rate) {
  if (!params.same_shape(grad)) throw std::invalid_argument("gradient shape mismatch");
  if (!grad.all_finite()) throw std::runtime_error("non-finite decoder gradient");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.step;
  const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = beta1 * m + (1.0 - beta1) * g;
    v.array() = beta2 * v.array() + (1.0 - beta2) * g.array().square();
    p.array() -= learning_rate * (m.array() / m_corr) /
                 ((v.array() / v_corr).sqrt() + eps);
  };
  DecoderParameters::for_each_block(update, params, grad, state.m, state.v);
}

// Versioned JSON checkpoint with a dimension header.
inline nlohmann::json decoder_to_json(const DecoderParameters& p) {
  const auto dump = [](const Eigen::MatrixXd& m) {
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::MatrixXd>(flat.data(), m.rows(), m.cols()) = m;
    return flat;
  };
  nlohmann::json out;
  out["version"] = 1;
  out["directed"] = p.directed;
  out["n"] = p.n;
  out["d"] = p.d;
  out["k"] = p.k;
  out["hidden"] = p.hidden;
  out["w1"] = dump(p.w1);
  out["b1"] = dump(p.b1);
  out["w2u"] = dump(p.w2u);
  out["b2u"] = dump(p.b2u);
  if (p.directed) {
    out["w2v"] = dump(p.w2v);
    out["b2v"] = dump(p.b2v);
  }
  return out;
}

inline DecoderParameters decoder_from_json(const nlohmann::json& in) {
  if (!in.contains("version") || in.at("version").get<int>() != 1)
    throw std::runtime_error("unsupported decoder checkpoint version");
  DecoderConfig cfg{in.at("d").get<int>(), in.at("k").get<int>(), in.at("hidden").get<int>()};
  DecoderParameters p = DecoderParameters::zeros(in.at("n").get<int>(),
                                                 in.at("directed").get<bool>(), cfg);
  const auto load = [&in](const char* key, Eigen::Ref<Eigen::MatrixXd> m) {
    const auto flat = in.at(key).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != m.size())
      throw std::runtime_error(std::string("checkpoint field ") + key + " has wrong length");
    m = Eigen::Map<const Eigen::MatrixXd>(flat.data(), m.rows(), m.cols());
  };
  load("w1", p.w1);
  load("b1", p.b1);
  load("w2u", p.w2u);
  load("b2u", p.b2u);
  if (p.directed) {
    load("w2v", p.w2v);
    load("b2v", p.b2v);
  }
  if (!p.all_finite()) throw std::runtime_error("checkpoint holds non-finite weights");
  return p;
}

}  // namespace netcpd
