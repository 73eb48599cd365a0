#pragma once

// Multivariate Hawkes simulation by thinning, plus random network generators.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by the
// standard; uniforms and exponentials are derived by hand so streams are
// identical across standard libraries. Trial i of a replicated experiment
// uses seed base + i.

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>
#include <hawkes/kernels.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hawkes {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Exponential with the given rate.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  bool bernoulli(double prob) { return uniform() < prob; }
  std::uint64_t next() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

struct SimulationConfig {
  Vector mu_bar;
  Matrix w;
  Kernel kernel = Kernel::exponential(std::exp(-1.0));
  double horizon = 0.0;
  std::uint64_t seed = 0;
  /// Per-actor cap on events in any trailing unit-time window; excess
  /// candidates are dropped before they can excite anything.
  std::optional<double> x_max_guard;
  std::size_t max_events = 50'000'000;
};

struct SimulationReport {
  std::vector<std::string> warnings;
  std::size_t dropped_by_guard = 0;
  bool truncated = false;  // max_events reached; horizon cut at the last event
  double spectral_radius = 0.0;
};

/// Spectral radius of W * int_0^inf h; the process is stationary when < 1.
inline double stationarity_radius(const Matrix& w, const Kernel& kernel) {
  if (w.size() == 0) return 0.0;
  const double mass = kernel.integral();
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(w, false).eigenvalues();
  return ev.cwiseAbs().maxCoeff() * mass;
}

namespace detail {

/// Samples a row index of column j with probability W_ij / colsum_j.
class ColumnSampler {
 public:
  explicit ColumnSampler(const Matrix& w) : cdf_(w.rows(), w.cols()) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < w.rows(); ++i) cdf_(i, j) = acc += w(i, j);
    }
  }
  std::size_t sample(Eigen::Index j, double u) const {
    const double* col = cdf_.col(j).data();
    const double target = u * col[cdf_.rows() - 1];
    const auto it = std::upper_bound(col, col + cdf_.rows(), target);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - col, cdf_.rows() - 1));
  }

 private:
  Matrix cdf_;
};

inline std::size_t sample_index(const Vector& weights, double total, double u) {
  double target = u * total, acc = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (target < acc) return static_cast<std::size_t>(k);
  }
  for (Eigen::Index k = weights.size(); k-- > 0;)
    if (weights[k] > 0.0) return static_cast<std::size_t>(k);
  return 0;
}

class Guard {
 public:
  Guard(std::optional<double> cap, std::size_t p) : cap_(cap), recent_(p) {}
  bool admit(std::size_t k, double now) {
    if (!cap_) return true;
    auto& q = recent_[k];
    while (!q.empty() && now - q.front() >= 1.0) q.pop_front();
    if (static_cast<double>(q.size()) + 1.0 > *cap_) return false;
    q.push_back(now);
    return true;
  }

 private:
  std::optional<double> cap_;
  std::vector<std::deque<double>> recent_;
};

}  // namespace detail

/// Ogata thinning. The bound M is the total intensity with every kernel term
/// replaced by its envelope, which cannot increase until the next event.
inline EventStream simulate_hawkes(const SimulationConfig& cfg, SimulationReport* report = nullptr) {
  SimulationReport local;
  SimulationReport& rep = report ? *report : local;
  rep = {};
  const auto p = cfg.mu_bar.size();
  require_config(p > 0, "simulate: need at least one actor");
  require_config((cfg.mu_bar.array() > 0.0).all(), "simulate: mu_bar must be positive");
  require_same_size(cfg.w.rows(), p, "simulate W rows");
  require_same_size(cfg.w.cols(), p, "simulate W cols");
  require_config(cfg.w.size() == 0 || cfg.w.minCoeff() >= 0.0, "simulate: W must be nonnegative");
  require_config(cfg.horizon > 0.0 && std::isfinite(cfg.horizon), "simulate: horizon must be positive");

  rep.spectral_radius = stationarity_radius(cfg.w, cfg.kernel);
  if (rep.spectral_radius >= 1.0)
    rep.warnings.push_back("spectral radius of W * int h is " + std::to_string(rep.spectral_radius) +
                           " >= 1; the process is not stationary and is capped at " +
                           std::to_string(cfg.max_events) + " events");

  Rng rng(cfg.seed);
  const double base = cfg.mu_bar.sum();
  const Vector colsum = cfg.w.colwise().sum().transpose();
  const detail::ColumnSampler columns(cfg.w);
  detail::Guard guard(cfg.x_max_guard, static_cast<std::size_t>(p));
  std::vector<Event> events;
  double now = 0.0;
  double horizon = cfg.horizon;

  auto record = [&](std::size_t k) {
    if (!guard.admit(k, now)) {
      ++rep.dropped_by_guard;
      return false;
    }
    events.push_back({k, now});
    return true;
  };

  if (const auto* ek = std::get_if<ExponentialKernel>(&cfg.kernel.variant())) {
    // excite[j] = sum over accepted events of actor j of alpha^(now - tau).
    const double log_alpha = std::log(ek->alpha);
    Vector excite = Vector::Zero(p);
    Vector weight(p);
    double bound = base;
    while (events.size() < cfg.max_events) {
      const double dt = rng.exponential(bound);
      now += dt;
      if (now > cfg.horizon) break;
      excite *= std::exp(log_alpha * dt);
      weight = colsum.cwiseProduct(excite);
      const double total = base + weight.sum();
      if (rng.uniform() * bound <= total) {
        // Attribute the event to the baseline or to one source actor, then
        // draw the receiving actor in proportion to that component.
        const double u = rng.uniform() * total;
        std::size_t k;
        if (u < base) {
          k = detail::sample_index(cfg.mu_bar, base, u / base);
        } else {
          const auto j = static_cast<Eigen::Index>(detail::sample_index(weight, total - base, (u - base) / (total - base)));
          k = columns.sample(j, rng.uniform());
        }
        if (record(k)) excite[static_cast<Eigen::Index>(k)] += 1.0;
      }
      bound = base + colsum.dot(excite);
    }
  } else {
    const Kernel& h = cfg.kernel;
    const bool finite = std::isfinite(h.support());
    std::deque<Event> live;
    while (events.size() < cfg.max_events) {
      // Drop events that can no longer contribute (envelope is nonincreasing).
      while (!live.empty()) {
        const double env = h.envelope(now - live.front().time);
        if (env == 0.0 || (!finite && env < 1e-16)) live.pop_front();
        else break;
      }
      double bound = base;
      for (const auto& e : live) bound += colsum[static_cast<Eigen::Index>(e.actor)] * h.envelope(now - e.time);
      now += rng.exponential(bound);
      if (now > cfg.horizon) break;
      Vector rate = cfg.mu_bar;
      for (const auto& e : live) {
        const double v = h(now - e.time);
        if (v > 0.0) rate += cfg.w.col(static_cast<Eigen::Index>(e.actor)) * v;
      }
      const double total = rate.sum();
      if (rng.uniform() * bound <= total) {
        const std::size_t k = detail::sample_index(rate, total, rng.uniform());
        if (record(k)) live.push_back(events.back());
      }
    }
  }
  if (events.size() >= cfg.max_events) {
    rep.truncated = true;
    horizon = events.back().time;
    rep.warnings.push_back("event cap reached; horizon cut to " + std::to_string(horizon));
  }
  return EventStream(std::move(events), static_cast<std::size_t>(p), horizon);
}

struct BlockNetworkSpec {
  std::size_t p = 100;
  std::size_t block = 20;
  double block_lo = 0.0;
  double block_hi = 1.0;
  double off_prob = 0.2;
  double off_lo = 0.0;
  double off_hi = 0.3;
  double top_singular_value = 0.8;
};

struct GeneratedNetwork {
  Matrix w;
  Mask support;  // true where W != 0
  std::vector<std::string> warnings;
};

inline GeneratedNetwork normalize_network(Matrix w, double top_singular_value) {
  GeneratedNetwork out;
  const double top = w.size() ? Eigen::JacobiSVD<Matrix>(w).singularValues()[0] : 0.0;
  if (top > 0.0) {
    w *= top_singular_value / top;
  } else {
    out.warnings.push_back("generated network is all zero; normalization skipped");
  }
  out.support = (w.array() != 0.0);
  out.w = std::move(w);
  return out;
}

/// Dense blocks on the diagonal, sparse weaker links elsewhere, scaled to a
/// fixed top singular value.
inline GeneratedNetwork generate_block_network(const BlockNetworkSpec& spec, Rng& rng) {
  require_config(spec.block > 0 && spec.p % spec.block == 0, "block network: p must be a multiple of the block size");
  require_config(spec.off_prob >= 0.0 && spec.off_prob <= 1.0, "block network: off_prob must be in [0,1]");
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto b = static_cast<Eigen::Index>(spec.block);
  Matrix w = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i) {
      if (i / b == j / b) w(i, j) = rng.uniform(spec.block_lo, spec.block_hi);
      else if (rng.bernoulli(spec.off_prob)) w(i, j) = rng.uniform(spec.off_lo, spec.off_hi);
    }
  return normalize_network(std::move(w), spec.top_singular_value);
}

inline GeneratedNetwork generate_block_network(const BlockNetworkSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return generate_block_network(spec, rng);
}

/// Actors ordered by reaction lag: links mostly run from faster (lower index)
/// to slower actors, i.e. below the diagonal.
struct LagNetworkSpec {
  std::size_t p = 50;
  double below_prob = 0.08;
  double above_prob = 0.01;
  double self_max = 0.3;
  double radius = 0.8;  // spectral radius of W * int h
};

inline GeneratedNetwork generate_lag_network(const LagNetworkSpec& spec, const Kernel& kernel, Rng& rng) {
  const auto p = static_cast<Eigen::Index>(spec.p);
  Matrix w = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i) {
      if (i == j) w(i, j) = rng.uniform(0.0, spec.self_max);
      else if (rng.bernoulli(i > j ? spec.below_prob : spec.above_prob)) w(i, j) = rng.uniform(0.0, 1.0);
    }
  GeneratedNetwork out;
  const double r = stationarity_radius(w, kernel);
  if (r > 0.0) w *= spec.radius / r;
  else out.warnings.push_back("generated network is all zero; normalization skipped");
  out.support = (w.array() != 0.0);
  out.w = std::move(w);
  return out;
}

/// Stationary mean rate (I - W int h)^{-1} mu_bar.
inline Vector stationary_rate(const Matrix& w, const Vector& mu_bar, const Kernel& kernel) {
  const Matrix m = Matrix::Identity(w.rows(), w.cols()) - kernel.integral() * w;
  return m.partialPivLu().solve(mu_bar);
}

}  // namespace hawkes
