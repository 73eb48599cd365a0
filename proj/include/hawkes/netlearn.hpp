#pragma once

// Joint tracking of the rate and the influence matrix for exponential-family
// kernels, where A_t = alpha^delta I does not depend on W.
//
// The tracked rate for any fixed W can be recovered from the one for another
// matrix through a shared vector K_t:
//
//   lambda_hat_t^{W1} = lambda_hat_t^{W2} + (W1 - W2) K_t,
//   K_{t+1} = (1 - eta_t) alpha^delta K_t + y_t,   K_1 = 0,
//
// so the per-bin loss is a convex function g_t(W) of the matrix and W can be
// learned by projected online gradient descent on it. The baseline can be
// learned too by appending it as an extra column with y extended by
// 1 - alpha^delta.

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>
#include <hawkes/kernels.hpp>
#include <hawkes/loss.hpp>
#include <hawkes/projections.hpp>
#include <hawkes/tracker.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace hawkes {

/// lambda^{W1} from lambda^{W2}.
inline Vector translate(const Vector& lambda_w2, const Matrix& w1, const Matrix& w2, const Vector& k) {
  require_same_size(w1.rows(), w2.rows(), "translate");
  require_same_size(w1.cols(), w2.cols(), "translate");
  require_same_size(w1.cols(), k.size(), "translate");
  require_same_size(w1.rows(), lambda_w2.size(), "translate");
  return lambda_w2 + (w1 - w2) * k;
}

/// g_t(W) = <1, delta (lambda0 + W K)> - <x, log(delta (lambda0 + W K))>.
inline double surrogate_loss(const Matrix& w, const Vector& lambda0, const Vector& k, const Vector& x, double delta) {
  const Vector lambda = lambda0 + w * k;
  if ((lambda.array() <= 0.0).any()) throw NumericalError("surrogate_loss: nonpositive rate");
  return instantaneous_loss(lambda, x, delta);
}

/// (delta 1 - x / (lambda0 + W K)) K^T.
inline Matrix surrogate_gradient(const Matrix& w, const Vector& lambda0, const Vector& k, const Vector& x,
                                 double delta) {
  const Vector lambda = lambda0 + w * k;
  return loss_gradient(lambda, x, delta) * k.transpose();
}

/// Soft threshold at `tau` followed by the set projection (prox of
/// tau ||.||_1 + indicator for the separable sets, a composition otherwise).
inline void shrink_and_project(Matrix& w, const FeasibleSet& set, double tau) {
  if (tau > 0.0) w = (w.array() - tau).cwiseMax(0.0).matrix() + (w.array() + tau).cwiseMin(0.0).matrix();
  if (const auto* box = std::get_if<BoxSet>(&set)) {
    w = w.cwiseMax(0.0).cwiseMin(box->w_max);
  } else {
    w = project(set, w);
  }
}

/// Fused gradient step for the box set, one pass over W:
/// W <- clip(soft(W - a k^T, tau), 0, w_max). When `corr` is given it
/// accumulates (W_new - W_old) kn, which spares a second matrix-vector product.
inline void box_gradient_step(Eigen::Ref<Matrix> w, const Vector& a, const Vector& k, double tau, double w_max,
                              const Vector* kn = nullptr, Vector* corr = nullptr) {
  Eigen::ArrayXd v(w.rows());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    auto col = w.col(j).array();
    v = col - a.array() * k[j];
    if (tau > 0.0) v = (v - tau).max(0.0) + (v + tau).min(0.0);
    v = v.max(0.0).min(w_max);
    if (corr) corr->array() += (v - col) * (*kn)[j];
    col = v;
  }
}

struct LearnerConfig {
  Vector mu_bar;  // known baseline, or the starting guess when learn_mu
  double delta = 1.0;
  StepSize eta;
  StepSize rho;
  RateBounds bounds{};
  FeasibleSet set = BoxSet{};
  double l1_penalty = 0.0;
  bool learn_mu = false;
  /// With learn_mu, keeps the baseline column fixed at these values.
  std::optional<Vector> pinned_mu;
  Matrix w_init;  // empty means zeros
  std::optional<double> x_max;
};

class NetworkLearner {
 public:
  NetworkLearner(const Kernel& kernel, const LearnerConfig& cfg)
      : cfg_(cfg),
        p_(cfg.mu_bar.size()),
        m_(cfg.learn_mu ? p_ + 1 : p_),
        dyn_(kernel, static_cast<std::size_t>(p_), cfg.delta, cfg.mu_bar) {
    if (!kernel.is_exponential_family())
      throw ConfigError("network learning needs an exponential-family kernel (A_t must not depend on W)");
    require_config(cfg.bounds.lo > 0.0 && cfg.bounds.lo <= cfg.bounds.hi, "invalid rate bounds");
    require_config(cfg.l1_penalty >= 0.0, "l1 penalty must be >= 0");
    decay_ = std::pow(kernel.alpha(), cfg.delta);
    theta_ = Matrix::Zero(p_, m_);
    if (cfg.w_init.size()) {
      require_same_size(cfg.w_init.rows(), p_, "w_init");
      require_same_size(cfg.w_init.cols(), p_, "w_init");
      theta_.leftCols(p_) = cfg.w_init;
    }
    if (cfg.learn_mu) {
      theta_.col(p_) = cfg.pinned_mu ? *cfg.pinned_mu : cfg.mu_bar;
      offset_ = Vector::Zero(p_);
    } else {
      offset_ = (1.0 - decay_) * cfg.mu_bar;
    }
    k_ = Vector::Zero(m_);
    rate_ = project_box(cfg.learn_mu && cfg.pinned_mu ? *cfg.pinned_mu : cfg.mu_bar, cfg.bounds.lo, cfg.bounds.hi);
    if (cfg.eta.schedule == Schedule::InverseSqrt) check_step(cfg.eta.at(1));
  }

  double step(std::span<const Event> bin_events) {
    const std::size_t t = dyn_.next_bin();
    const double delta = cfg_.delta;
    const double eta = cfg_.eta.at(t);
    const double rho = cfg_.rho.at(t);
    check_step(eta);

    const double loss = instantaneous_loss(rate_, bin_events, delta);
    if (cfg_.x_max) {
      // Events are sorted by time, not actor, so count per actor first.
      Vector x = Vector::Zero(p_);
      for (const auto& e : bin_events) x[static_cast<Eigen::Index>(e.actor)] += 1.0;
      if (x.size() && x.maxCoeff() > delta * *cfg_.x_max) ++x_max_violations_;
    }

    // Innovation on the rate and the rank-one gradient u K_t^T of g_t.
    Vector tilde = (1.0 - eta) * rate_;
    Vector u = Vector::Constant(p_, delta);
    for (const auto& e : bin_events) {
      const auto k = static_cast<Eigen::Index>(e.actor);
      tilde[k] += eta / delta;
      u[k] -= 1.0 / rate_[k];
    }

    const DynamicsStep s = dyn_.next(bin_events, nullptr);
    Vector y_aug(m_);
    y_aug.head(p_) = s.y;
    if (cfg_.learn_mu) y_aug[p_] = 1.0 - decay_;
    const Vector k_next = (1.0 - eta) * decay_ * k_ + y_aug;

    // Phi_t(tilde, W_t), then the translation (W_{t+1} - W_t) K_{t+1}.
    Vector next = decay_ * tilde + offset_;
    for (const auto j : s.y_support) next.noalias() += theta_.col(j) * s.y[j];
    if (cfg_.learn_mu) next.noalias() += theta_.col(p_) * y_aug[p_];

    if (rho != 0.0 && k_.squaredNorm() > 0.0) {
      const Vector a = rho * u;
      // A zero W part of K_t carries no information about W: leave it alone,
      // as the plain learner does.
      if (k_.head(p_).squaredNorm() > 0.0) {
        auto w = theta_.leftCols(p_);
        const double tau = rho * cfg_.l1_penalty;
        if (const auto* box = std::get_if<BoxSet>(&cfg_.set)) {
          const Vector kw = k_.head(p_), knw = k_next.head(p_);
          box_gradient_step(w, a, kw, tau, box->w_max, &knw, &next);
        } else {
          Matrix wm = w;
          wm.noalias() -= a * k_.head(p_).transpose();
          shrink_and_project(wm, cfg_.set, tau);
          next.noalias() += (wm - w) * k_next.head(p_);
          w = wm;
        }
      }
      if (cfg_.learn_mu) {
        auto mu = theta_.col(p_);
        const Vector old = mu;
        mu -= a * k_[p_];
        if (cfg_.pinned_mu)
          mu = *cfg_.pinned_mu;
        else
          mu = mu.cwiseMax(cfg_.bounds.lo).cwiseMin(cfg_.bounds.hi);
        next.noalias() += (mu - old) * k_next[p_];
      }
    }

    const Vector clamped = project_box(next, cfg_.bounds.lo, cfg_.bounds.hi);
    if (clamped != next) ++clamp_count_;
    rate_ = clamped;
    k_ = k_next;
    return loss;
  }

  /// Current W_hat (p x p).
  Matrix network() const { return theta_.leftCols(p_); }
  /// Baseline in use: the learned column when learn_mu, otherwise the fixed one.
  Vector baseline() const { return cfg_.learn_mu ? Vector(theta_.col(p_)) : cfg_.mu_bar; }
  /// [W mu] when learn_mu, W otherwise.
  const Matrix& parameters() const { return theta_; }
  const Vector& k_vector() const { return k_; }
  const Vector& forecast() const { return rate_; }
  std::size_t next_bin() const { return dyn_.next_bin(); }
  std::size_t clamp_count() const { return clamp_count_; }
  std::size_t x_max_violations() const { return x_max_violations_; }

 private:
  LearnerConfig cfg_;
  Eigen::Index p_, m_;
  KernelDynamics dyn_;
  double decay_ = 0.0;
  Matrix theta_;
  Vector offset_;
  Vector k_;
  Vector rate_;
  std::size_t clamp_count_ = 0;
  std::size_t x_max_violations_ = 0;
};

/// Online gradient descent on W with the directly evaluated rate
/// mu + W K_t, K_{t+1} = alpha^delta K_t + y_t.
class OgdLearner {
 public:
  OgdLearner(const Kernel& kernel, const LearnerConfig& cfg)
      : cfg_(cfg), p_(cfg.mu_bar.size()), dyn_(kernel, static_cast<std::size_t>(p_), cfg.delta, cfg.mu_bar) {
    if (!kernel.is_exponential_family()) throw ConfigError("OGD baseline needs an exponential-family kernel");
    require_config(!cfg.learn_mu, "OGD baseline does not learn the baseline rate");
    decay_ = std::pow(kernel.alpha(), cfg.delta);
    w_ = cfg.w_init.size() ? cfg.w_init : Matrix::Zero(p_, p_);
    k_ = Vector::Zero(p_);
    rate_ = project_box(cfg.mu_bar + w_ * k_, cfg.bounds.lo, cfg.bounds.hi);
  }

  double step(std::span<const Event> bin_events) {
    const std::size_t t = dyn_.next_bin();
    const double delta = cfg_.delta;
    const double rho = cfg_.rho.at(t);
    const double loss = instantaneous_loss(rate_, bin_events, delta);
    Vector u = Vector::Constant(p_, delta);
    for (const auto& e : bin_events) u[static_cast<Eigen::Index>(e.actor)] -= 1.0 / rate_[static_cast<Eigen::Index>(e.actor)];
    if (rho != 0.0 && k_.squaredNorm() > 0.0) {
      if (const auto* box = std::get_if<BoxSet>(&cfg_.set)) {
        box_gradient_step(w_, Vector(rho * u), k_, rho * cfg_.l1_penalty, box->w_max);
      } else {
        w_.noalias() -= (rho * u) * k_.transpose();
        shrink_and_project(w_, cfg_.set, rho * cfg_.l1_penalty);
      }
    }
    const DynamicsStep s = dyn_.next(bin_events, nullptr);
    k_ = decay_ * k_ + s.y;
    rate_ = project_box(cfg_.mu_bar + w_ * k_, cfg_.bounds.lo, cfg_.bounds.hi);
    return loss;
  }

  const Matrix& network() const { return w_; }
  const Vector& k_vector() const { return k_; }
  const Vector& forecast() const { return rate_; }
  std::size_t next_bin() const { return dyn_.next_bin(); }

 private:
  LearnerConfig cfg_;
  Eigen::Index p_;
  KernelDynamics dyn_;
  double decay_ = 0.0;
  Matrix w_;
  Vector k_;
  Vector rate_;
};

struct Snapshot {
  std::size_t t = 0;  // bins consumed
  Matrix w;
};

struct LearnOptions {
  std::size_t snapshot_every = 0;
  bool keep_rates = false;
  std::size_t max_bins = std::numeric_limits<std::size_t>::max();
};

struct LearnResult {
  std::vector<double> losses;
  std::vector<Vector> rates;
  std::vector<Snapshot> snapshots;
  Matrix w;
  Vector mu_bar;
  std::size_t clamp_count = 0;
};

template <typename Learner>
LearnResult run_learner(Learner& learner, const BinnedCounts& counts, const LearnOptions& opts = {}) {
  LearnResult out;
  const std::size_t n = std::min(counts.bins(), opts.max_bins);
  out.losses.reserve(n);
  for (std::size_t t = 1; t <= n; ++t) {
    if (opts.keep_rates) out.rates.push_back(learner.forecast());
    out.losses.push_back(learner.step(counts.bin(t)));
    if (opts.snapshot_every && (t % opts.snapshot_every == 0 || t == n)) out.snapshots.push_back({t, learner.network()});
  }
  out.w = learner.network();
  if constexpr (requires { learner.baseline(); }) out.mu_bar = learner.baseline();
  if constexpr (requires { learner.clamp_count(); }) out.clamp_count = learner.clamp_count();
  return out;
}

inline LearnResult learn_network(const BinnedCounts& counts, const Kernel& kernel, const LearnerConfig& cfg,
                                 const LearnOptions& opts = {}) {
  NetworkLearner learner(kernel, cfg);
  return run_learner(learner, counts, opts);
}

inline LearnResult learn_network_ogd(const BinnedCounts& counts, const Kernel& kernel, const LearnerConfig& cfg,
                                     const LearnOptions& opts = {}) {
  OgdLearner learner(kernel, cfg);
  auto out = run_learner(learner, counts, opts);
  out.mu_bar = cfg.mu_bar;
  return out;
}

}  // namespace hawkes
