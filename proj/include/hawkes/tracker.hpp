#pragma once

// Online rate tracking with a known influence matrix. Each bin:
//   1. incur l_t(lambda_hat_t)
//   2. lambda_tilde = proj_Lambda((1 - eta_t) lambda_hat_t + eta_t x_t / delta)
//   3. lambda_hat_{t+1} = proj_Lambda(Phi_t(lambda_tilde, W))
// With eta_t = 0 this is the direct evaluation of the discretized rate.

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>
#include <hawkes/kernels.hpp>
#include <hawkes/loss.hpp>
#include <hawkes/projections.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace hawkes {

enum class Schedule { Constant, InverseSqrt };

/// eta_t = base / sqrt(horizon_bins) (Constant) or base / sqrt(t) (InverseSqrt).
struct StepSize {
  double base = 0.0;
  Schedule schedule = Schedule::Constant;
  std::size_t horizon_bins = 1;

  double at(std::size_t t) const {
    const double n = schedule == Schedule::Constant ? static_cast<double>(std::max<std::size_t>(horizon_bins, 1))
                                                    : static_cast<double>(std::max<std::size_t>(t, 1));
    return base / std::sqrt(n);
  }

  static StepSize constant(double base, std::size_t horizon_bins) { return {base, Schedule::Constant, horizon_bins}; }
  static StepSize zero() { return {0.0, Schedule::Constant, 1}; }
};

/// The decision box Lambda = [lo, hi]^p.
struct RateBounds {
  double lo = 1e-8;
  double hi = 1e4;
};

inline void check_step(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw ConfigError("step size eta_t = " + std::to_string(eta) + " is outside [0, 1]");
}

/// proj_Lambda((1 - eta) lambda_hat + eta x / delta) with x given as the bin's events.
inline Vector posterior_rate(const Vector& lambda_hat, std::span<const Event> bin_events, double eta, double delta,
                             const RateBounds& bounds) {
  check_step(eta);
  Vector out = (1.0 - eta) * lambda_hat;
  for (const auto& e : bin_events) out[static_cast<Eigen::Index>(e.actor)] += eta / delta;
  return project_box(out, bounds.lo, bounds.hi);
}

class Tracker {
 public:
  Tracker(Kernel kernel, Matrix w, Vector mu_bar, double delta, StepSize eta, RateBounds bounds = {})
      : dyn_(std::move(kernel), static_cast<std::size_t>(mu_bar.size()), delta, mu_bar),
        w_(std::move(w)),
        eta_(eta),
        bounds_(bounds) {
    require_same_size(w_.rows(), mu_bar.size(), "Tracker W rows");
    require_same_size(w_.cols(), mu_bar.size(), "Tracker W cols");
    require_config(bounds.lo > 0.0 && bounds.lo <= bounds.hi, "rate bounds need 0 < lambda_min <= lambda_max");
    if (eta.schedule == Schedule::InverseSqrt) check_step(eta.at(1));
    rate_ = project_box(mu_bar, bounds.lo, bounds.hi);
  }

  /// Consumes bin next_bin() and returns the loss incurred by the forecast.
  double step(std::span<const Event> bin_events) {
    const std::size_t t = dyn_.next_bin();
    const double loss = instantaneous_loss(rate_, bin_events, dyn_.delta());
    const Vector tilde = posterior_rate(rate_, bin_events, eta_.at(t), dyn_.delta(), bounds_);
    const DynamicsStep s = dyn_.next(bin_events, &w_);
    rate_ = project_box(apply(s, tilde, w_), bounds_.lo, bounds_.hi);
    return loss;
  }

  /// lambda_hat for the next bin, available before its counts are read.
  const Vector& forecast() const { return rate_; }
  std::size_t next_bin() const { return dyn_.next_bin(); }
  const Matrix& network() const { return w_; }
  std::size_t buffered_events() const { return dyn_.buffered(); }

  /// False when the kernel can produce A_t entries above 1, so the
  /// contractivity precondition is not checked.
  bool contractive() const { return dyn_.kernel().is_nonincreasing(); }

 private:
  KernelDynamics dyn_;
  Matrix w_;
  StepSize eta_;
  RateBounds bounds_;
  Vector rate_;
};

struct TrackOptions {
  bool keep_rates = false;
  std::size_t max_bins = std::numeric_limits<std::size_t>::max();
};

struct TrackResult {
  std::vector<double> losses;
  std::vector<Vector> rates;  // rates[t-1] = lambda_hat_t, when kept
};

inline TrackResult run_tracker(const BinnedCounts& counts, const Kernel& kernel, const Matrix& w, const Vector& mu_bar,
                               StepSize eta, RateBounds bounds = {}, TrackOptions opts = {}) {
  Tracker tracker(kernel, w, mu_bar, counts.delta(), eta, bounds);
  TrackResult out;
  const std::size_t n = std::min(counts.bins(), opts.max_bins);
  out.losses.reserve(n);
  if (opts.keep_rates) out.rates.reserve(n);
  for (std::size_t t = 1; t <= n; ++t) {
    if (opts.keep_rates) out.rates.push_back(tracker.forecast());
    out.losses.push_back(tracker.step(counts.bin(t)));
  }
  return out;
}

/// Step-size selection by accumulated loss on a prefix of the data: each
/// candidate is scored by `prefix_loss` and the minimizer wins.
inline double select_step_size(std::span<const double> candidates, const std::function<double(double)>& prefix_loss) {
  require_config(!candidates.empty(), "select_step_size: no candidates");
  double best = candidates.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (const double c : candidates) {
    const double l = prefix_loss(c);
    if (l < best_loss) {
      best_loss = l;
      best = c;
    }
  }
  return best;
}

inline double sum_of(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s;
}

}  // namespace hawkes
