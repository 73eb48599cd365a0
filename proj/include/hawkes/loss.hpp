#pragma once

// Poisson-process losses: the per-bin loss
//
//   l_t(lambda) = <delta lambda, 1> - <x_t, log(delta lambda)>,
//
// its cumulative form, the continuous-time negative log likelihood, and the
// gap between the two for exponential kernels.

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>
#include <hawkes/kernels.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace hawkes {

inline double instantaneous_loss(const Vector& lambda, const Vector& x, double delta) {
  require_same_size(lambda.size(), x.size(), "instantaneous_loss");
  if ((lambda.array() <= 0.0).any()) throw NumericalError("instantaneous_loss: rate must be positive");
  return delta * lambda.sum() - x.dot((delta * lambda).array().log().matrix());
}

/// Same loss with the counts given as the bin's events.
inline double instantaneous_loss(const Vector& lambda, std::span<const Event> bin_events, double delta) {
  double loss = delta * lambda.sum();
  for (const auto& e : bin_events) {
    const double r = lambda[static_cast<Eigen::Index>(e.actor)];
    if (!(r > 0.0)) throw NumericalError("instantaneous_loss: rate must be positive");
    loss -= std::log(delta * r);
  }
  return loss;
}

/// Gradient delta*1 - x/lambda.
inline Vector loss_gradient(const Vector& lambda, const Vector& x, double delta) {
  require_same_size(lambda.size(), x.size(), "loss_gradient");
  return (Vector::Constant(lambda.size(), delta) - x.cwiseQuotient(lambda));
}

/// sum_k ( sum_t delta lambda_{t,k} - x_{t,k} log lambda_{t,k} ); rates[t-1] is lambda_t.
inline double cumulative_discrete_loss(std::span<const Vector> rates, const BinnedCounts& counts) {
  if (rates.size() != counts.bins())
    throw ConfigError("cumulative_discrete_loss: " + std::to_string(rates.size()) + " rates for " +
                      std::to_string(counts.bins()) + " bins");
  const double delta = counts.delta();
  double loss = 0.0;
  for (std::size_t t = 1; t <= counts.bins(); ++t) {
    const auto& r = rates[t - 1];
    loss += delta * r.sum();
    for (const auto& e : counts.bin(t)) {
      const double v = r[static_cast<Eigen::Index>(e.actor)];
      if (!(v > 0.0)) throw NumericalError("cumulative_discrete_loss: rate must be positive");
      loss -= std::log(v);
    }
  }
  return loss;
}

/// Intensity mu_k(tau_n) of each event's own actor, using events strictly before it.
inline std::vector<double> event_intensities(const EventStream& stream, const Kernel& kernel, const Matrix& w,
                                             const Vector& mu_bar) {
  const auto evs = stream.events();
  std::vector<double> out(evs.size());
  if (const auto* ek = std::get_if<ExponentialKernel>(&kernel.variant())) {
    // state[j] = sum over earlier events of actor j of alpha^(now - tau).
    const double log_alpha = std::log(ek->alpha);
    Vector state = Vector::Zero(w.cols());
    Vector pending = Vector::Zero(w.cols());
    double now = 0.0;
    for (std::size_t n = 0; n < evs.size(); ++n) {
      if (evs[n].time > now) {
        state = (state + pending) * std::exp(log_alpha * (evs[n].time - now));
        pending.setZero();
        now = evs[n].time;
      }
      const auto k = static_cast<Eigen::Index>(evs[n].actor);
      out[n] = mu_bar[k] + w.row(k).dot(state);
      pending[k] += 1.0;  // ties do not excite each other
    }
    return out;
  }
  const double support = kernel.support();
  std::size_t first = 0;
  for (std::size_t n = 0; n < evs.size(); ++n) {
    while (first < n && evs[n].time - evs[first].time > support) ++first;
    const auto k = static_cast<Eigen::Index>(evs[n].actor);
    double v = mu_bar[k];
    for (std::size_t m = first; m < n; ++m)
      v += w(k, static_cast<Eigen::Index>(evs[m].actor)) * kernel(evs[n].time - evs[m].time);
    out[n] = v;
  }
  return out;
}

/// Continuous-time negative log likelihood over (0, T]:
/// sum_k int_0^T mu_k - sum_n log mu_{k_n}(tau_n).
inline double continuous_nll(const EventStream& stream, const Kernel& kernel, const Matrix& w, const Vector& mu_bar,
                             double horizon) {
  require_same_size(w.rows(), mu_bar.size(), "continuous_nll");
  double integral = mu_bar.sum() * horizon;
  const Vector colsum = w.colwise().sum().transpose();
  for (const auto& e : stream.events())
    integral += colsum[static_cast<Eigen::Index>(e.actor)] * kernel.cumulative(horizon - e.time);
  double logs = 0.0;
  for (const double v : event_intensities(stream, kernel, w, mu_bar)) {
    if (!(v > 0.0)) throw NumericalError("continuous_nll: nonpositive intensity at an event");
    logs += std::log(v);
  }
  return integral - logs;
}

/// Exact discretized rates lambda_1..lambda_n by iterating the dynamics.
inline std::vector<Vector> discretized_rates(const BinnedCounts& counts, const Kernel& kernel, const Matrix& w,
                                             const Vector& mu_bar) {
  KernelDynamics dyn(kernel, counts.actors(), counts.delta(), mu_bar);
  std::vector<Vector> rates;
  rates.reserve(counts.bins());
  Vector lambda = mu_bar;
  for (std::size_t t = 1; t <= counts.bins(); ++t) {
    rates.push_back(lambda);
    lambda = apply(dyn.next(counts.bin(t), &w), lambda, w);
  }
  return rates;
}

struct DiscretizationGap {
  double gap = 0.0;
  double bound = 0.0;
  double continuous = 0.0;
  double discrete = 0.0;
  double x_max = 0.0;
};

/// |L_T(mu) - L_T^(delta)(lambda)| against C N_T delta with
/// C = 3 p W_max / 2 + W_max x_max p / mu_min - log(alpha).
/// Without a declared x_max, the largest per-actor bin count over delta is used.
inline DiscretizationGap discretization_gap(const EventStream& stream, const Matrix& w, const Vector& mu_bar,
                                            double alpha, double delta, std::optional<double> x_max = std::nullopt) {
  const double mu_min = mu_bar.minCoeff();
  if (!(mu_min > 0.0)) throw ConfigError("discretization_gap: mu_min must be positive");
  const auto kernel = Kernel::exponential(alpha);
  const BinnedCounts counts(stream, delta);
  DiscretizationGap out;
  const auto rates = discretized_rates(counts, kernel, w, mu_bar);
  out.discrete = cumulative_discrete_loss(rates, counts);
  out.continuous = continuous_nll(stream, kernel, w, mu_bar, counts.horizon());
  out.gap = std::abs(out.continuous - out.discrete);
  out.x_max = x_max ? *x_max : static_cast<double>(counts.max_count()) / delta;
  const double p = static_cast<double>(w.rows());
  const double w_max = w.size() ? w.maxCoeff() : 0.0;
  const double c = 1.5 * p * w_max + w_max * out.x_max * p / mu_min - std::log(alpha);
  out.bound = c * static_cast<double>(stream.size()) * delta;
  return out;
}

/// Moving average (delta/D) sum_{i<D/delta} l_{t-i}. Entry i is the window
/// ending at bin i + D/delta (1-based), so the result has n - D/delta + 1 entries.
inline std::vector<double> moving_average_loss(std::span<const double> losses, double window, double delta) {
  require_config(window >= delta * (1.0 - 1e-12), "moving average window must be >= delta");
  const double ratio = window / delta;
  const auto w = static_cast<std::size_t>(std::llround(ratio));
  require_config(std::abs(ratio - static_cast<double>(w)) < 1e-6 * std::max(1.0, ratio),
                 "moving average window must be a multiple of delta");
  std::vector<double> out;
  if (losses.size() < w) return out;
  out.reserve(losses.size() - w + 1);
  // Kahan-compensated running sum keeps long traces exact enough.
  double sum = 0.0, comp = 0.0;
  auto add = [&](double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  };
  for (std::size_t i = 0; i < losses.size(); ++i) {
    add(losses[i]);
    if (i >= w) add(-losses[i - w]);
    if (i + 1 >= w) out.push_back(sum / static_cast<double>(w));
  }
  return out;
}

struct LossRecord {
  std::size_t t = 0;
  double instantaneous = 0.0;
  double cumulative = 0.0;
  std::optional<double> moving_average;
};

inline std::vector<LossRecord> loss_records(std::span<const double> losses, std::optional<double> window = {},
                                            double delta = 1.0) {
  std::vector<LossRecord> out(losses.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    cum += losses[i];
    out[i] = {i + 1, losses[i], cum, std::nullopt};
  }
  if (window) {
    const auto ma = moving_average_loss(losses, *window, delta);
    const std::size_t offset = losses.size() - ma.size();
    for (std::size_t i = 0; i < ma.size(); ++i) out[offset + i].moving_average = ma[i];
  }
  return out;
}

/// CSV `t,instantaneous,cumulative,moving_avg`; moving_avg is blank until defined.
inline void write_loss_trace(std::ostream& out, std::span<const LossRecord> records, std::size_t stride = 1) {
  out << "t,instantaneous,cumulative,moving_avg\n";
  char buf[128];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (stride > 1 && r.t % stride != 0 && i + 1 != records.size()) continue;
    if (r.moving_average)
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.t, r.instantaneous, r.cumulative, *r.moving_average);
    else
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,\n", r.t, r.instantaneous, r.cumulative);
    out << buf;
  }
}

}  // namespace hawkes
