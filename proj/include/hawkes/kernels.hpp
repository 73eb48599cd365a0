#pragma once

// Influence functions h(tau) and the per-bin affine dynamics
//
//   Phi_t(lambda, W) = A_t lambda + W y_t + c_t
//
// that reproduce the discretized Hawkes rate
//
//   lambda_{t,k} = mu_k + sum_{bin(tau_n) < t} W_{k,k_n} h(delta t - tau_n)
//
// when iterated from lambda_1 = mu.

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>

#include <cmath>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hawkes {

/// h(tau) = alpha^tau for tau > 0.
struct ExponentialKernel {
  double alpha;
};

/// h(tau) = alpha^(tau - delay) for tau > delay.
struct DelayedExponentialKernel {
  double alpha;
  double delay;
};

/// h(tau) = 1 for 0 < tau < width.
struct RectangularKernel {
  double width;
};

/// Piecewise-linear h on a grid 0 = s_0 < s_1 < ... < s_m = B, zero outside (0, B].
struct TabulatedKernel {
  std::vector<double> grid;
  std::vector<double> values;
};

class Kernel {
 public:
  using Variant = std::variant<ExponentialKernel, DelayedExponentialKernel, RectangularKernel, TabulatedKernel>;

  Kernel(ExponentialKernel k) : v_(k) {
    require_config(k.alpha > 0.0 && k.alpha < 1.0, "exponential kernel needs alpha in (0,1)");
  }
  Kernel(DelayedExponentialKernel k) : v_(k) {
    require_config(k.alpha > 0.0 && k.alpha < 1.0, "delayed exponential kernel needs alpha in (0,1)");
    require_config(k.delay > 0.0, "delayed exponential kernel needs a positive delay");
  }
  Kernel(RectangularKernel k) : v_(k) {
    require_config(k.width > 0.0 && std::isfinite(k.width), "rectangular kernel needs a positive width");
  }
  Kernel(TabulatedKernel k) : v_(std::move(k)) {
    const auto& t = std::get<TabulatedKernel>(v_);
    require_config(t.grid.size() >= 2 && t.grid.size() == t.values.size(),
                   "tabulated kernel needs >= 2 grid points with one value each");
    require_config(t.grid.front() == 0.0, "tabulated kernel grid must start at 0");
    for (std::size_t i = 1; i < t.grid.size(); ++i)
      require_config(t.grid[i] > t.grid[i - 1], "tabulated kernel grid must be increasing");
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      require_config(t.values[i] >= 0.0 && std::isfinite(t.values[i]), "tabulated kernel values must be >= 0");
      if (i > 0 && i + 1 < t.values.size())
        require_config(t.values[i] > 0.0, "tabulated kernel must be positive inside its support");
    }
  }

  static Kernel exponential(double alpha) { return Kernel(ExponentialKernel{alpha}); }
  static Kernel delayed_exponential(double alpha, double delay) {
    return Kernel(DelayedExponentialKernel{alpha, delay});
  }
  static Kernel rectangular(double width) { return Kernel(RectangularKernel{width}); }
  static Kernel tabulated(std::vector<double> grid, std::vector<double> values) {
    return Kernel(TabulatedKernel{std::move(grid), std::move(values)});
  }

  const Variant& variant() const { return v_; }

  /// A_t = alpha^delta I independent of t and W.
  bool is_exponential_family() const {
    return std::holds_alternative<ExponentialKernel>(v_) || std::holds_alternative<DelayedExponentialKernel>(v_);
  }

  double alpha() const {
    if (const auto* e = std::get_if<ExponentialKernel>(&v_)) return e->alpha;
    if (const auto* d = std::get_if<DelayedExponentialKernel>(&v_)) return d->alpha;
    throw ConfigError("kernel has no decay parameter alpha");
  }

  /// Right end of the support; infinity for the exponential family.
  double support() const {
    if (const auto* r = std::get_if<RectangularKernel>(&v_)) return r->width;
    if (const auto* t = std::get_if<TabulatedKernel>(&v_)) return t->grid.back();
    return std::numeric_limits<double>::infinity();
  }

  double operator()(double s) const {
    return std::visit(
        [s](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if (s <= 0.0) return 0.0;
          if constexpr (std::is_same_v<K, ExponentialKernel>) {
            return std::pow(k.alpha, s);
          } else if constexpr (std::is_same_v<K, DelayedExponentialKernel>) {
            return s > k.delay ? std::pow(k.alpha, s - k.delay) : 0.0;
          } else if constexpr (std::is_same_v<K, RectangularKernel>) {
            return s < k.width ? 1.0 : 0.0;
          } else {
            return interpolate(k, s);
          }
        },
        v_);
  }

  /// sup_{u >= s} h(u); nonincreasing in s, used as a thinning bound.
  double envelope(double s) const {
    return std::visit(
        [s, this](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ExponentialKernel>) {
            return s <= 0.0 ? 1.0 : std::pow(k.alpha, s);
          } else if constexpr (std::is_same_v<K, DelayedExponentialKernel>) {
            return s <= k.delay ? 1.0 : std::pow(k.alpha, s - k.delay);
          } else if constexpr (std::is_same_v<K, RectangularKernel>) {
            return s < k.width ? 1.0 : 0.0;
          } else {
            if (s > k.grid.back()) return 0.0;
            double best = s > 0.0 ? (*this)(s) : 0.0;
            for (std::size_t i = 0; i < k.grid.size(); ++i)
              if (k.grid[i] >= s && (i > 0 || s <= 0.0)) best = std::max(best, k.values[i]);
            return best;
          }
        },
        v_);
  }

  /// Integral of h over (0, x].
  double cumulative(double x) const {
    if (x <= 0.0) return 0.0;
    return std::visit(
        [x](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ExponentialKernel>) {
            return -std::expm1(x * std::log(k.alpha)) / -std::log(k.alpha);
          } else if constexpr (std::is_same_v<K, DelayedExponentialKernel>) {
            if (x <= k.delay) return 0.0;
            return -std::expm1((x - k.delay) * std::log(k.alpha)) / -std::log(k.alpha);
          } else if constexpr (std::is_same_v<K, RectangularKernel>) {
            return std::min(x, k.width);
          } else {
            double acc = 0.0;
            for (std::size_t i = 1; i < k.grid.size(); ++i) {
              const double a = k.grid[i - 1], b = k.grid[i];
              if (x <= a) break;
              const double e = std::min(x, b);
              const double he = k.values[i - 1] + (k.values[i] - k.values[i - 1]) * (e - a) / (b - a);
              acc += 0.5 * (k.values[i - 1] + he) * (e - a);
            }
            return acc;
          }
        },
        v_);
  }

  double integral() const { return cumulative(std::numeric_limits<double>::infinity()); }

  /// A_t stays in [0,1] (contractive dynamics) only for nonincreasing h.
  bool is_nonincreasing() const {
    if (const auto* t = std::get_if<TabulatedKernel>(&v_)) {
      for (std::size_t i = 1; i < t->values.size(); ++i)
        if (t->values[i] > t->values[i - 1]) return false;
    }
    return true;
  }

  std::string describe() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ExponentialKernel>) {
            return "exponential " + std::to_string(k.alpha);
          } else if constexpr (std::is_same_v<K, DelayedExponentialKernel>) {
            return "delayed_exponential " + std::to_string(k.alpha) + " " + std::to_string(k.delay);
          } else if constexpr (std::is_same_v<K, RectangularKernel>) {
            return "rectangular " + std::to_string(k.width);
          } else {
            return "tabulated (" + std::to_string(k.grid.size()) + " points)";
          }
        },
        v_);
  }

 private:
  static double interpolate(const TabulatedKernel& k, double s) {
    if (s > k.grid.back()) return 0.0;
    const auto it = std::lower_bound(k.grid.begin(), k.grid.end(), s);
    const auto i = static_cast<std::size_t>(it - k.grid.begin());
    if (i == 0) return k.values[0];
    const double a = k.grid[i - 1], b = k.grid[i];
    return k.values[i - 1] + (k.values[i] - k.values[i - 1]) * (s - a) / (b - a);
  }

  Variant v_;
};

/// One bin of affine dynamics. `a` is the diagonal of A_t; `y_support` lists
/// the nonzero entries of y_t so W y_t costs O(p * nnz).
struct DynamicsStep {
  Vector a;
  Vector y;
  Vector c;
  std::vector<Eigen::Index> y_support;
};

/// A_t lambda + W y_t + c_t (no clamping).
inline Vector apply(const DynamicsStep& step, const Vector& lambda, const Matrix& w) {
  require_same_size(lambda.size(), step.a.size(), "apply");
  require_same_size(w.rows(), step.a.size(), "apply");
  require_same_size(w.cols(), step.y.size(), "apply");
  Vector out = step.a.cwiseProduct(lambda) + step.c;
  for (const auto j : step.y_support) out.noalias() += w.col(j) * step.y[j];
  return out;
}

/// True when the event's effect enters y_t: for non-delayed kernels the event
/// lies in bin t; for delayed exponential, delta*t - D <= tau < delta*(t+1) - D.
inline bool contributes_to_y(const Kernel& kernel, const Event& e, std::size_t t, double delta) {
  if (const auto* d = std::get_if<DelayedExponentialKernel>(&kernel.variant())) {
    const double lo = delta * static_cast<double>(t) - d->delay;
    return e.time >= lo && e.time < lo + delta;
  }
  return bin_of(e.time, delta) == t;
}

/// y_t[k] = sum of h(delta(t+1) - tau_n) over contributing events of actor k.
inline Vector emit_y(const Kernel& kernel, std::span<const Event> events, std::size_t t, double delta,
                     std::size_t p) {
  Vector y = Vector::Zero(static_cast<Eigen::Index>(p));
  const double next = delta * static_cast<double>(t + 1);
  const auto* d = std::get_if<DelayedExponentialKernel>(&kernel.variant());
  for (const auto& e : events) {
    if (!contributes_to_y(kernel, e, t, delta)) continue;
    // The delayed window is exactly where h(next - tau) is positive up to the
    // boundary, so evaluate alpha^(next - tau - D) directly.
    const double v = d ? std::pow(d->alpha, next - e.time - d->delay) : kernel(next - e.time);
    y[static_cast<Eigen::Index>(e.actor)] += v;
  }
  return y;
}

/// Diagonal of A_t. Exponential family: alpha^delta for every actor. Otherwise
/// the W-weighted ratio of next-step to current-step influence of the events
/// in bins before t, with 1 (rectangular) or 1/2 (tabulated) when an actor
/// has no live influence.
inline Vector emit_a(const Kernel& kernel, std::span<const Event> past, const Matrix& w, std::size_t t,
                     double delta) {
  const auto p = w.rows();
  if (kernel.is_exponential_family()) return Vector::Constant(p, std::pow(kernel.alpha(), delta));
  const double now = delta * static_cast<double>(t);
  Vector u0 = Vector::Zero(w.cols()), u1 = Vector::Zero(w.cols());
  for (const auto& e : past) {
    if (bin_of(e.time, delta) >= t) continue;
    const auto j = static_cast<Eigen::Index>(e.actor);
    u0[j] += kernel(now - e.time);
    u1[j] += kernel(now + delta - e.time);
  }
  const Vector den = w * u0;
  const Vector num = w * u1;
  const double empty = std::holds_alternative<RectangularKernel>(kernel.variant()) ? 1.0 : 0.5;
  Vector a(p);
  for (Eigen::Index k = 0; k < p; ++k) a[k] = den[k] > 0.0 ? num[k] / den[k] : empty;
  return a;
}

/// Direct evaluation of the discretized rate at bin t from the full history.
inline Vector exact_rate(const Kernel& kernel, const Matrix& w, const Vector& mu_bar, std::span<const Event> history,
                         std::size_t t, double delta) {
  require_same_size(w.rows(), mu_bar.size(), "exact_rate");
  Vector lambda = mu_bar;
  const double now = delta * static_cast<double>(t);
  for (const auto& e : history) {
    if (bin_of(e.time, delta) >= t) continue;
    const double h = kernel(now - e.time);
    if (h != 0.0) lambda += w.col(static_cast<Eigen::Index>(e.actor)) * h;
  }
  return lambda;
}

/// Emits DynamicsStep for bins 1, 2, ... in order, keeping only the event
/// window the kernel needs: nothing extra for exponential, pending events for
/// delayed exponential, the trailing support window otherwise.
class KernelDynamics {
 public:
  KernelDynamics(Kernel kernel, std::size_t p, double delta, Vector mu_bar)
      : kernel_(std::move(kernel)), p_(p), delta_(delta), mu_bar_(std::move(mu_bar)) {
    require_config(delta > 0.0, "delta must be positive");
    require_same_size(mu_bar_.size(), static_cast<Eigen::Index>(p), "mu_bar");
    if (const auto* d = std::get_if<DelayedExponentialKernel>(&kernel_.variant()))
      require_config(d->delay >= delta * (1.0 - 1e-12), "delayed exponential kernel needs delay >= delta");
    if (const auto* r = std::get_if<RectangularKernel>(&kernel_.variant()))
      require_config(r->width > delta, "rectangular kernel needs width > delta");
    if (kernel_.is_exponential_family()) {
      const double ad = std::pow(kernel_.alpha(), delta);
      a_const_ = Vector::Constant(static_cast<Eigen::Index>(p), ad);
      c_const_ = (1.0 - ad) * mu_bar_;
    }
  }

  const Kernel& kernel() const { return kernel_; }
  double delta() const { return delta_; }
  std::size_t actors() const { return p_; }
  std::size_t next_bin() const { return t_ + 1; }
  const Vector& mu_bar() const { return mu_bar_; }
  bool w_dependent() const { return !kernel_.is_exponential_family(); }

  /// Events held for future steps; bounded by the kernel's window occupancy.
  std::size_t buffered() const { return window_.size() - head_; }

  /// Step for bin t = next_bin(). `bin_events` are the events of bin t. `w`
  /// may be null for exponential-family kernels.
  DynamicsStep next(std::span<const Event> bin_events, const Matrix* w) {
    const std::size_t t = ++t_;
    DynamicsStep step;
    step.y = Vector::Zero(static_cast<Eigen::Index>(p_));
    const double next_edge = delta_ * static_cast<double>(t + 1);

    if (const auto* d = std::get_if<DelayedExponentialKernel>(&kernel_.variant())) {
      window_.insert(window_.end(), bin_events.begin(), bin_events.end());
      const double hi = next_edge - d->delay;
      while (head_ < window_.size() && window_[head_].time < hi) {
        const auto& e = window_[head_++];
        step.y[static_cast<Eigen::Index>(e.actor)] += std::pow(d->alpha, next_edge - e.time - d->delay);
      }
      compact();
      step.a = a_const_;
      step.c = c_const_;
    } else if (kernel_.is_exponential_family()) {
      for (const auto& e : bin_events) step.y[static_cast<Eigen::Index>(e.actor)] += kernel_(next_edge - e.time);
      step.a = a_const_;
      step.c = c_const_;
    } else {
      if (w == nullptr) throw ConfigError("this kernel's A_t depends on W; a network is required");
      step.a = emit_a(kernel_, std::span<const Event>(window_).subspan(head_), *w, t, delta_);
      step.c = (Vector::Ones(step.a.size()) - step.a).cwiseProduct(mu_bar_);
      for (const auto& e : bin_events) step.y[static_cast<Eigen::Index>(e.actor)] += kernel_(next_edge - e.time);
      window_.insert(window_.end(), bin_events.begin(), bin_events.end());
      // Drop events whose influence is over from bin t+1 on.
      const double support = kernel_.support();
      while (head_ < window_.size() && next_edge - window_[head_].time >= support &&
             kernel_(next_edge - window_[head_].time) == 0.0)
        ++head_;
      compact();
    }
    for (Eigen::Index j = 0; j < step.y.size(); ++j)
      if (step.y[j] != 0.0) step.y_support.push_back(j);
    return step;
  }

 private:
  void compact() {
    if (head_ > 64 && head_ * 2 > window_.size()) {
      window_.erase(window_.begin(), window_.begin() + static_cast<std::ptrdiff_t>(head_));
      head_ = 0;
    }
  }

  Kernel kernel_;
  std::size_t p_;
  double delta_;
  Vector mu_bar_;
  Vector a_const_, c_const_;
  std::size_t t_ = 0;
  std::vector<Event> window_;  // live events are window_[head_..]
  std::size_t head_ = 0;
};

}  // namespace hawkes
