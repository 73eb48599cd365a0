#pragma once

// Offline fit of W by proximal gradient on the time-averaged discretized loss
//
//   F(W) = (1/n) sum_t l_t(mu + W K_t) + gamma ||W||_1,   W >= 0,
//
// with the direct-calculation vectors K_1 = 0, K_{t+1} = alpha^delta K_t + y_t.
// The linear part sum_t <delta 1, mu + W K_t> only needs S = sum_t K_t, so
// K_t is stored for bins that contain events and one evaluation costs
// O(N_T p) instead of O(n p^2).

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>
#include <hawkes/kernels.hpp>
#include <hawkes/loss.hpp>
#include <hawkes/tracker.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace hawkes {

class BatchData {
 public:
  BatchData(const BinnedCounts& counts, const Kernel& kernel, Vector mu_bar)
      : delta_(counts.delta()), bins_(counts.bins()), total_(counts.total()), mu_bar_(std::move(mu_bar)) {
    if (!kernel.is_exponential_family()) throw ConfigError("batch fit needs an exponential-family kernel");
    const auto p = static_cast<Eigen::Index>(counts.actors());
    require_same_size(mu_bar_.size(), p, "batch mu_bar");
    KernelDynamics dyn(kernel, counts.actors(), delta_, mu_bar_);
    const double decay = std::pow(kernel.alpha(), delta_);
    std::size_t event_bins = counts.nonempty_bins();
    k_ = Matrix::Zero(p, static_cast<Eigen::Index>(event_bins));
    s_ = Vector::Zero(p);
    actor_.reserve(total_);
    column_.reserve(total_);
    Vector k = Vector::Zero(p);
    Eigen::Index col = 0;
    for (std::size_t t = 1; t <= bins_; ++t) {
      s_ += k;
      const auto evs = counts.bin(t);
      if (!evs.empty()) {
        k_.col(col) = k;
        for (const auto& e : evs) {
          actor_.push_back(static_cast<Eigen::Index>(e.actor));
          column_.push_back(col);
        }
        ++col;
      }
      k = decay * k + dyn.next(evs, nullptr).y;
    }
  }

  Eigen::Index actors() const { return mu_bar_.size(); }
  std::size_t bins() const { return bins_; }
  std::size_t events() const { return total_; }
  double delta() const { return delta_; }
  const Vector& mu_bar() const { return mu_bar_; }
  const Vector& k_sum() const { return s_; }

  /// sum_t l_t(mu + W K_t), i.e. the unaveraged smooth part.
  double total_loss(const Matrix& w) const { return evaluate(w, nullptr); }

  /// Total loss and its gradient with respect to W.
  double total_loss(const Matrix& w, Matrix& grad) const { return evaluate(w, &grad); }

 private:
  double evaluate(const Matrix& w, Matrix* grad) const {
    require_same_size(w.rows(), actors(), "batch W");
    require_same_size(w.cols(), actors(), "batch W");
    const Matrix wt = w.transpose();  // row k of W as a contiguous column
    const double n = static_cast<double>(bins_);
    double value = delta_ * (n * mu_bar_.sum() + w.colwise().sum().dot(s_));
    Matrix gt;
    if (grad) gt = Matrix::Zero(actors(), actors());
    for (std::size_t e = 0; e < actor_.size(); ++e) {
      const Eigen::Index k = actor_[e];
      const auto kt = k_.col(column_[e]);
      const double rate = mu_bar_[k] + wt.col(k).dot(kt);
      if (!(rate > 0.0)) throw NumericalError("batch loss: nonpositive rate at an event");
      value -= std::log(delta_ * rate);
      if (grad) gt.col(k).noalias() -= kt / rate;
    }
    if (grad) {
      *grad = gt.transpose();
      grad->rowwise() += delta_ * s_.transpose();
    }
    return value;
  }

  double delta_;
  std::size_t bins_, total_;
  Vector mu_bar_;
  Matrix k_;  // K_t for each bin with events
  Vector s_;
  std::vector<Eigen::Index> actor_, column_;
};

struct BatchOptions {
  double l1_penalty = 1e-3;
  std::size_t max_outer = 60;
  std::size_t max_line_search = 15;
  double tol = 1e-9;  // relative change of F
  Matrix w_init;      // empty means zeros
};

struct BatchResult {
  Matrix w;
  std::vector<double> objective;  // F after each accepted iterate, starting at w_init
  std::size_t function_evals = 0;
  std::size_t gradient_evals = 0;
  bool converged = false;
};

/// F(W) as defined above.
inline double batch_objective(const BatchData& data, const Matrix& w, double l1_penalty) {
  return data.total_loss(w) / static_cast<double>(data.bins()) + l1_penalty * w.cwiseAbs().sum();
}

/// Proximal gradient with Barzilai-Borwein initial steps and backtracking.
inline BatchResult batch_fit(const BatchData& data, const BatchOptions& opts = {}) {
  require_config(opts.l1_penalty >= 0.0, "batch: l1 penalty must be >= 0");
  require_config(data.bins() > 0, "batch: no bins");
  const auto p = data.actors();
  const double inv_n = 1.0 / static_cast<double>(data.bins());
  const double gamma = opts.l1_penalty;
  auto prox = [gamma](const Matrix& z, double s) -> Matrix { return (z.array() - s * gamma).cwiseMax(0.0).matrix(); };
  auto penalty = [gamma](const Matrix& w) { return gamma * w.sum(); };

  BatchResult out;
  Matrix w = opts.w_init.size() ? Matrix(opts.w_init.cwiseMax(0.0)) : Matrix::Zero(p, p);
  Matrix grad(p, p);
  double f = data.total_loss(w, grad) * inv_n;
  grad *= inv_n;
  ++out.gradient_evals;
  double obj = f + penalty(w);
  out.objective.push_back(obj);

  double step = 1.0 / std::max(grad.norm(), 1e-12);
  Matrix w_prev, grad_prev;
  for (std::size_t it = 0; it < opts.max_outer; ++it) {
    if (it > 0) {
      const Matrix dw = w - w_prev, dg = grad - grad_prev;
      const double curv = (dw.array() * dg.array()).sum();
      if (curv > 0.0) step = dw.squaredNorm() / curv;
    }
    Matrix cand;
    double f_cand = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (std::size_t ls = 0; ls < opts.max_line_search; ++ls) {
      cand = prox(w - step * grad, step);
      const Matrix d = cand - w;
      try {
        f_cand = data.total_loss(cand) * inv_n;
      } catch (const NumericalError&) {
        f_cand = std::numeric_limits<double>::infinity();
      }
      ++out.function_evals;
      if (f_cand <= f + (grad.array() * d.array()).sum() + d.squaredNorm() / (2.0 * step)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    const double obj_cand = f_cand + penalty(cand);
    if (!accepted && !(obj_cand <= obj)) {
      // An increase at rounding level means no representable progress is left.
      if (obj_cand - obj <= 1e-12 * std::max(1.0, std::abs(obj))) {
        out.converged = true;
        break;
      }
      std::string trace;
      for (const double v : out.objective) trace += " " + std::to_string(v);
      throw NumericalError("batch: objective increased after line search exhaustion; trace:" + trace);
    }
    w_prev = std::move(w);
    grad_prev = grad;
    w = std::move(cand);
    f = data.total_loss(w, grad) * inv_n;
    grad *= inv_n;
    ++out.gradient_evals;
    const double obj_new = f + penalty(w);
    out.objective.push_back(obj_new);
    const bool done = std::abs(obj - obj_new) <= opts.tol * std::max(1.0, std::abs(obj));
    obj = obj_new;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.w = std::move(w);
  return out;
}

/// Total discretized loss sum_k (sum_t delta lambda_{t,k} - sum_t x_{t,k} log lambda_{t,k})
/// of the direct-calculation rates under W.
inline double batch_loss_of(const Matrix& w, const BinnedCounts& counts, const Kernel& kernel, const Vector& mu_bar) {
  const double log_delta = std::log(counts.delta()) * static_cast<double>(counts.total());
  if (kernel.is_exponential_family()) return BatchData(counts, kernel, mu_bar).total_loss(w) + log_delta;
  const auto run = run_tracker(counts, kernel, w, mu_bar, StepSize::zero(), RateBounds{1e-300, 1e300});
  return sum_of(run.losses) + log_delta;
}

/// Same, reusing precomputed K_t.
inline double batch_loss_of(const Matrix& w, const BatchData& data) {
  return data.total_loss(w) + std::log(data.delta()) * static_cast<double>(data.events());
}

}  // namespace hawkes
