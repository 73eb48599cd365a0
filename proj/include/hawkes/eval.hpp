#pragma once

// Scoring: regret against a comparator sequence, percentile bands over
// trials, ROC curves for edge recovery, significance counts, and a
// goodness-of-fit test for simulated streams via time rescaling.

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>
#include <hawkes/kernels.hpp>
#include <hawkes/loss.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace hawkes {

/// l_t(rates[t-1]) for every bin.
inline std::vector<double> losses_of(std::span<const Vector> rates, const BinnedCounts& counts) {
  if (rates.size() != counts.bins()) throw ConfigError("losses_of: rates and bins differ in length");
  std::vector<double> out(rates.size());
  for (std::size_t t = 1; t <= counts.bins(); ++t)
    out[t - 1] = instantaneous_loss(rates[t - 1], counts.bin(t), counts.delta());
  return out;
}

/// Cumulative sum_s (learner_s - comparator_s).
inline std::vector<double> regret_curve(std::span<const double> learner, std::span<const double> comparator) {
  if (learner.size() != comparator.size()) throw ConfigError("regret_curve: trace length mismatch");
  std::vector<double> out(learner.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < learner.size(); ++i) out[i] = acc += learner[i] - comparator[i];
  return out;
}

inline std::vector<double> regret_vs(std::span<const Vector> comparator_rates, const BinnedCounts& counts,
                                     std::span<const double> learner_losses) {
  const auto comp = losses_of(comparator_rates, counts);
  return regret_curve(learner_losses, comp);
}

/// sum_t ||lambda_{t+1} - Phi_t(lambda_t, W)||_2 over the comparator sequence.
inline double variation_term(std::span<const Vector> comparator_rates, const BinnedCounts& counts,
                             const Kernel& kernel, const Matrix& w, const Vector& mu_bar) {
  if (comparator_rates.size() != counts.bins()) throw ConfigError("variation_term: trace length mismatch");
  KernelDynamics dyn(kernel, counts.actors(), counts.delta(), mu_bar);
  double total = 0.0;
  for (std::size_t t = 1; t < counts.bins(); ++t) {
    const auto step = dyn.next(counts.bin(t), &w);
    total += (comparator_rates[t] - apply(step, comparator_rates[t - 1], w)).norm();
  }
  return total;
}

/// Linear-interpolation percentile (the default "type 7" rule); q in [0, 100].
inline double percentile(std::vector<double> values, double q) {
  require_config(!values.empty(), "percentile of an empty sample");
  require_config(q >= 0.0 && q <= 100.0, "percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// bands[i][t] is percentile qs[i] across trials of series[trial][t]. All
/// series must have the same length.
inline std::vector<std::vector<double>> paired_percentiles(const std::vector<std::vector<double>>& series,
                                                           std::span<const double> qs) {
  require_config(!series.empty(), "paired_percentiles: no trials");
  const std::size_t n = series.front().size();
  for (const auto& s : series)
    if (s.size() != n) throw ConfigError("paired_percentiles: trials differ in length");
  std::vector<std::vector<double>> bands(qs.size(), std::vector<double>(n));
  std::vector<double> column(series.size());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < series.size(); ++i) column[i] = series[i][t];
    std::sort(column.begin(), column.end());
    for (std::size_t j = 0; j < qs.size(); ++j) bands[j][t] = percentile(column, qs[j]);
  }
  return bands;
}

enum class RocMode { FullSupport, Top10 };

struct RocCurve {
  std::vector<double> thresholds;  // +inf first, then distinct scores in decreasing order
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Entries of W_true counted as true edges in the given mode.
inline Mask true_edges(const Matrix& w_true, RocMode mode, double floor = 1e-6) {
  if (mode == RocMode::FullSupport) return (w_true.array().abs() > floor);
  const auto n = static_cast<std::size_t>(w_true.size());
  const auto keep = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n)));
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(w_true.data()[a]) > std::abs(w_true.data()[b]);
  });
  Mask m = Mask::Constant(w_true.rows(), w_true.cols(), false);
  for (std::size_t i = 0; i < keep; ++i) m.data()[order[i]] = true;
  return m;
}

/// Area under the ROC curve as P(score_pos > score_neg) + P(tie) / 2.
inline double auc(const Matrix& scores, const Mask& positive) {
  require_same_size(scores.size(), positive.size(), "auc");
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores.data()[a] < scores.data()[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores.data()[order[j]] == scores.data()[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average 1-based rank of the tie group
    for (std::size_t k = i; k < j; ++k)
      if (positive.data()[order[k]]) {
        rank_sum += mid;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return 0.5;
  const double pd = static_cast<double>(pos);
  return (rank_sum - pd * (pd + 1.0) / 2.0) / (pd * static_cast<double>(neg));
}

/// Threshold sweep over W_hat; an entry is declared an edge when >= threshold.
inline RocCurve roc(const Matrix& w_hat, const Matrix& w_true, RocMode mode, double floor = 1e-6) {
  require_same_size(w_hat.rows(), w_true.rows(), "roc");
  require_same_size(w_hat.cols(), w_true.cols(), "roc");
  const Mask positive = true_edges(w_true, mode, floor);
  RocCurve out;
  out.positives = static_cast<std::size_t>(positive.count());
  out.negatives = static_cast<std::size_t>(positive.size()) - out.positives;
  const auto n = static_cast<std::size_t>(w_hat.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w_hat.data()[a] > w_hat.data()[b]; });
  const double np = std::max<double>(1.0, static_cast<double>(out.positives));
  const double nn = std::max<double>(1.0, static_cast<double>(out.negatives));
  out.thresholds.push_back(std::numeric_limits<double>::infinity());
  out.tpr.push_back(0.0);
  out.fpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double thr = w_hat.data()[order[i]];
    while (i < n && w_hat.data()[order[i]] == thr) (positive.data()[order[i++]] ? tp : fp)++;
    out.thresholds.push_back(thr);
    out.tpr.push_back(static_cast<double>(tp) / np);
    out.fpr.push_back(static_cast<double>(fp) / nn);
  }
  out.auc = auc(w_hat, positive);
  return out;
}

struct SignificanceCount {
  std::size_t above = 0;  // i < j in the ordering
  std::size_t below = 0;  // i > j
};

/// Entries of W_hat above `threshold` split by side of the diagonal after
/// reordering actors by `ordering` (ordering[r] = actor at position r).
inline SignificanceCount significance_count(const Matrix& w_hat, double threshold,
                                            std::span<const std::size_t> ordering = {}) {
  const auto p = w_hat.rows();
  require_same_size(p, w_hat.cols(), "significance_count");
  std::vector<std::size_t> ord(ordering.begin(), ordering.end());
  if (ord.empty()) {
    ord.resize(static_cast<std::size_t>(p));
    std::iota(ord.begin(), ord.end(), 0);
  }
  require_same_size(static_cast<Eigen::Index>(ord.size()), p, "significance_count ordering");
  SignificanceCount out;
  for (Eigen::Index r = 0; r < p; ++r)
    for (Eigen::Index c = 0; c < p; ++c) {
      if (r == c) continue;
      if (w_hat(static_cast<Eigen::Index>(ord[static_cast<std::size_t>(r)]),
                static_cast<Eigen::Index>(ord[static_cast<std::size_t>(c)])) > threshold)
        (r < c ? out.above : out.below)++;
    }
  return out;
}

/// Compensator increments between consecutive events of each actor (the
/// first measured from time 0), pooled over actors. Under the model they are
/// i.i.d. Exp(1).
inline std::vector<double> time_rescaled_intervals(const EventStream& stream, const Kernel& kernel, const Matrix& w,
                                                   const Vector& mu_bar) {
  const auto p = mu_bar.size();
  const auto evs = stream.events();
  std::vector<double> out;
  out.reserve(evs.size());
  Vector comp = Vector::Zero(p);  // Lambda_k(now)
  Vector last = Vector::Zero(p);  // Lambda_k at the previous event of k
  if (const auto* ek = std::get_if<ExponentialKernel>(&kernel.variant())) {
    const double log_alpha = std::log(ek->alpha);
    Vector state = Vector::Zero(p);  // sum_j alpha^(now - tau) per source actor
    double now = 0.0;
    for (const auto& e : evs) {
      const double dt = e.time - now;
      if (dt > 0.0) {
        const double decay = std::exp(log_alpha * dt);
        comp += mu_bar * dt + w * (state * ((1.0 - decay) / -log_alpha));
        state *= decay;
        now = e.time;
      }
      const auto k = static_cast<Eigen::Index>(e.actor);
      out.push_back(comp[k] - last[k]);
      last[k] = comp[k];
      state[k] += 1.0;
    }
    return out;
  }
  // Generic: Lambda_k(tau) = mu_k tau + sum_{tau_n < tau} W_{k,k_n} H(tau - tau_n).
  for (std::size_t n = 0; n < evs.size(); ++n) {
    const auto k = static_cast<Eigen::Index>(evs[n].actor);
    double c = mu_bar[k] * evs[n].time;
    for (std::size_t m = 0; m < n && evs[m].time < evs[n].time; ++m)
      c += w(k, static_cast<Eigen::Index>(evs[m].actor)) * kernel.cumulative(evs[n].time - evs[m].time);
    out.push_back(c - last[k]);
    last[k] = c;
  }
  return out;
}

/// Kolmogorov limiting distribution Q(x) = P(sqrt(n) D_n > x).
inline double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.3) {
    // The alternating series converges slowly here; use the dual (theta) form.
    const double f = std::sqrt(2.0 * M_PI) / x;
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) s += std::exp(-std::pow(2.0 * k - 1.0, 2) * M_PI * M_PI / (8.0 * x * x));
    return std::clamp(1.0 - f * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample KS test against Exp(1), with the small-sample correction
/// sqrt(n) + 0.12 + 0.11 / sqrt(n).
inline KsResult ks_test_exponential(std::vector<double> samples) {
  KsResult out;
  out.n = samples.size();
  if (samples.empty()) return out;
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = -std::expm1(-std::max(samples[i], 0.0));
    out.statistic = std::max({out.statistic, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double rn = std::sqrt(n);
  out.p_value = kolmogorov_q((rn + 0.12 + 0.11 / rn) * out.statistic);
  return out;
}

}  // namespace hawkes
