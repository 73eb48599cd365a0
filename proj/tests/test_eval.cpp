#include "support.hpp"

#include <hawkes/eval.hpp>
#include <hawkes/simulate.hpp>
#include <hawkes/tracker.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace hawkes;

namespace {

// P(score_pos > score_neg) + P(tie)/2 by enumerating all pairs.
double pairwise_auc(const Matrix& s, const Mask& pos) {
  double wins = 0, pairs = 0;
  for (Eigen::Index a = 0; a < s.size(); ++a)
    for (Eigen::Index b = 0; b < s.size(); ++b)
      if (pos.data()[a] && !pos.data()[b]) {
        pairs += 1;
        wins += s.data()[a] > s.data()[b] ? 1.0 : (s.data()[a] == s.data()[b] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST(Regret, ZeroAgainstItselfAndLengthChecks) {
  const std::vector<double> l{1.0, -2.0, 3.5};
  for (const double v : regret_curve(l, l)) EXPECT_EQ(v, 0.0);
  const std::vector<double> c{0.5, -2.5, 3.0};
  const auto r = regret_curve(l, c);
  EXPECT_DOUBLE_EQ(r.back(), 1.5);
  EXPECT_THROW(regret_curve(l, std::vector<double>{1.0}), ConfigError);
}

TEST(Regret, OracleComparatorHasZeroVariation) {
  Rng rng(1);
  const auto s = test::random_stream(rng, 3, 300, 30.0);
  const BinnedCounts c(s, 0.1);
  const Matrix w = test::random_matrix(rng, 3, 3, 0.0, 0.5);
  const Vector mu = Vector::Constant(3, 0.2);
  for (const auto& h : {Kernel::exponential(0.5), Kernel::rectangular(0.8)}) {
    const auto exact = discretized_rates(c, h, w, mu);
    EXPECT_NEAR(variation_term(exact, c, h, w, mu), 0.0, 1e-10);
    const auto tr = run_tracker(c, h, w, mu, StepSize::zero(), {1e-12, 1e12});
    const auto r = regret_vs(exact, c, tr.losses);
    EXPECT_NEAR(r.back(), 0.0, 1e-9);
    // A perturbed comparator is not a model trajectory.
    auto off = exact;
    off[5] *= 1.1;
    EXPECT_GT(variation_term(off, c, h, w, mu), 0.0);
  }
}

TEST(Percentiles, TypeSevenValues) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 25), 1.75);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile({7}, 95), 7.0);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 100), 5.0);
  EXPECT_THROW(percentile({}, 50), ConfigError);
  EXPECT_THROW(percentile({1.0}, 101), ConfigError);
}

TEST(Percentiles, BandsOverTrials) {
  const std::vector<double> qs{5, 25, 50, 75, 95};
  std::vector<std::vector<double>> equal(10, std::vector<double>(20, 0.0));
  for (const auto& band : paired_percentiles(equal, qs))
    for (const double v : band) EXPECT_EQ(v, 0.0);
  // Trials i = 0..100 shifted by i: the q-th percentile at time t is t + q exactly.
  std::vector<std::vector<double>> shifted;
  for (int i = 100; i >= 0; --i) {
    std::vector<double> s(20);
    for (int t = 0; t < 20; ++t) s[t] = i + 0.5 * t;
    shifted.push_back(s);
  }
  const auto bands = paired_percentiles(shifted, qs);
  for (std::size_t j = 0; j < qs.size(); ++j)
    for (int t = 0; t < 20; ++t) EXPECT_NEAR(bands[j][t], qs[j] + 0.5 * t, 1e-12);
  EXPECT_THROW(paired_percentiles({{1.0}, {1.0, 2.0}}, qs), ConfigError);
}

TEST(Roc, PerfectRecovery) {
  Rng rng(2);
  Matrix w = test::random_matrix(rng, 10, 10, 0.0, 1.0);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (rng.bernoulli(0.6)) w.data()[i] = 0.0;
  const auto r = roc(w, w, RocMode::FullSupport);
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
  EXPECT_EQ(r.tpr.back(), 1.0);
  EXPECT_EQ(r.fpr.back(), 1.0);
  for (std::size_t i = 1; i < r.tpr.size(); ++i) {
    EXPECT_GE(r.tpr[i], r.tpr[i - 1]);
    EXPECT_GE(r.fpr[i], r.fpr[i - 1]);
    EXPECT_LT(r.thresholds[i], r.thresholds[i - 1]);
  }
  EXPECT_DOUBLE_EQ(roc(w, w, RocMode::Top10).auc, 1.0);
}

TEST(Roc, RandomScoresAverageOneHalf) {
  Rng rng(3);
  double mean = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    Matrix w = test::random_matrix(rng, 10, 10, 0.0, 1.0);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (rng.bernoulli(0.5)) w.data()[i] = 0.0;
    const Matrix guess = test::random_matrix(rng, 10, 10, 0.0, 1.0);
    const auto r = roc(guess, w, RocMode::FullSupport);
    EXPECT_NEAR(r.auc, pairwise_auc(guess, true_edges(w, RocMode::FullSupport)), 1e-12);
    mean += r.auc / 100;
  }
  EXPECT_NEAR(mean, 0.5, 0.05);
}

TEST(Roc, InvariantToMonotoneRescaling) {
  Rng rng(4);
  Matrix truth = test::random_matrix(rng, 8, 8, 0.0, 1.0);
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    if (rng.bernoulli(0.5)) truth.data()[i] = 0.0;
  Matrix guess = truth + test::random_matrix(rng, 8, 8, 0.0, 0.7);
  guess(0, 0) = guess(1, 1);  // a tie
  for (const auto mode : {RocMode::FullSupport, RocMode::Top10}) {
    const double a = roc(guess, truth, mode).auc;
    EXPECT_DOUBLE_EQ(roc(Matrix(guess.array().exp()), truth, mode).auc, a);
    EXPECT_DOUBLE_EQ(roc(Matrix(3.0 * guess.array().sqrt() + 1.0), truth, mode).auc, a);
    EXPECT_NEAR(a, pairwise_auc(guess, true_edges(truth, mode)), 1e-12);
  }
}

TEST(Roc, TrueEdgeModes) {
  Matrix w(3, 3);
  w << 0.5, 1e-7, 0.0, 0.2, 0.9, 0.0, 0.0, 0.0, 0.3;
  const Mask full = true_edges(w, RocMode::FullSupport);
  EXPECT_EQ(full.count(), 4);
  EXPECT_FALSE(full(0, 1));
  const Mask top = true_edges(w, RocMode::Top10);
  EXPECT_EQ(top.count(), 1);  // ceil(0.9)
  EXPECT_TRUE(top(1, 1));
}

TEST(Significance, Counts) {
  Matrix sym(3, 3);
  sym << 0, 1, 2, 1, 0, 3, 2, 3, 0;
  auto s = significance_count(sym, 0.5);
  EXPECT_EQ(s.above, s.below);
  Matrix lower = Matrix::Zero(4, 4);
  lower(1, 0) = lower(3, 1) = lower(2, 0) = 1.0;
  s = significance_count(lower, 0.5);
  EXPECT_EQ(s.below, 3u);
  EXPECT_EQ(s.above, 0u);
  const std::vector<std::size_t> reversed{3, 2, 1, 0};
  s = significance_count(lower, 0.5, reversed);
  EXPECT_EQ(s.above, 3u);
  EXPECT_EQ(s.below, 0u);
  Rng rng(5);
  const Matrix r = test::random_matrix(rng, 60, 60, 0.0, 1.0);
  s = significance_count(r, 0.5);
  const double n = static_cast<double>(s.above + s.below);
  EXPECT_LE(std::abs(static_cast<double>(s.above) - n / 2), 3 * std::sqrt(n / 4));
}

TEST(Ks, KolmogorovDistributionValues) {
  EXPECT_NEAR(kolmogorov_q(1.0), 0.26999967167735456, 1e-10);
  EXPECT_NEAR(kolmogorov_q(0.5), 0.9639452436648751, 1e-10);
  EXPECT_NEAR(kolmogorov_q(1.36), 0.04946, 1e-4);
  EXPECT_NEAR(kolmogorov_q(0.3 - 1e-12), kolmogorov_q(0.3), 1e-9);
  EXPECT_EQ(kolmogorov_q(0.0), 1.0);
}

TEST(Ks, DetectsWrongDistribution) {
  Rng rng(6);
  std::vector<double> good(2000), bad(2000);
  for (auto& v : good) v = rng.exponential(1.0);
  for (auto& v : bad) v = rng.uniform(0.0, 2.0);
  EXPECT_GT(ks_test_exponential(good).p_value, 0.01);
  EXPECT_LT(ks_test_exponential(bad).p_value, 1e-6);
}

TEST(TimeRescaling, FastPathMatchesCompensatorSum) {
  SimulationConfig cfg;
  cfg.mu_bar = Vector::Constant(2, 0.3);
  cfg.w = (Matrix(2, 2) << 0.3, 0.1, 0.2, 0.4).finished();
  cfg.kernel = Kernel::exponential(0.4);
  cfg.horizon = 200.0;
  const auto s = simulate_hawkes(cfg);
  const auto fast = time_rescaled_intervals(s, cfg.kernel, cfg.w, cfg.mu_bar);
  std::vector<double> last(2, 0.0);
  const auto evs = s.events();
  for (std::size_t n = 0; n < evs.size(); ++n) {
    const auto k = static_cast<Eigen::Index>(evs[n].actor);
    double c = cfg.mu_bar[k] * evs[n].time;
    for (std::size_t m = 0; m < n; ++m)
      c += cfg.w(k, static_cast<Eigen::Index>(evs[m].actor)) * cfg.kernel.cumulative(evs[n].time - evs[m].time);
    EXPECT_NEAR(fast[n], c - last[k], 1e-9);
    last[k] = c;
  }
}
