#include "support.hpp"

#include <hawkes/kernels.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace hawkes;

namespace {

// Brute-force discretized rate: mu_k + sum over events in earlier bins of
// W_{k,k_n} h(delta t - tau_n), written from the definition alone.
Vector brute_rate(const Kernel& h, const Matrix& w, const Vector& mu, const EventStream& s, std::size_t t, double delta) {
  Vector out = mu;
  for (const auto& e : s.events()) {
    const auto bin = static_cast<std::size_t>(std::max(1.0, std::ceil(e.time / delta - 1e-9)));
    if (bin >= t) continue;
    for (Eigen::Index k = 0; k < mu.size(); ++k)
      out[k] += w(k, static_cast<Eigen::Index>(e.actor)) * h(delta * static_cast<double>(t) - e.time);
  }
  return out;
}

std::vector<Kernel> all_kernels() {
  return {Kernel::exponential(0.6), Kernel::delayed_exponential(0.7, 0.35), Kernel::rectangular(1.3),
          Kernel::tabulated({0.0, 0.4, 1.0, 2.1}, {1.0, 0.8, 0.3, 0.0}),
          Kernel::tabulated({0.0, 0.5, 1.5}, {0.2, 1.0, 0.0})};
}

}  // namespace

TEST(Kernel, Causality) {
  for (const auto& h : all_kernels()) {
    EXPECT_EQ(h(0.0), 0.0) << h.describe();
    EXPECT_EQ(h(-1.0), 0.0) << h.describe();
    for (double s = 0.01; s < 5.0; s += 0.07) EXPECT_GE(h(s), 0.0);
  }
  EXPECT_EQ(Kernel::rectangular(2.0)(2.5), 0.0);
  EXPECT_EQ(Kernel::tabulated({0.0, 1.0}, {1.0, 0.5})(1.5), 0.0);
}

TEST(Kernel, RejectsBadParameters) {
  EXPECT_THROW(Kernel::exponential(1.0), ConfigError);
  EXPECT_THROW(Kernel::exponential(0.0), ConfigError);
  EXPECT_THROW(Kernel::rectangular(-1.0), ConfigError);
  EXPECT_THROW(Kernel::tabulated({0.0, 1.0, 0.5}, {1, 1, 1}), ConfigError);
  EXPECT_THROW(Kernel::tabulated({0.1, 1.0}, {1, 1}), ConfigError);
  EXPECT_THROW(KernelDynamics(Kernel::delayed_exponential(0.5, 0.05), 1, 0.1, Vector::Ones(1)), ConfigError);
  EXPECT_THROW(KernelDynamics(Kernel::rectangular(0.1), 1, 0.1, Vector::Ones(1)), ConfigError);
}

TEST(Kernel, CumulativeMatchesQuadrature) {
  for (const auto& h : all_kernels()) {
    for (const double x : {0.3, 1.0, 2.7}) {
      // Midpoint rule on a fine grid.
      const int n = 200000;
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += h((i + 0.5) * x / n) * x / n;
      // Midpoint error is at most jump * step at a discontinuity.
      EXPECT_NEAR(h.cumulative(x), q, 2e-5) << h.describe() << " x=" << x;
    }
  }
}

TEST(Kernel, EnvelopeBoundsTheTail) {
  for (const auto& h : all_kernels())
    for (double s = 0.0; s < 4.0; s += 0.05) {
      const double env = h.envelope(s);
      for (double u = s + 1e-9; u < 5.0; u += 0.013) EXPECT_LE(h(u), env + 1e-12) << h.describe();
    }
}

TEST(EmitY, EmptyBinGivesZero) {
  const auto y = emit_y(Kernel::exponential(0.5), {}, 3, 0.1, 4);
  EXPECT_EQ(y, Vector::Zero(4));
}

TEST(EmitY, SingleEventHandValue) {
  const std::vector<Event> ev{{0, 0.05}};
  const auto y = emit_y(Kernel::exponential(std::exp(-1.0)), ev, 1, 0.1, 3);
  EXPECT_NEAR(y[0], std::exp(-0.15), 1e-15);
  EXPECT_EQ(y[1], 0.0);
}

TEST(EmitY, DelayEqualToBinWidthShiftsByOneStep) {
  // With D = delta the delayed window for step t is bin t itself (off the
  // bin edges), each event weighted alpha^(delta t - tau): the non-delayed y
  // of the same bin scaled by alpha^-delta.
  const double alpha = 0.6, delta = 0.25;
  Rng rng(3);
  const auto s = test::random_stream(rng, 3, 60, 5.0);
  const auto delayed = Kernel::delayed_exponential(alpha, delta);
  const auto plain = Kernel::exponential(alpha);
  const BinnedCounts c(s, delta);
  KernelDynamics dyn(delayed, 3, delta, Vector::Ones(3));
  for (std::size_t t = 1; t <= c.bins(); ++t) {
    const auto step = dyn.next(c.bin(t), nullptr);
    const Vector same = emit_y(plain, c.bin(t), t, delta, 3) * std::pow(alpha, -delta);
    EXPECT_LT((step.y - same).cwiseAbs().maxCoeff(), 1e-12) << "t=" << t;
  }
}

TEST(EmitA, ExponentialIsConstant) {
  const auto a = emit_a(Kernel::exponential(0.99), {}, Matrix::Ones(3, 3), 5, 1.0);
  EXPECT_EQ(a, Vector::Constant(3, 0.99));
  KernelDynamics dyn(Kernel::exponential(0.99), 3, 1.0, Vector::Ones(3));
  const std::vector<Event> ev{{1, 0.5}};
  const auto s1 = dyn.next(ev, nullptr);
  const auto s2 = dyn.next({}, nullptr);
  EXPECT_EQ(s1.a, s2.a);
  EXPECT_EQ(s1.c, s2.c);
  EXPECT_NEAR(s1.c[0], 0.01, 1e-15);
}

TEST(EmitA, RectangularEmptyWindowIsOne) {
  const auto a = emit_a(Kernel::rectangular(1.0), {}, Matrix::Ones(2, 2), 4, 0.1);
  EXPECT_EQ(a, Vector::Ones(2));
}

TEST(EmitA, RectangularEventsStayingInWindowGiveOne) {
  // Two events in bins 1 and 2; width 5 keeps both alive through bins 3 and 4.
  const std::vector<Event> past{{0, 0.05}, {1, 0.15}};
  const auto a = emit_a(Kernel::rectangular(5.0), past, Matrix::Constant(2, 2, 0.5), 3, 0.1);
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  EXPECT_DOUBLE_EQ(a[1], 1.0);
  // Once the older event leaves the window, the ratio drops below one.
  const auto b = emit_a(Kernel::rectangular(0.3), past, Matrix::Constant(2, 2, 0.5), 3, 0.1);
  EXPECT_DOUBLE_EQ(b[0], 0.5);
}

TEST(Apply, HandArithmetic) {
  DynamicsStep s{Vector::Constant(1, 0.5), Vector::Constant(1, 1.0), Vector::Constant(1, 0.5 * 0.005), {0}};
  EXPECT_NEAR(apply(s, Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.75))[0], 1.2525, 1e-15);
}

TEST(Apply, FixedPointAndZeroNetwork) {
  const Vector mu = Vector::Constant(3, 0.2);
  KernelDynamics dyn(Kernel::exponential(0.8), 3, 0.5, mu);
  const auto s = dyn.next({}, nullptr);
  EXPECT_LT((apply(s, mu, Matrix::Ones(3, 3)) - mu).norm(), 1e-15);
  DynamicsStep t{Vector::Constant(2, 0.3), Vector::Constant(2, 7.0), Vector::Constant(2, 0.1), {0, 1}};
  const Vector lam = Vector::Constant(2, 2.0);
  EXPECT_EQ(apply(t, lam, Matrix::Zero(2, 2)), Vector::Constant(2, 0.7));
  EXPECT_THROW(apply(t, Vector::Ones(3), Matrix::Zero(2, 2)), ConfigError);
}

TEST(ExactRate, NoEventsGivesBaseline) {
  const Vector mu = Vector::Constant(2, 0.3);
  EXPECT_EQ(exact_rate(Kernel::exponential(0.5), Matrix::Ones(2, 2), mu, {}, 7, 0.1), mu);
}

TEST(ExactRate, SingleEventHandValue) {
  const std::vector<Event> h{{0, 0.05}};
  Matrix w(2, 2);
  w << 0.3, 0.0, 0.7, 0.0;
  const Vector mu = Vector::Constant(2, 0.01);
  const auto lam = exact_rate(Kernel::exponential(std::exp(-1.0)), w, mu, h, 2, 0.1);
  EXPECT_NEAR(lam[0], 0.01 + 0.3 * std::exp(-0.15), 1e-15);
  EXPECT_NEAR(lam[1], 0.01 + 0.7 * std::exp(-0.15), 1e-15);
}

TEST(Recursion, MatchesBruteForceForEveryKernel) {
  Rng rng(17);
  for (const auto& h : all_kernels()) {
    for (int rep = 0; rep < 5; ++rep) {
      const std::size_t p = 3;
      const double delta = 0.1;
      const auto s = test::random_stream(rng, p, 100, 8.0);
      const Matrix w = test::random_matrix(rng, p, p, 0.0, 0.6);
      const Vector mu = test::random_vector(rng, p, 0.05, 0.5);
      const BinnedCounts c(s, delta);
      KernelDynamics dyn(h, p, delta, mu);
      Vector lam = mu;
      double worst = 0.0;
      for (std::size_t t = 1; t <= c.bins(); ++t) {
        const Vector oracle = brute_rate(h, w, mu, s, t, delta);
        worst = std::max(worst, ((lam - oracle).array() / oracle.array()).abs().maxCoeff());
        EXPECT_LT((exact_rate(h, w, mu, s.events(), t, delta) - oracle).cwiseAbs().maxCoeff(), 1e-12);
        const auto step = dyn.next(c.bin(t), &w);
        lam = apply(step, lam, w);
      }
      EXPECT_LT(worst, 1e-10) << h.describe();
    }
  }
}

TEST(Recursion, ContractivityPrecondition) {
  Rng rng(5);
  const std::vector<Kernel> kernels{Kernel::exponential(0.4), Kernel::delayed_exponential(0.4, 0.2),
                                    Kernel::rectangular(0.7), Kernel::tabulated({0, 0.3, 1.0}, {1.0, 0.6, 0.0})};
  for (const auto& h : kernels) {
    ASSERT_TRUE(h.is_nonincreasing());
    const auto s = test::random_stream(rng, 4, 200, 10.0);
    const Matrix w = test::random_matrix(rng, 4, 4, 0.0, 1.0);
    const Vector mu = test::random_vector(rng, 4, 0.01, 1.0);
    const BinnedCounts c(s, 0.1);
    KernelDynamics dyn(h, 4, 0.1, mu);
    for (std::size_t t = 1; t <= c.bins(); ++t) {
      const auto step = dyn.next(c.bin(t), &w);
      EXPECT_GE(step.a.minCoeff(), 0.0);
      EXPECT_LE(step.a.maxCoeff(), 1.0 + 1e-12);
      EXPECT_GE((w * step.y + step.c).minCoeff(), 0.0);
    }
  }
  // A rising tabulated kernel is flagged and can push A_t above one.
  const auto rising = Kernel::tabulated({0.0, 0.5, 1.5}, {0.2, 1.0, 0.0});
  EXPECT_FALSE(rising.is_nonincreasing());
  const std::vector<Event> past{{0, 0.05}};
  EXPECT_GT(emit_a(rising, past, Matrix::Ones(1, 1), 2, 0.1)[0], 1.0);
}

TEST(Recursion, WindowStaysBounded) {
  Rng rng(9);
  const auto s = test::random_stream(rng, 2, 5000, 1000.0);
  const BinnedCounts c(s, 0.1);
  const Matrix w = Matrix::Constant(2, 2, 0.1);
  KernelDynamics dyn(Kernel::rectangular(1.0), 2, 0.1, Vector::Ones(2));
  std::size_t most = 0;
  for (std::size_t t = 1; t <= c.bins(); ++t) {
    dyn.next(c.bin(t), &w);
    most = std::max(most, dyn.buffered());
  }
  EXPECT_LT(most, 40u);  // about 5 events per unit time in a window of width 1
}
