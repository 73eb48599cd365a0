#include "support.hpp"

#include <hawkes/batch.hpp>
#include <hawkes/netlearn.hpp>
#include <hawkes/simulate.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace hawkes;

namespace {

// F(W) computed from scratch: exact discretized rates through the generic
// dynamics, then the averaged loss.
double oracle_objective(const Matrix& w, const BinnedCounts& c, const Kernel& h, const Vector& mu, double gamma) {
  const auto rates = discretized_rates(c, h, w, mu);
  double total = 0.0;
  for (std::size_t t = 1; t <= c.bins(); ++t) total += instantaneous_loss(rates[t - 1], c.counts(t), c.delta());
  return total / static_cast<double>(c.bins()) + gamma * w.cwiseAbs().sum();
}

struct Sim {
  EventStream stream;
  Matrix w;
  Vector mu;
};

Sim simulate(std::uint64_t seed, std::size_t p, double horizon, double alpha) {
  Rng rng(seed);
  SimulationConfig cfg;
  cfg.mu_bar = test::random_vector(rng, static_cast<Eigen::Index>(p), 0.05, 0.2);
  cfg.w = test::random_matrix(rng, static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p), 0.0, 1.0);
  for (Eigen::Index i = 0; i < cfg.w.size(); ++i)
    if (rng.bernoulli(0.5)) cfg.w.data()[i] = 0.0;
  cfg.kernel = Kernel::exponential(alpha);
  cfg.w *= 0.7 / std::max(1e-12, stationarity_radius(cfg.w, cfg.kernel));
  cfg.horizon = horizon;
  cfg.seed = seed;
  return {simulate_hawkes(cfg), cfg.w, cfg.mu_bar};
}

}  // namespace

TEST(BatchData, LossMatchesGenericDynamics) {
  Rng rng(1);
  const auto s = test::random_stream(rng, 3, 200, 40.0);
  const BinnedCounts c(s, 0.5);
  const auto h = Kernel::exponential(0.4);
  const Vector mu = test::random_vector(rng, 3, 0.1, 0.5);
  const BatchData data(c, h, mu);
  EXPECT_EQ(data.events(), 200u);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix w = test::random_matrix(rng, 3, 3, 0.0, 0.5);
    EXPECT_NEAR(batch_objective(data, w, 0.01), oracle_objective(w, c, h, mu, 0.01), 1e-10);
    const double eq5 = cumulative_discrete_loss(discretized_rates(c, h, w, mu), c);
    EXPECT_NEAR(batch_loss_of(w, data), eq5, 1e-9);
    EXPECT_NEAR(batch_loss_of(w, c, h, mu), eq5, 1e-9);
  }
}

TEST(BatchData, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  const auto s = test::random_stream(rng, 3, 150, 30.0);
  const BinnedCounts c(s, 0.25);
  const BatchData data(c, Kernel::exponential(0.5), Vector::Constant(3, 0.2));
  const Matrix w = test::random_matrix(rng, 3, 3, 0.1, 0.5);
  Matrix g;
  data.total_loss(w, g);
  for (Eigen::Index i = 0; i < 9; ++i) {
    Matrix up = w, dn = w;
    up.data()[i] += 1e-6;
    dn.data()[i] -= 1e-6;
    const double fd = (data.total_loss(up) - data.total_loss(dn)) / 2e-6;
    EXPECT_NEAR(g.data()[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(BatchLossOf, NoInfluenceIsClosedForm) {
  const EventStream s({{0, 0.5}, {1, 1.2}, {1, 3.3}}, 2, 4.0);
  const BinnedCounts c(s, 0.5);
  const Vector mu = (Vector(2) << 0.2, 0.3).finished();
  const double expect = 8 * 0.5 * 0.5 - std::log(0.2) - 2 * std::log(0.3);
  EXPECT_NEAR(batch_loss_of(Matrix::Zero(2, 2), c, Kernel::exponential(0.5), mu), expect, 1e-12);
  EXPECT_NEAR(batch_loss_of(Matrix::Zero(2, 2), c, Kernel::rectangular(2.0), mu), expect, 1e-12);
}

TEST(BatchLossOf, GenericKernelMatchesExactRates) {
  Rng rng(3);
  const auto s = test::random_stream(rng, 2, 100, 20.0);
  const BinnedCounts c(s, 0.2);
  const auto h = Kernel::rectangular(1.0);
  const Matrix w = test::random_matrix(rng, 2, 2, 0.0, 0.5);
  const Vector mu = Vector::Constant(2, 0.3);
  EXPECT_NEAR(batch_loss_of(w, c, h, mu), cumulative_discrete_loss(discretized_rates(c, h, w, mu), c), 1e-9);
}

TEST(BatchFit, NoEventsGivesZero) {
  const EventStream s({}, 3, 50.0);
  const BatchData data(BinnedCounts(s, 1.0), Kernel::exponential(0.5), Vector::Constant(3, 0.1));
  BatchOptions opts;
  opts.w_init = Matrix::Constant(3, 3, 0.4);
  EXPECT_EQ(batch_fit(data, opts).w, Matrix::Zero(3, 3));
}

TEST(BatchFit, RejectsRectangularKernel) {
  const EventStream s({}, 1, 5.0);
  EXPECT_THROW(BatchData(BinnedCounts(s, 1.0), Kernel::rectangular(2.0), Vector::Ones(1)), ConfigError);
}

TEST(BatchFit, TinyInstanceMatchesGridOracle) {
  // p = 2, 10 bins of width 1.
  const EventStream s({{0, 0.5}, {1, 1.5}, {0, 2.2}, {0, 2.7}, {1, 3.1}, {1, 4.4}, {0, 5.9}, {1, 6.1}, {0, 6.5},
                       {1, 7.7}, {0, 8.3}, {1, 8.8}, {1, 9.6}},
                      2, 10.0);
  const BinnedCounts c(s, 1.0);
  ASSERT_EQ(c.bins(), 10u);
  const auto h = Kernel::exponential(0.5);
  const Vector mu = Vector::Constant(2, 0.3);
  auto f = [&](const Matrix& w) { return oracle_objective(w, c, h, mu, 0.0); };

  // Dense grid on [0, 3]^4, then cyclic golden-section polish.
  Matrix best = Matrix::Zero(2, 2);
  double fbest = f(best);
  const int g = 16;
  for (int a = 0; a <= g; ++a)
    for (int b = 0; b <= g; ++b)
      for (int d = 0; d <= g; ++d)
        for (int e = 0; e <= g; ++e) {
          Matrix w(2, 2);
          w << 3.0 * a / g, 3.0 * b / g, 3.0 * d / g, 3.0 * e / g;
          const double v = f(w);
          if (v < fbest) fbest = v, best = w;
        }
  for (int sweep = 0; sweep < 200; ++sweep)
    for (Eigen::Index i = 0; i < 4; ++i) {
      double lo = 0.0, hi = best.data()[i] + 0.5;
      const double r = (std::sqrt(5.0) - 1.0) / 2.0;
      auto fi = [&](double v) {
        Matrix w = best;
        w.data()[i] = v;
        return f(w);
      };
      while (hi - lo > 1e-12) {
        const double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
        (fi(x1) < fi(x2) ? hi : lo) = fi(x1) < fi(x2) ? x2 : x1;
      }
      best.data()[i] = 0.5 * (lo + hi);
    }

  BatchOptions opts;
  opts.l1_penalty = 0.0;
  opts.max_outer = 5000;
  opts.tol = 1e-15;
  const auto fit = batch_fit(BatchData(c, h, mu), opts);
  EXPECT_NEAR(fit.objective.back(), f(best), 1e-8);
  EXPECT_LE((fit.w - best).cwiseAbs().maxCoeff(), 1e-4) << "fit\n" << fit.w << "\noracle\n" << best;
}

TEST(BatchFit, TraceIsMonotoneAndFitBeatsTruth) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto sim = simulate(10 + seed, 5, 3000.0, 0.3);
    const BinnedCounts c(sim.stream, 0.5);
    const BatchData data(c, Kernel::exponential(0.3), sim.mu);
    const auto fit = batch_fit(data);
    for (std::size_t i = 1; i < fit.objective.size(); ++i) EXPECT_LE(fit.objective[i], fit.objective[i - 1] + 1e-15);
    EXPECT_LE(fit.objective.back(), batch_objective(data, sim.w, 1e-3));
    EXPECT_GE(fit.w.minCoeff(), 0.0);
    EXPECT_LE(fit.gradient_evals, 61u);
  }
}

TEST(BatchFit, OptimalityCertificate) {
  const auto sim = simulate(20, 4, 2000.0, 0.3);
  const BinnedCounts c(sim.stream, 0.5);
  const BatchData data(c, Kernel::exponential(0.3), sim.mu);
  BatchOptions opts;
  opts.l1_penalty = 0.01;
  opts.max_outer = 20000;
  opts.tol = 1e-16;
  const auto fit = batch_fit(data, opts);
  Matrix g;
  data.total_loss(fit.w, g);
  g /= static_cast<double>(data.bins());
  int active = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (fit.w.data()[i] > 0.0) {
      ++active;
      EXPECT_NEAR(g.data()[i] + opts.l1_penalty, 0.0, 1e-6) << "entry " << i;
    } else {
      EXPECT_GE(g.data()[i] + opts.l1_penalty, -1e-6) << "entry " << i;
    }
  }
  EXPECT_GT(active, 0);
  EXPECT_LT(active, 16);
}

TEST(BatchLossOf, OnlineSnapshotsImproveOnAverage) {
  // Snapshots of the online estimate, scored on the whole data, improve over time.
  const int seeds = 10, snaps = 5;
  std::vector<double> avg(snaps + 1, 0.0);
  for (int seed = 0; seed < seeds; ++seed) {
    const auto sim = simulate(30 + seed, 4, 4000.0, 0.3);
    const BinnedCounts c(sim.stream, 0.5);
    const auto h = Kernel::exponential(0.3);
    LearnerConfig cfg;
    cfg.mu_bar = sim.mu;
    cfg.delta = 0.5;
    cfg.eta = StepSize::constant(1.0, c.bins());
    cfg.rho = StepSize::constant(0.3, c.bins());
    cfg.l1_penalty = 1e-3;
    const auto r = learn_network(c, h, cfg, {.snapshot_every = c.bins() / snaps});
    const BatchData data(c, h, sim.mu);
    avg[0] += batch_loss_of(Matrix::Zero(4, 4), data) / seeds;
    for (int i = 0; i < snaps; ++i) avg[i + 1] += batch_loss_of(r.snapshots[i].w, data) / seeds;
  }
  for (int i = 1; i <= snaps; ++i) EXPECT_LE(avg[i], avg[i - 1]) << "snapshot " << i;
}
