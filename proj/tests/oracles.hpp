#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance harness. None of these call into the code they check.

#include <hawkes/common.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <vector>

namespace hawkes::test {

// D(a||b) for the potential <1, exp(theta)>.
inline double bregman(const Vector& a, const Vector& b) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) d += std::exp(a[i]) - std::exp(b[i]) - std::exp(b[i]) * (a[i] - b[i]);
  return d;
}

// Golden-section minimizer of a unimodal function on [lo, hi].
template <class F>
double golden_min(F f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d, d = c, fd = fc;
      c = b - r * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + r * (b - a), fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Threshold theta with sum max(v - theta, 0) = c, found by bisection on the
// KKT condition of the capped-simplex projection.
inline Vector simplex_by_bisection(const Vector& v, double c) {
  const Vector x = v.cwiseMax(0.0);
  if (x.sum() <= c) return x;
  double lo = 0.0, hi = x.maxCoeff();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((x.array() - mid).cwiseMax(0.0).sum() > c ? lo : hi) = mid;
  }
  return (x.array() - 0.5 * (lo + hi)).cwiseMax(0.0).matrix();
}

inline Matrix ball_by_bisection(const Matrix& m, double c) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * simplex_by_bisection(svd.singularValues(), c).asDiagonal() * svd.matrixV().transpose();
}

// ADMM on min 1/2 ||X - M||^2 over X in the nuclear ball, Z >= 0, X = Z.
inline Matrix nuclear_nonneg_by_admm(const Matrix& m, double c) {
  const double rho = 1.0;
  Matrix z = m.cwiseMax(0.0), u = Matrix::Zero(m.rows(), m.cols());
  for (int it = 0; it < 20000; ++it) {
    const Matrix x = ball_by_bisection((m + rho * (z - u)) / (1.0 + rho), c);
    const Matrix zn = (x + u).cwiseMax(0.0);
    u += x - zn;
    const bool done = (zn - z).norm() < 1e-13 && (x - zn).norm() < 1e-13;
    z = zn;
    if (done) break;
  }
  return z;
}

// Log-barrier path following on the semidefinite form of the nuclear ball,
//   ||X||_* <= c  iff  [Y1 X; X^T Y2] >= 0 with tr Y1 + tr Y2 <= 2c,
// in long double. Second order, so it also resolves instances whose solution
// sits on a rank drop, where the first-order methods above crawl.
inline Matrix nuclear_nonneg_by_barrier(const Matrix& m_in, double c_in) {
  using Real = long double;
  using RMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using RVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  const Eigen::Index r = m_in.rows(), q = m_in.cols(), d = r + q;
  const RMat m = m_in.cast<Real>();
  const Real c = c_in;
  // Variables: X (r*q, column-major), then the upper triangles of Y1 and Y2.
  struct Slot { Eigen::Index i, j; int kind; };  // kind 0: X, 1: block of P
  std::vector<Slot> slots;
  for (Eigen::Index j = 0; j < q; ++j)
    for (Eigen::Index i = 0; i < r; ++i) slots.push_back({i, r + j, 0});
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) slots.push_back({i, j, 1});
  for (Eigen::Index j = 0; j < q; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) slots.push_back({r + i, r + j, 1});
  const auto n = static_cast<Eigen::Index>(slots.size());
  const auto nx = r * q;

  auto assemble = [&](const RVec& v) {
    RMat p = RMat::Zero(d, d);
    for (Eigen::Index a = 0; a < n; ++a) p(slots[a].i, slots[a].j) = p(slots[a].j, slots[a].i) = v[a];
    return p;
  };
  auto slack = [&](const RVec& v) {
    Real tr = 0;
    for (Eigen::Index a = nx; a < n; ++a)
      if (slots[a].i == slots[a].j) tr += v[a];
    return 2 * c - tr;
  };
  // Barrier objective, or +inf outside the domain.
  auto value = [&](const RVec& v, Real mu) -> Real {
    const Real s = slack(v);
    if (!(s > 0) || v.head(nx).minCoeff() <= 0) return std::numeric_limits<Real>::infinity();
    Eigen::LLT<RMat> llt(assemble(v));
    if (llt.info() != Eigen::Success) return std::numeric_limits<Real>::infinity();
    Real logdet = 0;
    for (Eigen::Index i = 0; i < d; ++i) logdet += 2 * std::log(llt.matrixL()(i, i));
    Real f = 0;
    for (Eigen::Index a = 0; a < nx; ++a) {
      const Real e = v[a] - m(slots[a].i, slots[a].j - r);
      f += e * e / 2 - mu * std::log(v[a]);
    }
    return f - mu * (logdet + std::log(s));
  };

  const Real t = c / static_cast<Real>(d);
  RVec v = RVec::Zero(n);
  for (Eigen::Index a = 0; a < n; ++a) v[a] = slots[a].kind == 0 ? t / (10 * static_cast<Real>(nx)) : (slots[a].i == slots[a].j ? t : 0);

  for (Real mu = 1; mu > 1e-17L; mu *= Real(0.2)) {
    for (int it = 0; it < 100; ++it) {
      const RMat qi = assemble(v).inverse();
      const Real s = slack(v);
      RVec g = RVec::Zero(n);
      RMat h = RMat::Zero(n, n);
      // d/dv_a log det P = tr(Q E_a), E_a the symmetric unit at (i, j).
      for (Eigen::Index a = 0; a < n; ++a) {
        const auto [i, j, ka] = slots[a];
        g[a] -= mu * (i == j ? qi(i, i) : 2 * qi(i, j));
        for (Eigen::Index b = 0; b <= a; ++b) {
          const auto [k, l, kb] = slots[b];
          Real tr = qi(l, i) * qi(j, k);
          if (i != j) tr += qi(l, j) * qi(i, k);
          if (k != l) tr += qi(k, i) * qi(j, l) + (i != j ? qi(k, j) * qi(i, l) : 0);
          h(a, b) = h(b, a) = mu * tr;
        }
      }
      for (Eigen::Index a = 0; a < nx; ++a) {
        g[a] += v[a] - m(slots[a].i, slots[a].j - r) - mu / v[a];
        h(a, a) += 1 + mu / (v[a] * v[a]);
      }
      for (Eigen::Index a = nx; a < n; ++a) {
        if (slots[a].i != slots[a].j) continue;
        g[a] += mu / s;
        for (Eigen::Index b = nx; b < n; ++b)
          if (slots[b].i == slots[b].j) h(a, b) += mu / (s * s);
      }
      const RVec step = -h.ldlt().solve(g);
      const Real decrement = -g.dot(step);
      if (decrement < Real(1e-24)) break;
      const Real f0 = value(v, mu);
      Real alpha = 1;
      while (alpha > Real(1e-20) && !(value(v + alpha * step, mu) <= f0 - Real(0.25) * alpha * decrement)) alpha /= 2;
      v += alpha * step;
    }
  }
  Matrix x(r, q);
  for (Eigen::Index a = 0; a < nx; ++a) x(slots[a].i, slots[a].j - r) = static_cast<double>(v[a]);
  return x;
}

}  // namespace hawkes::test
