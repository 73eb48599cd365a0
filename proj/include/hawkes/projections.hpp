#pragma once

// Euclidean projections onto the feasible sets used for the influence matrix.
// Every set is intersected with the nonnegative orthant.

#include <hawkes/common.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace hawkes {

template <typename Derived>
typename Derived::PlainObject project_box(const Eigen::MatrixBase<Derived>& point, double lo, double hi) {
  require_config(lo <= hi, "project_box: lo > hi");
  return point.cwiseMax(lo).cwiseMin(hi);
}

/// Projection of v onto {x >= 0, sum x <= c} (sort-based threshold).
inline Vector project_capped_simplex(const Vector& v, double c) {
  require_config(c >= 0.0, "simplex radius must be >= 0");
  Vector x = v.cwiseMax(0.0);
  if (x.sum() <= c) return x;
  if (c == 0.0) return Vector::Zero(v.size());
  std::vector<double> u(x.data(), x.data() + x.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double cand = (cum - c) / static_cast<double>(j + 1);
    if (u[j] - cand > 0.0) theta = cand;
  }
  return (x.array() - theta).cwiseMax(0.0).matrix();
}

/// {W >= 0 : sum |W_ij| <= c}: clip negatives, then threshold if needed.
inline Matrix project_l1_nonneg(const Matrix& m, double c) {
  require_config(c >= 0.0, "l1 radius must be >= 0");
  const Vector flat = Eigen::Map<const Vector>(m.data(), m.size());
  const Vector proj = project_capped_simplex(flat, c);
  return Eigen::Map<const Matrix>(proj.data(), m.rows(), m.cols());
}

inline double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues().sum();
}

/// {W : ||W||_* <= c} by projecting the singular values.
inline Matrix project_nuclear_ball(const Matrix& m, double c) {
  require_config(c >= 0.0, "nuclear radius must be >= 0");
  if (m.size() == 0) return m;
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("project_nuclear_ball: SVD failed");
  const Vector& s = svd.singularValues();
  if (s.sum() <= c) return m;
  const Vector shrunk = project_capped_simplex(s, c);
  return svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
}

struct ProjectionStats {
  std::size_t iterations = 0;
  bool converged = false;
};

/// {W >= 0 : ||W||_* <= c}. Accelerated projected gradient on the dual of the
/// nonnegativity constraint: max over Z >= 0 of
///   q(Z) = min_{X in ball} 1/2 ||X - M||^2 - <Z, X>,
/// whose gradient -P_ball(M + Z) is 1-Lipschitz. Momentum restarts whenever q
/// drops. At X = P_ball(M + Z) the duality gap is exactly <Z, X>.
inline Matrix project_nuclear_nonneg(const Matrix& m, double c, std::size_t max_iter = 2000, double tol = 1e-8,
                                     ProjectionStats* stats = nullptr) {
  require_config(c >= 0.0, "nuclear radius must be >= 0");
  ProjectionStats local;
  ProjectionStats& st = stats ? *stats : local;
  st = {};
  const Matrix clipped = m.cwiseMax(0.0);
  if (nuclear_norm(clipped) <= c) {
    st.converged = true;
    return clipped;
  }
  Matrix x = project_nuclear_ball(m, c);
  if (x.minCoeff() >= 0.0) {
    st.converged = true;
    return x;
  }
  const double scale = std::max(1.0, m.norm());
  auto dual = [&m](const Matrix& z, const Matrix& xz) { return 0.5 * (xz - m).squaredNorm() - z.cwiseProduct(xz).sum(); };
  Matrix z = Matrix::Zero(m.rows(), m.cols());
  Matrix v = z;
  double q = dual(z, x);
  double momentum = 1.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    st.iterations = it;
    const Matrix zn = (v - project_nuclear_ball(m + v, c)).cwiseMax(0.0);
    const Matrix xn = project_nuclear_ball(m + zn, c);
    const double qn = dual(zn, xn);
    if (qn < q) {
      momentum = 1.0;
      v = z;
      continue;
    }
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    v = zn + ((momentum - 1.0) / next) * (zn - z);
    momentum = next;
    const double moved = (xn - x).norm();
    z = zn;
    x = xn;
    q = qn;
    if (-x.minCoeff() <= tol * scale && z.cwiseProduct(x).sum() <= tol * scale * scale && moved <= tol * scale) {
      st.converged = true;
      break;
    }
  }
  // Clipping the last iterate can push the norm past c by about tol; a scale
  // restores feasibility without touching the sign pattern.
  x = x.cwiseMax(0.0);
  const double norm = nuclear_norm(x);
  if (norm > c) x *= c / norm;
  return x;
}

/// Zero the entries flagged in `zero_mask`, clamp the rest to [0, w_max].
inline Matrix project_support(const Matrix& m, const Mask& zero_mask, double w_max) {
  if (zero_mask.rows() != m.rows() || zero_mask.cols() != m.cols())
    throw ConfigError("project_support: mask shape mismatch");
  Matrix out = project_box(m, 0.0, w_max);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (zero_mask(i, j)) out(i, j) = 0.0;
  return out;
}

struct BoxSet {
  double w_max = std::numeric_limits<double>::infinity();
};
struct L1BallSet {
  double radius;
};
struct NuclearBallSet {
  double radius;
  std::size_t max_iter = 2000;
  double tol = 1e-8;
};
struct FixedSupportSet {
  Mask zero_mask;
  double w_max = std::numeric_limits<double>::infinity();
};

using FeasibleSet = std::variant<BoxSet, L1BallSet, NuclearBallSet, FixedSupportSet>;

inline Matrix project(const FeasibleSet& set, const Matrix& m) {
  return std::visit(
      [&m](const auto& s) -> Matrix {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BoxSet>) {
          return project_box(m, 0.0, s.w_max);
        } else if constexpr (std::is_same_v<S, L1BallSet>) {
          return project_l1_nonneg(m, s.radius);
        } else if constexpr (std::is_same_v<S, NuclearBallSet>) {
          return project_nuclear_nonneg(m, s.radius, s.max_iter, s.tol);
        } else {
          return project_support(m, s.zero_mask, s.w_max);
        }
      },
      set);
}

inline bool contains(const FeasibleSet& set, const Matrix& m, double tol = 1e-8) {
  if (m.size() && m.minCoeff() < -tol) return false;
  return std::visit(
      [&m, tol](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BoxSet>) {
          return m.size() == 0 || m.maxCoeff() <= s.w_max + tol;
        } else if constexpr (std::is_same_v<S, L1BallSet>) {
          return m.cwiseAbs().sum() <= s.radius + tol;
        } else if constexpr (std::is_same_v<S, NuclearBallSet>) {
          return nuclear_norm(m) <= s.radius + tol;
        } else {
          if (s.zero_mask.rows() != m.rows() || s.zero_mask.cols() != m.cols()) return false;
          for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i)
              if ((s.zero_mask(i, j) && std::abs(m(i, j)) > tol) || m(i, j) > s.w_max + tol) return false;
          return true;
        }
      },
      set);
}

inline std::string describe(const FeasibleSet& set) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BoxSet>) return "box:" + std::to_string(s.w_max);
        else if constexpr (std::is_same_v<S, L1BallSet>) return "l1:" + std::to_string(s.radius);
        else if constexpr (std::is_same_v<S, NuclearBallSet>) return "nuclear:" + std::to_string(s.radius);
        else return "support";
      },
      set);
}

}  // namespace hawkes
