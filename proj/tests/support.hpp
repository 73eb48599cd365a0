#pragma once

// Shared fixtures for the unit tests.

#include <hawkes/events.hpp>
#include <hawkes/simulate.hpp>

#include <cstdint>
#include <vector>

namespace hawkes::test {

/// n events with uniform times on (0, horizon] and uniform actors.
inline EventStream random_stream(Rng& rng, std::size_t p, std::size_t n, double horizon) {
  std::vector<Event> evs;
  for (std::size_t i = 0; i < n; ++i)
    evs.push_back({static_cast<std::size_t>(rng.uniform() * static_cast<double>(p)), rng.uniform(1e-6, horizon)});
  return EventStream(std::move(evs), p, horizon);
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace hawkes::test
