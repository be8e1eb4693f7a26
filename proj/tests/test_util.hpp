// Test-only oracles, deliberately independent of the library's
// implementation paths.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kka/common.hpp"
#include "kka/linalg.hpp"
#include "kka/types.hpp"

namespace oracle {

// Explicit inverse by Gauss-Jordan elimination with partial pivoting; the
// library uses Cholesky, so agreement is meaningful.
inline kka::Mat ge_inverse(const kka::Mat& a) {
  const std::size_t n = a.rows();
  kka::Mat aug(n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
    aug(i, n + i) = 1.0;
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(aug(r, col)) > std::abs(aug(pivot, col))) pivot = r;
    }
    if (std::abs(aug(pivot, col)) < 1e-300) {
      throw std::runtime_error("ge_inverse: singular matrix");
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < 2 * n; ++j) {
        std::swap(aug(col, j), aug(pivot, j));
      }
    }
    const double p = aug(col, col);
    for (std::size_t j = 0; j < 2 * n; ++j) aug(col, j) /= p;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = aug(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < 2 * n; ++j) aug(r, j) -= f * aug(col, j);
    }
  }
  kka::Mat inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) inv(i, j) = aug(i, n + j);
  }
  return inv;
}

// O(n^2) pairwise AUC definition: ties count one half.
inline double brute_force_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

// Random well-conditioned SPD matrix: A^T A + n I.
inline kka::Mat random_spd(std::size_t n, kka::Rng& rng) {
  kka::Mat a(n, n);
  for (double& v : a.data()) v = rng.gaussian();
  kka::Mat spd(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += a(k, i) * a(k, j);
      spd(i, j) = acc;
    }
  }
  for (std::size_t i = 0; i < n; ++i) spd(i, i) += static_cast<double>(n);
  return spd;
}

inline kka::Vec random_vec(std::size_t n, kka::Rng& rng, double scale = 1.0) {
  kka::Vec v(n);
  for (double& x : v) x = scale * rng.gaussian();
  return v;
}

// Central finite difference of f with respect to a single parameter
// reachable through the mutable reference returned by access().
template <typename F, typename Access>
double central_difference(F&& f, Access&& access, double step = 1e-5) {
  double& param = access();
  const double saved = param;
  param = saved + step;
  const double hi = f();
  param = saved - step;
  const double lo = f();
  param = saved;
  return (hi - lo) / (2.0 * step);
}

inline double relative_error(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
  return std::abs(got - want) / denom;
}

inline kka::Sample make_sample(std::uint64_t id, kka::Vec features,
                               kka::Label label = kka::Label::normal,
                               std::vector<int> tokens = {}) {
  kka::Sample s;
  s.id = id;
  s.label = label;
  s.features = std::move(features);
  if (!tokens.empty()) {
    kka::TokenSequence seq;
    seq.tokens = std::move(tokens);
    s.description = std::move(seq);
  }
  return s;
}

}  // namespace oracle
