#pragma once

// Slow, independent reference implementations used only by the tests.

#include "gbdomain/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using gbdomain::Index;
using gbdomain::Matrix;
using gbdomain::Vector;

struct EigenPairs {
  Vector values;   // descending
  Matrix vectors;  // columns
};

// Cyclic Jacobi rotations until the off-diagonal norm drops below 1e-14 * trace.
inline EigenPairs jacobi(Matrix a) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(1e-300, a.diagonal().cwiseAbs().sum());
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < 1e-14 * scale) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  EigenPairs out{Vector(n), Matrix(n, n)};
  for (Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Sum of squared deviations from the group mean, 1-D.
inline double sse(const std::vector<double>& x, const std::vector<int>& side, int which) {
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (side[i] == which) s += x[i], n += 1.0;
  if (n == 0.0) return 0.0;
  const double m = s / n;
  double e = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (side[i] == which) e += (x[i] - m) * (x[i] - m);
  return e;
}

// Minimum over all nonempty 2-partitions of the within-cluster sum of squares.
// In one dimension the weight is 1, so this is the weighted objective for any beta.
inline double best_two_partition_1d(const std::vector<double>& x) {
  const std::size_t n = x.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> side(n);
  for (unsigned long mask = 1; mask < (1UL << n) - 1; ++mask) {
    if (mask & 1UL) continue;  // each partition once: sample 0 on side 0
    for (std::size_t i = 0; i < n; ++i) side[i] = static_cast<int>((mask >> i) & 1UL);
    best = std::min(best, sse(x, side, 0) + sse(x, side, 1));
  }
  return best;
}

// Minimum inertia over all assignments of the rows of x to k groups.
inline double best_kmeans_inertia(const Matrix& x, int k) {
  const Index n = x.rows();
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double inertia = 0.0;
    for (int c = 0; c < k; ++c) {
      Vector m = Vector::Zero(x.cols());
      double cnt = 0.0;
      for (Index i = 0; i < n; ++i)
        if (a[static_cast<std::size_t>(i)] == c) m += x.row(i).transpose(), cnt += 1.0;
      if (cnt == 0.0) continue;
      m /= cnt;
      for (Index i = 0; i < n; ++i)
        if (a[static_cast<std::size_t>(i)] == c) inertia += (x.row(i).transpose() - m).squaredNorm();
    }
    best = std::min(best, inertia);
    std::size_t pos = 0;
    while (pos < a.size() && ++a[pos] == k) a[pos++] = 0;
    if (pos == a.size()) break;
  }
  return best;
}

// Largest total overlap sum_c |{i : cur_i = c, prev_i = perm[c]}| over all permutations.
inline long best_overlap(const std::vector<int>& cur, const std::vector<int>& prev, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  long best = -1;
  do {
    long total = 0;
    for (std::size_t i = 0; i < cur.size(); ++i) total += perm[static_cast<std::size_t>(cur[i])] == prev[i];
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline long overlap_of(const std::vector<int>& a, const std::vector<int>& b) {
  long total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i] == b[i];
  return total;
}

// Central differences of a scalar function of a matrix.
inline Matrix numeric_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-4) {
  Matrix g(x.rows(), x.cols());
  Matrix y = x;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      y(i, j) = x(i, j) + h;
      const double up = f(y);
      y(i, j) = x(i, j) - h;
      const double down = f(y);
      y(i, j) = x(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  return g;
}

// Largest entrywise deviation relative to the largest gradient entry.
inline double rel_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-12) {
  const double scale = std::max({floor, analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff()});
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

// Inverse-scatter weights evaluated term by term from the closed form.
inline Vector direct_weights(const Vector& d, double beta, double eps) {
  const Index n = d.size();
  Vector w = Vector::Zero(n);
  bool any = false;
  for (Index j = 0; j < n; ++j) any = any || d(j) > 0.0;
  if (!any) return Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (Index j = 0; j < n; ++j) {
    if (d(j) == 0.0) continue;
    double s = 0.0;
    for (Index t = 0; t < n; ++t)
      if (d(t) > 0.0) s += std::pow((d(j) + eps) / (d(t) + eps), 1.0 / (beta - 1.0));
    w(j) = 1.0 / s;
  }
  return w;
}

inline Matrix gaussian(Index r, Index c, std::mt19937_64& gen, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = nd(gen);
  return m;
}

}  // namespace oracle
