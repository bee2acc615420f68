#include "simplex.hpp"

#include <limits>
#include <numeric>

namespace tropattn::detail {

namespace {
constexpr double kPivotEps = 1e-12;
// A column whose reduced cost is this small and which has no positive pivot
// is round-off, not a genuine ray; it is skipped instead of reported.
constexpr double kSpuriousRayCost = 1e-9;
}

LpResult maximize_from_origin(const Matrix& A, const Vector& b, const Vector& c) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (b.size() != m || c.size() != n) throw Error("LP shape mismatch");

  // Rows 0..m-1: basic_i = T(i,n) - sum_j T(i,j) * nonbasic_j.
  // Row m: objective, z = T(m,n) - sum_j T(m,j) * nonbasic_j.
  Matrix T(m + 1, n + 1);
  T.topLeftCorner(m, n) = A;
  T.topRightCorner(m, 1) = b;
  T.bottomLeftCorner(1, n) = -c.transpose();
  T(m, n) = 0.0;

  std::vector<Eigen::Index> nonbasic(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> basic(static_cast<std::size_t>(m));
  std::iota(nonbasic.begin(), nonbasic.end(), 0);
  std::iota(basic.begin(), basic.end(), n);

  const Eigen::Index dantzig_budget = 4 * (m + n) + 50;
  std::vector<bool> skipped(static_cast<std::size_t>(n), false);
  for (Eigen::Index iter = 0;; ++iter) {
    const bool bland = iter >= dantzig_budget;
    Eigen::Index s = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (T(m, j) >= -kPivotEps || skipped[static_cast<std::size_t>(j)]) continue;
      if (s < 0) {
        s = j;
      } else if (bland ? nonbasic[j] < nonbasic[s] : T(m, j) < T(m, s)) {
        s = j;
      }
    }
    if (s < 0) break;

    Eigen::Index r = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (T(i, s) <= kPivotEps) continue;
      const double ratio = T(i, n) / T(i, s);
      // Ties prefer the larger pivot; Bland mode falls back to index order.
      const bool tie = r >= 0 && ratio <= best + kPivotEps;
      if (r < 0 || ratio < best - kPivotEps ||
          (tie && (bland ? basic[i] < basic[r] : T(i, s) > T(r, s)))) {
        r = i;
        best = ratio;
      }
    }
    if (r < 0) {
      if (T(m, s) > -kSpuriousRayCost) {
        skipped[static_cast<std::size_t>(s)] = true;
        continue;
      }
      return {LpStatus::kUnbounded, std::numeric_limits<double>::infinity(), {}};
    }
    std::fill(skipped.begin(), skipped.end(), false);

    const double inv = 1.0 / T(r, s);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == r || T(i, s) == 0.0) continue;
      const double f = T(i, s) * inv;
      T.row(i) -= f * T.row(r);
      T(i, s) = -f;
    }
    T.row(r) *= inv;
    T(r, s) = inv;
    std::swap(basic[r], nonbasic[s]);
  }

  LpResult out{LpStatus::kOptimal, T(m, n), Vector::Zero(n)};
  for (Eigen::Index i = 0; i < m; ++i)
    if (basic[i] < n) out.x[basic[i]] = T(i, n);
  return out;
}

}  // namespace tropattn::detail
