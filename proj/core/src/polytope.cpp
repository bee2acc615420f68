#include "tropattn/polytope.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>

#include <nlohmann/json.hpp>

#include "simplex.hpp"

namespace tropattn {

bool lex_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

namespace {

bool lex_greater_row(const Matrix& R, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < R.cols(); ++j) {
    if (R(a, j) != R(b, j)) return R(a, j) > R(b, j);
  }
  return false;
}

// Extreme-point enumeration for full-dimensional point sets in R^k (k >= 2).
// Maintains a set E of known extreme points. A candidate p is interior when
// no direction separates it from conv(E) by more than the tolerance; otherwise
// the separating direction exposes a new extreme point of the whole set.
class ExtremePointFinder {
 public:
  ExtremePointFinder(const Matrix& pts, double tol) : R_(pts), tol_(tol), in_e_(pts.rows(), false) {}

  std::vector<Eigen::Index> run() {
    const Eigen::Index k = R_.cols();
    for (Eigen::Index a = 0; a < k; ++a) {
      for (double sign : {1.0, -1.0}) {
        Vector c = Vector::Zero(k);
        c[a] = sign;
        add(expose(c));
      }
    }
    for (Eigen::Index i = 0; i < R_.rows(); ++i) {
      while (!in_e_[static_cast<std::size_t>(i)]) {
        auto dir = separate(R_.row(i).transpose(), -1);
        if (!dir) break;
        const Eigen::Index q = expose(*dir);
        if (in_e_[static_cast<std::size_t>(q)]) {
          add(i);
          break;
        }
        add(q);
      }
    }
    // Drop any member that the tolerance-based exposure let in but that is
    // not extreme relative to the rest of E.
    for (std::size_t pos = 0; pos < e_.size();) {
      const Eigen::Index cand = e_[pos];
      if (separate(R_.row(cand).transpose(), cand)) {
        ++pos;
      } else {
        in_e_[static_cast<std::size_t>(cand)] = false;
        e_.erase(e_.begin() + static_cast<std::ptrdiff_t>(pos));
      }
    }
    return e_;
  }

 private:
  void add(Eigen::Index i) {
    if (in_e_[static_cast<std::size_t>(i)]) return;
    in_e_[static_cast<std::size_t>(i)] = true;
    e_.push_back(i);
  }

  // Maximizer of <c, x>; near-ties resolved toward the lexicographically
  // largest point, which is extreme within the tied face.
  Eigen::Index expose(const Vector& c) const {
    const Vector proj = R_ * c;
    const double top = proj.maxCoeff();
    Eigen::Index arg = -1;
    for (Eigen::Index i = 0; i < R_.rows(); ++i) {
      if (proj[i] < top - tol_) continue;
      if (arg < 0 || lex_greater_row(R_, i, arg)) arg = i;
    }
    return arg;
  }

  // Direction c with |c|_inf <= 1 maximizing min_e <c, p - e> over e in E
  // (excluding `skip`). Returns it when the margin exceeds the tolerance.
  std::optional<Vector> separate(const Vector& p, Eigen::Index skip) const {
    const Eigen::Index k = R_.cols();
    std::vector<Eigen::Index> others;
    others.reserve(e_.size());
    for (auto e : e_)
      if (e != skip) others.push_back(e);
    if (others.empty()) {
      Vector c = Vector::Zero(k);
      c[0] = 1.0;
      return c;
    }
    const auto m = static_cast<Eigen::Index>(others.size());
    // Variables: c+ (k), c- (k), t. Rows: <c+ - c-, e - p> + t <= 0; c+_i + c-_i <= 1.
    Matrix A = Matrix::Zero(m + k, 2 * k + 1);
    Vector b = Vector::Zero(m + k);
    for (Eigen::Index r = 0; r < m; ++r) {
      const Vector diff = R_.row(others[static_cast<std::size_t>(r)]).transpose() - p;
      A.block(r, 0, 1, k) = diff.transpose();
      A.block(r, k, 1, k) = -diff.transpose();
      A(r, 2 * k) = 1.0;
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      A(m + i, i) = 1.0;
      A(m + i, k + i) = 1.0;
      b[m + i] = 1.0;
    }
    Vector obj = Vector::Zero(2 * k + 1);
    obj[2 * k] = 1.0;
    const auto res = detail::maximize_from_origin(A, b, obj);
    if (res.status != detail::LpStatus::kOptimal) throw Error("separation LP unbounded");
    if (res.value <= tol_) return std::nullopt;
    return Vector(res.x.head(k) - res.x.segment(k, k));
  }

  const Matrix& R_;
  double tol_;
  std::vector<bool> in_e_;
  std::vector<Eigen::Index> e_;
};

}  // namespace

Polytope::Polytope(Eigen::Index dim, std::span<const Vector> points)
    : Polytope(convex_hull(points, dim)) {}

Polytope::Polytope(Eigen::Index dim, std::vector<Vector> sorted_vertices, Eigen::Index affine_dim)
    : dim_(dim), vertices_(std::move(sorted_vertices)), affine_dim_(affine_dim) {}

Polytope Polytope::translated(const Vector& offset) const {
  if (offset.size() != dim_) throw Error("dimension mismatch");
  std::vector<Vector> moved;
  moved.reserve(vertices_.size());
  for (const auto& v : vertices_) moved.push_back(v + offset);
  return convex_hull(moved, dim_);
}

bool Polytope::same_vertices(const Polytope& other, double rel_tol) const {
  if (dim_ != other.dim_ || vertices_.size() != other.vertices_.size()) return false;
  double scale = 1.0;
  for (const auto& v : vertices_) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  for (const auto& v : other.vertices_) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  std::vector<bool> used(other.vertices_.size(), false);
  for (const auto& v : vertices_) {
    bool found = false;
    for (std::size_t j = 0; j < other.vertices_.size() && !found; ++j) {
      if (!used[j] && (v - other.vertices_[j]).cwiseAbs().maxCoeff() <= rel_tol * scale) {
        used[j] = true;
        found = true;
      }
    }
    if (!found) return false;
  }
  return true;
}

Polytope convex_hull(std::span<const Vector> points, Eigen::Index dim) {
  if (points.empty()) throw Error("convex hull needs at least one point");
  if (dim < 1) throw Error("ambient dimension must be positive");
  if (dim > kMaxHullDimension) throw Error("unsupported ambient dimension");
  for (const auto& p : points)
    if (p.size() != dim) throw Error("dimension mismatch");

  const auto n = static_cast<Eigen::Index>(points.size());
  Vector lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diam = (hi - lo).norm();
  if (!(diam > 0.0)) return Polytope(dim, {points[0]}, 0);
  const Vector center = 0.5 * (lo + hi);

  Matrix scaled(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    scaled.row(i) = ((points[static_cast<std::size_t>(i)] - center) / diam).transpose();

  // Deduplicate in lexicographic order; the first of a coincident cluster wins.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return lex_less(points[static_cast<std::size_t>(a)], points[static_cast<std::size_t>(b)]);
  });
  std::vector<Eigen::Index> kept;
  kept.reserve(order.size());
  std::vector<Eigen::Index> by_first;  // kept, sorted by first scaled coordinate
  for (auto idx : order) {
    const auto row = scaled.row(idx);
    auto it = std::lower_bound(by_first.begin(), by_first.end(), row[0] - kCoincidenceTolerance,
                               [&](Eigen::Index a, double v) { return scaled(a, 0) < v; });
    bool dup = false;
    for (; it != by_first.end() && scaled(*it, 0) <= row[0] + kCoincidenceTolerance; ++it) {
      if ((scaled.row(*it) - row).cwiseAbs().maxCoeff() <= kCoincidenceTolerance) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    kept.push_back(idx);
    auto pos = std::upper_bound(by_first.begin(), by_first.end(), row[0],
                                [&](double v, Eigen::Index a) { return v < scaled(a, 0); });
    by_first.insert(pos, idx);
  }

  const auto m = static_cast<Eigen::Index>(kept.size());
  auto finish = [&](std::vector<Eigen::Index> local, Eigen::Index affine_dim) {
    std::vector<Vector> verts;
    verts.reserve(local.size());
    for (auto l : local) verts.push_back(points[static_cast<std::size_t>(kept[static_cast<std::size_t>(l)])]);
    std::sort(verts.begin(), verts.end(), lex_less);
    return Polytope(dim, std::move(verts), affine_dim);
  };
  if (m == 1) return finish({0}, 0);

  Matrix unique(m, dim);
  for (Eigen::Index i = 0; i < m; ++i) unique.row(i) = scaled.row(kept[static_cast<std::size_t>(i)]);
  const Eigen::RowVectorXd mean = unique.colwise().mean();
  const Matrix centered = unique.rowwise() - mean;
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Eigen::Index k = 0;
  while (k < sv.size() && sv[k] > kRankTolerance * sv[0]) ++k;
  const Matrix reduced = centered * svd.matrixV().leftCols(k);

  if (k == 1) {
    Eigen::Index imin = 0, imax = 0;
    for (Eigen::Index i = 1; i < m; ++i) {
      if (reduced(i, 0) < reduced(imin, 0)) imin = i;
      if (reduced(i, 0) > reduced(imax, 0)) imax = i;
    }
    return finish({imin, imax}, 1);
  }

  ExtremePointFinder finder(reduced, kCoplanarityTolerance);
  return finish(finder.run(), k);
}

Polytope minkowski_sum(std::span<const Polytope> parts) {
  if (parts.empty()) throw Error("minkowski sum needs at least one part");
  const Eigen::Index dim = parts.front().dim();
  double count = 1.0;
  for (const auto& p : parts) {
    if (p.dim() != dim) throw Error("dimension mismatch");
    count *= static_cast<double>(p.num_vertices());
  }
  if (count > kMinkowskiPointGuard) throw Error("sum too large; reduce N or H");

  std::vector<Vector> sums;
  sums.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> odo(parts.size(), 0);
  while (true) {
    Vector s = Vector::Zero(dim);
    for (std::size_t h = 0; h < parts.size(); ++h) s += parts[h].vertices()[odo[h]];
    sums.push_back(std::move(s));
    std::size_t h = 0;
    for (; h < parts.size(); ++h) {
      if (++odo[h] < parts[h].num_vertices()) break;
      odo[h] = 0;
    }
    if (h == parts.size()) break;
  }
  return convex_hull(sums, dim);
}

nlohmann::json to_json(const Polytope& p) {
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& v : p.vertices()) verts.push_back(to_std(v));
  return {{"dim", p.dim()}, {"vertices", std::move(verts)}};
}

Polytope polytope_from_json(const nlohmann::json& j) {
  const auto dim = j.at("dim").get<Eigen::Index>();
  std::vector<Vector> pts;
  for (const auto& row : j.at("vertices")) pts.push_back(to_vector(row.get<std::vector<double>>()));
  return convex_hull(pts, dim);
}

}  // namespace tropattn
