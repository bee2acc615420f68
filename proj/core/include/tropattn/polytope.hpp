#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tropattn/types.hpp"

namespace tropattn {

inline constexpr Eigen::Index kMaxHullDimension = 8;

// Relative tolerances, measured after scaling coordinates by the bounding-box
// diameter of the input.
inline constexpr double kCoincidenceTolerance = 1e-9;
inline constexpr double kCoplanarityTolerance = 1e-9;
inline constexpr double kRankTolerance = 1e-10;

inline constexpr double kMinkowskiPointGuard = 1e7;

/// Convex polytope stored by its extreme points, sorted lexicographically.
class Polytope {
 public:
  /// Canonicalizes: keeps only the extreme points of conv(points).
  Polytope(Eigen::Index dim, std::span<const Vector> points);

  Eigen::Index dim() const { return dim_; }
  /// Dimension of the affine hull of the vertex set.
  Eigen::Index affine_dim() const { return affine_dim_; }
  const std::vector<Vector>& vertices() const { return vertices_; }
  std::size_t num_vertices() const { return vertices_.size(); }

  Polytope translated(const Vector& offset) const;

  /// Vertex-set equality with a tolerance relative to the joint diameter.
  bool same_vertices(const Polytope& other, double rel_tol = 1e-7) const;

 private:
  friend Polytope convex_hull(std::span<const Vector>, Eigen::Index);
  Polytope(Eigen::Index dim, std::vector<Vector> sorted_vertices, Eigen::Index affine_dim);

  Eigen::Index dim_;
  std::vector<Vector> vertices_;
  Eigen::Index affine_dim_;
};

/// Extreme points of conv(points). Inputs whose affine hull is k < dim
/// dimensional are handled inside that affine hull; k is reported through
/// Polytope::affine_dim().
Polytope convex_hull(std::span<const Vector> points, Eigen::Index dim);

/// P_1 + ... + P_H by enumerating every vertex combination and taking the hull.
Polytope minkowski_sum(std::span<const Polytope> parts);

/// Lexicographic order on coordinates.
bool lex_less(const Vector& a, const Vector& b);

nlohmann::json to_json(const Polytope& p);
Polytope polytope_from_json(const nlohmann::json& j);

}  // namespace tropattn
