#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tropattn/tropical.hpp"
#include "tropattn/types.hpp"

namespace tropattn {

/// Keys, values and optional affine query map of one attention head.
///
/// Queries enter either already projected (no projection set) or as model
/// inputs x that are mapped to q = W_Q^T x + b_Q. The log-lifted form stores
/// tilde-values with V = exp(tilde-V / tau_ref); it is only defined for strictly
/// positive values.
class HeadData {
 public:
  HeadData(std::vector<Vector> keys, std::vector<Vector> values);
  /// Lifted head whose values are exp(lifted / reference_tau).
  static HeadData lifted(std::vector<Vector> keys, std::vector<Vector> lifted_values,
                         double reference_tau = 1.0);
  /// Lifted head with explicit values; they must be positive and agree with
  /// exp(lifted / reference_tau) to 1e-9 relative.
  HeadData(std::vector<Vector> keys, std::vector<Vector> values, std::vector<Vector> lifted_values,
           double reference_tau);

  /// W_Q is d_model x d_k; bias has length d_k.
  HeadData& set_query_map(Matrix w_q, std::optional<Vector> bias = std::nullopt);

  std::size_t size() const { return static_cast<std::size_t>(keys_.rows()); }
  Eigen::Index key_dim() const { return keys_.cols(); }
  Eigen::Index value_dim() const { return values_.cols(); }
  /// Dimension of inputs accepted by project_query.
  Eigen::Index input_dim() const { return w_q_ ? w_q_->rows() : keys_.cols(); }

  const Matrix& keys() const { return keys_; }
  const Matrix& values() const { return values_; }
  Vector key(std::size_t j) const { return keys_.row(static_cast<Eigen::Index>(j)).transpose(); }
  Vector value(std::size_t j) const { return values_.row(static_cast<Eigen::Index>(j)).transpose(); }
  const std::optional<Matrix>& lifted_values() const { return lifted_; }
  double lift_reference_tau() const { return lift_tau_; }
  const std::optional<Matrix>& query_projection() const { return w_q_; }
  const std::optional<Vector>& query_bias() const { return b_q_; }

  Vector project_query(const Vector& x) const;
  /// <q, k_j> for every key.
  Vector scores(const Vector& q) const;

 private:
  Matrix keys_;
  Matrix values_;
  std::optional<Matrix> lifted_;
  double lift_tau_ = 1.0;
  std::optional<Matrix> w_q_;
  std::optional<Vector> b_q_;
};

struct RoutingResult {
  std::size_t winner;
  IndexSet tie_set;
  /// best - second best; 0 when tied, +inf for a single candidate.
  double margin;

  bool is_tie() const { return tie_set.size() > 1; }
};

/// Routing decision from raw scores (larger wins) with shared tie semantics.
RoutingResult route_scores(std::span<const double> scores, double tolerance = kTieTolerance);

/// Softmax-weighted value average at finite temperature (max-shifted).
Vector soft_attention(const Vector& q, const HeadData& head, Temperature temp);

/// Softmax weights over the keys at finite temperature.
Vector attention_weights(const Vector& q, const HeadData& head, Temperature temp);

RoutingResult hard_routing(const Vector& q, std::span<const Vector> keys);
RoutingResult hard_routing(const Vector& q, const HeadData& head);

/// argmin_j ||q - c_j||^2 - w_j.
RoutingResult power_voronoi_membership(const Vector& q, std::span<const Vector> sites,
                                       std::span<const double> weights);

/// Power weights w_j = ||k_j||^2 that make power-diagram cells equal the
/// dot-product routing cells.
std::vector<double> key_norm_weights(std::span<const Vector> keys);

struct LiftedOutput {
  double value;
  /// Denominator argmax: the routing tie set.
  IndexSet routing_ties;
  /// Numerator argmax.
  IndexSet value_ties;
  /// On a routing wall: lifted value of every tied token.
  std::vector<double> candidates;

  bool on_boundary() const { return routing_ties.size() > 1; }
};

/// max_j(<q,k_j> + lifted_{j,c}) - max_l <q,k_l>, the zero-temperature
/// tropical rational form of channel c.
LiftedOutput log_lifted_output(const Vector& q, const HeadData& head, std::size_t channel);

/// tau * log of the channel-c output of soft attention with V = exp(lifted / tau),
/// evaluated in log space.
double lifted_soft_output(const Vector& q, const HeadData& head, std::size_t channel,
                          Temperature temp);

/// Indices whose power cell wins at least one strict-margin probe among
/// `probe_budget` uniform samples in `box` (default [-4, 4]^d). A Monte Carlo
/// lower bound on the set of nonempty cells.
IndexSet empty_cell_census(std::span<const Vector> sites, std::span<const double> weights,
                           std::uint64_t probe_budget, std::uint64_t seed,
                           std::optional<Box> box = std::nullopt);

nlohmann::json to_json(const HeadData& head);
HeadData head_from_json(const nlohmann::json& j);

Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
std::vector<Vector> rows_from_json(const nlohmann::json& j);

}  // namespace tropattn
