#include "tropattn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "tropattn/rng.hpp"

namespace tropattn {

namespace {

Matrix stack_rows(const std::vector<Vector>& rows, const char* what) {
  if (rows.empty()) throw Error(std::string(what) + " must not be empty");
  const Eigen::Index d = rows.front().size();
  if (d <= 0) throw Error(std::string(what) + " must have positive dimension");
  Matrix m(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw Error(std::string(what) + " have inconsistent dimensions");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

}  // namespace

HeadData::HeadData(std::vector<Vector> keys, std::vector<Vector> values)
    : keys_(stack_rows(keys, "keys")), values_(stack_rows(values, "values")) {
  if (keys_.rows() != values_.rows()) throw Error("keys and values must have the same count");
}

HeadData HeadData::lifted(std::vector<Vector> keys, std::vector<Vector> lifted_values,
                          double reference_tau) {
  if (!(reference_tau > 0.0)) throw Error("reference temperature must be positive");
  std::vector<Vector> values;
  values.reserve(lifted_values.size());
  for (const auto& v : lifted_values) values.push_back((v / reference_tau).array().exp().matrix());
  return HeadData(std::move(keys), std::move(values), std::move(lifted_values), reference_tau);
}

HeadData::HeadData(std::vector<Vector> keys, std::vector<Vector> values,
                   std::vector<Vector> lifted_values, double reference_tau)
    : HeadData(std::move(keys), std::move(values)) {
  if (!(reference_tau > 0.0)) throw Error("reference temperature must be positive");
  Matrix lifted = stack_rows(lifted_values, "lifted values");
  if (lifted.rows() != values_.rows() || lifted.cols() != values_.cols())
    throw Error("lifted values must have the same shape as values");
  if ((values_.array() <= 0.0).any())
    throw Error("log-lifting requires strictly positive values");
  const Matrix expected = (lifted / reference_tau).array().exp().matrix();
  for (Eigen::Index i = 0; i < values_.rows(); ++i)
    for (Eigen::Index c = 0; c < values_.cols(); ++c)
      if (std::abs(values_(i, c) - expected(i, c)) > 1e-9 * std::abs(expected(i, c)))
        throw Error("values disagree with exp(lifted / reference tau)");
  lifted_ = std::move(lifted);
  lift_tau_ = reference_tau;
}

HeadData& HeadData::set_query_map(Matrix w_q, std::optional<Vector> bias) {
  if (w_q.cols() != keys_.cols()) throw Error("query projection must map onto the key dimension");
  if (bias && bias->size() != keys_.cols()) throw Error("query bias must have the key dimension");
  w_q_ = std::move(w_q);
  b_q_ = std::move(bias);
  return *this;
}

Vector HeadData::project_query(const Vector& x) const {
  if (x.size() != input_dim()) throw Error("dimension mismatch");
  Vector q = w_q_ ? Vector(w_q_->transpose() * x) : x;
  if (b_q_) q += *b_q_;
  return q;
}

Vector HeadData::scores(const Vector& q) const {
  if (q.size() != keys_.cols()) throw Error("dimension mismatch");
  return keys_ * q;
}

RoutingResult route_scores(std::span<const double> scores, double tolerance) {
  if (scores.empty()) throw Error("empty key list");
  RoutingResult out{0, tie_set(scores, tolerance), 0.0};
  out.winner = out.tie_set.front();
  if (out.tie_set.size() > 1) return out;
  double second = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (j != out.winner) second = std::max(second, scores[j]);
  out.margin = scores[out.winner] - second;
  return out;
}

Vector attention_weights(const Vector& q, const HeadData& head, Temperature temp) {
  if (temp.is_zero()) throw Error("use hard_routing for τ=0");
  const Vector s = head.scores(q);
  Vector w = ((s.array() - s.maxCoeff()) / temp.tau()).exp().matrix();
  return w / w.sum();
}

Vector soft_attention(const Vector& q, const HeadData& head, Temperature temp) {
  return head.values().transpose() * attention_weights(q, head, temp);
}

RoutingResult hard_routing(const Vector& q, std::span<const Vector> keys) {
  if (keys.empty()) throw Error("empty key list");
  std::vector<double> s;
  s.reserve(keys.size());
  for (const auto& k : keys) {
    if (k.size() != q.size()) throw Error("dimension mismatch");
    s.push_back(q.dot(k));
  }
  return route_scores(s);
}

RoutingResult hard_routing(const Vector& q, const HeadData& head) {
  const Vector s = head.scores(q);
  return route_scores({s.data(), static_cast<std::size_t>(s.size())});
}

RoutingResult power_voronoi_membership(const Vector& q, std::span<const Vector> sites,
                                       std::span<const double> weights) {
  if (sites.size() != weights.size()) throw Error("sites and weights differ in length");
  if (sites.empty()) throw Error("empty key list");
  std::vector<double> s;
  s.reserve(sites.size());
  for (std::size_t j = 0; j < sites.size(); ++j) {
    if (sites[j].size() != q.size()) throw Error("dimension mismatch");
    s.push_back(weights[j] - (q - sites[j]).squaredNorm());
  }
  return route_scores(s);
}

std::vector<double> key_norm_weights(std::span<const Vector> keys) {
  std::vector<double> w;
  w.reserve(keys.size());
  for (const auto& k : keys) w.push_back(k.squaredNorm());
  return w;
}

LiftedOutput log_lifted_output(const Vector& q, const HeadData& head, std::size_t channel) {
  if (!head.lifted_values()) throw Error("head has no lifted values");
  const Matrix& lifted = *head.lifted_values();
  if (channel >= static_cast<std::size_t>(lifted.cols())) throw Error("channel out of range");
  const auto c = static_cast<Eigen::Index>(channel);

  std::vector<TropicalTerm> num, den;
  for (std::size_t j = 0; j < head.size(); ++j) {
    num.push_back({lifted(static_cast<Eigen::Index>(j), c), head.key(j)});
    den.push_back({0.0, head.key(j)});
  }
  // Like exponents merge inside TropicalPolynomial; tie sets are recomputed on
  // the raw token indices so duplicate keys stay visible to callers.
  const auto top_num = TropicalPolynomial(std::move(num)).eval(q, Temperature::zero());
  const auto top_den = TropicalPolynomial(std::move(den)).eval(q, Temperature::zero());

  const Vector s = head.scores(q);
  const Vector sv = s + lifted.col(c);
  LiftedOutput out{top_num.value - top_den.value,
                   tie_set({s.data(), static_cast<std::size_t>(s.size())}),
                   tie_set({sv.data(), static_cast<std::size_t>(sv.size())}),
                   {}};
  if (out.on_boundary())
    for (auto j : out.routing_ties) out.candidates.push_back(lifted(static_cast<Eigen::Index>(j), c));
  return out;
}

double lifted_soft_output(const Vector& q, const HeadData& head, std::size_t channel,
                          Temperature temp) {
  if (!head.lifted_values()) throw Error("head has no lifted values");
  if (temp.is_zero()) return log_lifted_output(q, head, channel).value;
  const Matrix& lifted = *head.lifted_values();
  if (channel >= static_cast<std::size_t>(lifted.cols())) throw Error("channel out of range");
  const Vector s = head.scores(q);
  const Vector sv = s + lifted.col(static_cast<Eigen::Index>(channel));
  return lse_add({sv.data(), static_cast<std::size_t>(sv.size())}, temp) -
         lse_add({s.data(), static_cast<std::size_t>(s.size())}, temp);
}

IndexSet empty_cell_census(std::span<const Vector> sites, std::span<const double> weights,
                           std::uint64_t probe_budget, std::uint64_t seed,
                           std::optional<Box> box) {
  if (probe_budget < 1000) throw Error("probe budget must be at least 1000");
  if (sites.empty()) throw Error("empty key list");
  const Eigen::Index d = sites.front().size();
  const Box b = box ? *box : Box::cube(d, -4.0, 4.0);
  if (b.dim() != d) throw Error("dimension mismatch");
  const CounterRng rng(seed);
  std::vector<bool> hit(sites.size(), false);
  Vector q(d);
  for (std::uint64_t i = 0; i < probe_budget; ++i) {
    for (Eigen::Index a = 0; a < d; ++a)
      q[a] = rng.uniform(i, static_cast<std::uint64_t>(a), b.lo[a], b.hi[a]);
    const auto r = power_voronoi_membership(q, sites, weights);
    if (!r.is_tie()) hit[r.winner] = true;
  }
  IndexSet out;
  for (std::size_t j = 0; j < hit.size(); ++j)
    if (hit[j]) out.push_back(j);
  return out;
}

nlohmann::json to_json(const HeadData& head) {
  std::vector<Vector> keys, values;
  for (std::size_t j = 0; j < head.size(); ++j) {
    keys.push_back(head.key(j));
    values.push_back(head.value(j));
  }
  auto rows = [](const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_std(m.row(i).transpose()));
    return out;
  };
  nlohmann::json j = {{"keys", rows(head.keys())}, {"values", rows(head.values())}};
  if (head.lifted_values()) {
    j["lifted_values"] = rows(*head.lifted_values());
    j["lift_tau"] = head.lift_reference_tau();
  }
  if (head.query_projection()) j["w_q"] = matrix_to_json(*head.query_projection());
  if (head.query_bias()) j["b_q"] = to_std(*head.query_bias());
  return j;
}

HeadData head_from_json(const nlohmann::json& j) {
  auto keys = rows_from_json(j.at("keys"));
  const double lift_tau = j.value("lift_tau", 1.0);
  std::optional<HeadData> head;
  if (j.contains("lifted_values")) {
    auto lifted = rows_from_json(j.at("lifted_values"));
    if (j.contains("values"))
      head.emplace(std::move(keys), rows_from_json(j.at("values")), std::move(lifted), lift_tau);
    else
      head.emplace(HeadData::lifted(std::move(keys), std::move(lifted), lift_tau));
  } else {
    head.emplace(std::move(keys), rows_from_json(j.at("values")));
  }
  if (j.contains("w_q")) {
    std::optional<Vector> bias;
    if (j.contains("b_q")) bias = to_vector(j.at("b_q").get<std::vector<double>>());
    head->set_query_map(matrix_from_json(j.at("w_q")), std::move(bias));
  }
  return std::move(*head);
}

}  // namespace tropattn
