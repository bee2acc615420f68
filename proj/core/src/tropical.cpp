#include "tropattn/tropical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace tropattn {

double TropScalar::value() const {
  if (!value_) throw Error("bottom element has no real value");
  return *value_;
}

double TropScalar::as_double() const {
  return value_ ? *value_ : -std::numeric_limits<double>::infinity();
}

TropScalar trop_add(TropScalar a, TropScalar b) {
  if (a.is_bottom()) return b;
  if (b.is_bottom()) return a;
  return std::max(a.value(), b.value());
}

TropScalar trop_mul(TropScalar a, TropScalar b) {
  if (a.is_bottom() || b.is_bottom()) return TropScalar::bottom();
  return a.value() + b.value();
}

TropScalar trop_sum(std::span<const TropScalar> xs) {
  TropScalar acc = TropScalar::bottom();
  for (const auto& x : xs) acc = trop_add(acc, x);
  return acc;
}

TropScalar trop_product(std::span<const TropScalar> xs) {
  TropScalar acc = 0.0;
  for (const auto& x : xs) acc = trop_mul(acc, x);
  return acc;
}

Temperature::Temperature(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw Error("temperature must be finite and strictly positive");
}

double Temperature::tau() const {
  if (is_zero()) throw Error("zero-temperature marker has no finite tau");
  return tau_;
}

double lse_add(std::span<const double> values, Temperature temp) {
  if (values.empty()) throw Error("empty operand list");
  const double top = *std::max_element(values.begin(), values.end());
  if (temp.is_zero() || values.size() == 1) return top;
  const double tau = temp.tau();
  // Terms equal to the max contribute exactly 1; the rest are summed
  // separately so log1p keeps precision when they are tiny.
  double ones = 0.0;
  double rest = 0.0;
  for (double v : values) {
    if (v == top)
      ones += 1.0;
    else
      rest += std::exp((v - top) / tau);
  }
  return top + tau * (std::log(ones) + std::log1p(rest / ones));
}

IndexSet tie_set(std::span<const double> scores, double tolerance) {
  IndexSet out;
  if (scores.empty()) return out;
  const double top = *std::max_element(scores.begin(), scores.end());
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] >= top - tolerance) out.push_back(j);
  return out;
}

namespace {

struct LexLess {
  bool operator()(const Vector& a, const Vector& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  }
};

}  // namespace

TropicalPolynomial::TropicalPolynomial(std::vector<TropicalTerm> terms) {
  if (terms.empty()) throw Error("tropical polynomial needs at least one term");
  dim_ = terms.front().exponent.size();
  if (dim_ <= 0) throw Error("tropical polynomial needs a positive dimension");
  std::map<Vector, std::size_t, LexLess> seen;
  terms_.reserve(terms.size());
  for (auto& t : terms) {
    if (t.exponent.size() != dim_) throw Error("dimension mismatch between exponent vectors");
    auto [it, fresh] = seen.try_emplace(t.exponent, terms_.size());
    if (fresh)
      terms_.push_back(std::move(t));
    else
      terms_[it->second].coeff = std::max(terms_[it->second].coeff, t.coeff);
  }
}

Vector TropicalPolynomial::scores(const Vector& x) const {
  if (x.size() != dim_) throw Error("dimension mismatch");
  Vector s(static_cast<Eigen::Index>(terms_.size()));
  for (std::size_t j = 0; j < terms_.size(); ++j)
    s[static_cast<Eigen::Index>(j)] = terms_[j].coeff + terms_[j].exponent.dot(x);
  return s;
}

PolyEval TropicalPolynomial::eval(const Vector& x, Temperature temp) const {
  const Vector s = scores(x);
  std::span<const double> view(s.data(), static_cast<std::size_t>(s.size()));
  if (temp.is_zero()) return {s.maxCoeff(), tie_set(view)};

  PolyEval out{lse_add(view, temp), {}};
  const double tau = temp.tau();
  for (std::size_t j = 0; j < view.size(); ++j) {
    // softmax mass of term j = exp((s_j - P) / tau)
    if (std::exp((view[j] - out.value) / tau) >= kDominanceMass) out.argmax.push_back(j);
  }
  return out;
}

PolyEval eval_trop_poly(const TropicalPolynomial& p, const Vector& x, Temperature temp) {
  return p.eval(x, temp);
}

}  // namespace tropattn
