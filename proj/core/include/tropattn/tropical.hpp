#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tropattn/types.hpp"

namespace tropattn {

/// Element of the max-plus semiring: a real number or the bottom element
/// (the additive identity, playing the role of minus infinity).
class TropScalar {
 public:
  constexpr TropScalar(double v) : value_(v) {}  // NOLINT: implicit on purpose
  static constexpr TropScalar bottom() { return TropScalar(); }

  constexpr bool is_bottom() const { return !value_.has_value(); }
  /// Throws Error on bottom.
  double value() const;
  /// Bottom maps to -infinity.
  double as_double() const;

  friend constexpr bool operator==(const TropScalar&, const TropScalar&) = default;

 private:
  constexpr TropScalar() = default;
  std::optional<double> value_;
};

TropScalar trop_add(TropScalar a, TropScalar b);
TropScalar trop_mul(TropScalar a, TropScalar b);
TropScalar trop_sum(std::span<const TropScalar> xs);
TropScalar trop_product(std::span<const TropScalar> xs);

inline TropScalar operator+(TropScalar a, TropScalar b) { return trop_add(a, b); }
inline TropScalar operator*(TropScalar a, TropScalar b) { return trop_mul(a, b); }

/// Deformation parameter of log-sum-exp arithmetic. The zero marker selects
/// exact max-plus arithmetic and is distinct from every finite tau.
class Temperature {
 public:
  explicit Temperature(double tau);
  static Temperature zero() { return Temperature(); }

  bool is_zero() const { return tau_ == 0.0; }
  /// Throws Error for the zero marker.
  double tau() const;

  friend bool operator==(const Temperature&, const Temperature&) = default;

 private:
  Temperature() = default;
  double tau_ = 0.0;
};

/// tau * log(sum exp(v / tau)) in max-shifted form; exact max at zero temperature.
double lse_add(std::span<const double> values, Temperature temp);

struct TropicalTerm {
  double coeff;
  Vector exponent;
};

struct PolyEval {
  double value;
  IndexSet argmax;
};

/// max_j (c_j + <alpha_j, x>). Terms with identical exponents are merged at
/// construction, keeping the larger coefficient.
class TropicalPolynomial {
 public:
  explicit TropicalPolynomial(std::vector<TropicalTerm> terms);

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<TropicalTerm>& terms() const { return terms_; }

  /// Zero temperature: max over terms, argmax = terms within kTieTolerance.
  /// Finite tau: LSE over terms, argmax = terms with softmax mass >= kDominanceMass.
  PolyEval eval(const Vector& x, Temperature temp) const;

  /// Per-term scores c_j + <alpha_j, x>.
  Vector scores(const Vector& x) const;

 private:
  std::vector<TropicalTerm> terms_;
  Eigen::Index dim_ = 0;
};

PolyEval eval_trop_poly(const TropicalPolynomial& p, const Vector& x, Temperature temp);

/// Indices of entries within kTieTolerance of the maximum.
IndexSet tie_set(std::span<const double> scores, double tolerance = kTieTolerance);

}  // namespace tropattn
