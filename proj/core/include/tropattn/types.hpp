#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

namespace tropattn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BigInt = boost::multiprecision::cpp_int;
using IndexSet = std::vector<std::size_t>;

// Absolute tolerance on the score scale used for argmax ties, routing margins
// and ReLU pre-activations that count as "on the boundary".
inline constexpr double kTieTolerance = 1e-9;

// Softmax mass above which a term counts as dominant at finite temperature.
inline constexpr double kDominanceMass = 1e-6;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Vector make_vector(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Vector to_vector(const std::vector<double>& xs) {
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace tropattn

namespace tropattn {

/// Axis-aligned box, one (lo, hi) pair per coordinate.
struct Box {
  Vector lo;
  Vector hi;

  static Box cube(Eigen::Index dim, double lo, double hi) {
    return {Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
  }
  Eigen::Index dim() const { return lo.size(); }
};

}  // namespace tropattn
