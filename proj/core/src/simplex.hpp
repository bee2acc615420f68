#pragma once

#include <vector>

#include "tropattn/types.hpp"

namespace tropattn::detail {

enum class LpStatus { kOptimal, kUnbounded };

struct LpResult {
  LpStatus status;
  double value;
  Vector x;
};

// maximize c^T x  subject to  A x <= b, x >= 0, with b >= 0 so the origin is a
// feasible starting vertex. Dense dictionary simplex; Dantzig pricing that
// falls back to Bland's rule once pivots stall.
LpResult maximize_from_origin(const Matrix& A, const Vector& b, const Vector& c);

}  // namespace tropattn::detail
