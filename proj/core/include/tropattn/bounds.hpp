#pragma once

#include <cstdint>
#include <string>

#include "tropattn/types.hpp"

namespace tropattn {

/// Exact binomial coefficient; zero when k > n.
BigInt binomial(std::uint64_t n, std::uint64_t k);

/// Regions of a generic arrangement of n hyperplanes in R^d: sum_{j<=d} C(n, j).
BigInt zaslavsky_regions(std::uint64_t n, std::uint64_t d);

enum class Regime { kStandard, kSaturated };

std::string to_string(Regime r);

struct BoundReport {
  std::uint64_t n_tokens;
  std::uint64_t n_heads;
  std::uint64_t dim;
  Regime regime;
  BigInt bound_value;
};

/// Vertex bound for a Minkowski sum of H polytopes with at most N vertices
/// each in R^d: N (1 + N)^(H-1) when H <= d, otherwise
/// sum_{k<d} C(H-1, k) N^(k+1).
BigInt minkowski_vertex_upper_bound(std::uint64_t n_tokens, std::uint64_t n_heads,
                                    std::uint64_t dim);
BoundReport minkowski_bound_report(std::uint64_t n_tokens, std::uint64_t n_heads,
                                   std::uint64_t dim);

/// (minkowski bound * zaslavsky(d_ff, d))^L. L = 0 gives 1.
BigInt region_upper_bound(std::uint64_t n_tokens, std::uint64_t n_heads, std::uint64_t dim,
                          std::uint64_t d_ff, std::uint64_t depth);

/// (N^d * floor(d_ff / 2d)^d)^L, the headline constructive bound.
/// Throws when d_ff < 2d.
BigInt region_lower_bound(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                          std::uint64_t depth);

/// Teeth per coordinate of the sawtooth construction: floor(d_ff / 2d).
std::uint64_t sawtooth_teeth(std::uint64_t dim, std::uint64_t d_ff);

/// Exact region count realized by the parabolic-lifting + sawtooth network:
/// (N * 2w)^(d L) with w = floor(d_ff / 2d). Throws when d_ff < 2d.
BigInt construction_region_count(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                                 std::uint64_t depth);

BigInt big_pow(const BigInt& base, std::uint64_t exponent);

}  // namespace tropattn
