#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tropattn/network.hpp"
#include "tropattn/types.hpp"

namespace tropattn {

struct CensusReport {
  std::uint64_t n_samples = 0;
  std::uint64_t n_distinct = 0;
  std::uint64_t n_boundary_discarded = 0;
  std::uint64_t seed = 0;
  Box box;
};

/// Counts distinct zero-temperature signatures over n uniform samples in the
/// box. Sample i depends only on (seed, i), so results do not depend on the
/// thread count and prefixes of a longer run are shorter runs.
CensusReport monte_carlo_census(const BlockNetwork& net, const Box& box, std::uint64_t n,
                                std::uint64_t seed, unsigned threads = 1);

/// 2w max(0,x) + 4w sum_{m=1}^{2w-1} (-1)^m max(0, x - m/2w).
double sawtooth(double x, std::uint64_t w);

/// Constructive network: H = d heads with parabolic keys over [0,1] per
/// coordinate, identity output projection, residual, and a block-diagonal
/// FFN that rescales each cell onto [0,1] and folds it with a w-tooth
/// sawtooth (w = floor(d_ff / 2d)).
BlockNetwork build_lower_bound_net(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                                   std::uint64_t depth);

/// Maximal linear pieces of a one-dimensional network on [lo, hi] at zero
/// temperature, by exact breakpoint enumeration layer by layer.
std::uint64_t count_linear_pieces_1d(const BlockNetwork& net, double lo, double hi);

inline constexpr double kCensusRegionGuard = 1e6;

struct TheoryComparison {
  std::uint64_t teeth;
  std::uint64_t measured;
  BigInt construction_count;  // (N 2w)^(dL)
  BigInt lower;               // headline constructive bound
  BigInt upper;               // region_upper_bound with H = d
  BigInt oracle;              // breakpoint (d = 1) or product (d > 1) count
  CensusReport census;
};

TheoryComparison census_vs_theory(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                                  std::uint64_t depth, std::uint64_t n_samples, std::uint64_t seed,
                                  unsigned threads = 1);

}  // namespace tropattn
