#include "tropattn/bounds.hpp"

namespace tropattn {

BigInt big_pow(const BigInt& base, std::uint64_t exponent) {
  BigInt result = 1;
  BigInt b = base;
  while (exponent > 0) {
    if (exponent & 1U) result *= b;
    exponent >>= 1U;
    if (exponent > 0) b *= b;
  }
  return result;
}

BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

BigInt zaslavsky_regions(std::uint64_t n, std::uint64_t d) {
  BigInt total = 0;
  for (std::uint64_t j = 0; j <= std::min(n, d); ++j) total += binomial(n, j);
  return total;
}

std::string to_string(Regime r) { return r == Regime::kStandard ? "standard" : "saturated"; }

BigInt minkowski_vertex_upper_bound(std::uint64_t n_tokens, std::uint64_t n_heads,
                                    std::uint64_t dim) {
  if (n_heads == 0) throw Error("number of heads must be positive");
  if (dim == 0) throw Error("dimension must be positive");
  const BigInt N = n_tokens;
  if (n_heads <= dim) return N * big_pow(N + 1, n_heads - 1);
  BigInt total = 0;
  for (std::uint64_t k = 0; k < dim; ++k) total += binomial(n_heads - 1, k) * big_pow(N, k + 1);
  return total;
}

BoundReport minkowski_bound_report(std::uint64_t n_tokens, std::uint64_t n_heads,
                                   std::uint64_t dim) {
  return {n_tokens, n_heads, dim, n_heads <= dim ? Regime::kStandard : Regime::kSaturated,
          minkowski_vertex_upper_bound(n_tokens, n_heads, dim)};
}

BigInt region_upper_bound(std::uint64_t n_tokens, std::uint64_t n_heads, std::uint64_t dim,
                          std::uint64_t d_ff, std::uint64_t depth) {
  if (depth == 0) return 1;
  const BigInt per_layer =
      minkowski_vertex_upper_bound(n_tokens, n_heads, dim) * zaslavsky_regions(d_ff, dim);
  return big_pow(per_layer, depth);
}

std::uint64_t sawtooth_teeth(std::uint64_t dim, std::uint64_t d_ff) {
  if (dim == 0) throw Error("dimension must be positive");
  if (d_ff < 2 * dim) throw Error("FFN too narrow for construction");
  return d_ff / (2 * dim);
}

BigInt region_lower_bound(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                          std::uint64_t depth) {
  const std::uint64_t w = sawtooth_teeth(dim, d_ff);
  if (depth == 0) return 1;
  const BigInt per_layer = big_pow(BigInt(n_tokens), dim) * big_pow(BigInt(w), dim);
  return big_pow(per_layer, depth);
}

BigInt construction_region_count(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                                 std::uint64_t depth) {
  const std::uint64_t w = sawtooth_teeth(dim, d_ff);
  return big_pow(BigInt(n_tokens) * 2 * w, dim * depth);
}

}  // namespace tropattn
