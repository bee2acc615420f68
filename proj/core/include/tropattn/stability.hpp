#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "tropattn/types.hpp"

namespace tropattn {

/// tau log sum_j exp(s_j / tau), overflow free for finite s.
double lse_potential(const Vector& s, double tau);

/// Softmax probabilities, the gradient of lse_potential.
Vector softmax_gradient(const Vector& s, double tau);

/// Largest eigenvalue of (diag(p) - p p^T) / tau by power iteration. Entries
/// are formed relative to the top score so tiny off-argmax masses keep full
/// relative precision. Above 512 scores the product is applied matrix-free.
double hessian_spectral_norm(const Vector& s, double tau);

/// H x for the LSE Hessian at s, without forming H.
Vector hessian_apply(const Vector& s, double tau, const Vector& x);

struct StabilityReport {
  std::size_t n = 0;
  double tau = 0.0;
  std::size_t argmax = 0;
  double delta = 0.0;
  double value_gap = 0.0;
  double value_bound = 0.0;
  double grad_l1_gap = 0.0;
  double grad_bound = 0.0;
  double hess_norm = 0.0;
  double hess_bound = 0.0;
  double affine_residual = 0.0;
  double affine_bound = 0.0;
  // The curvature constant (N-1) e^{-delta/tau} / tau can be exceeded by up
  // to a factor 2: for N = 2 the top eigenvalue is 2 p1 p2 / tau. Gershgorin
  // on diag(p) - p p^T gives 2 (1 - p_i) <= 2 (N-1) e^{-delta/tau}, so the
  // corrected bounds double the stated Hessian and affine constants.
  double hess_bound_corrected = 0.0;
  double affine_bound_corrected = 0.0;
  double probe_distance = 0.0;
  bool in_stable_region = false;
  bool bound_underflow = false;

  /// Every measured quantity is within its bound (vacuously true outside the
  /// stable region), using the corrected curvature constants. Comparisons
  /// allow 1e-12 relative for rounding.
  bool bounds_hold() const;
  /// Same check against the stated constants without the factor 2.
  bool stated_bounds_hold() const;
};

/// Measures the margin of s, evaluates the four LSE quantities against their
/// exponential bounds. Without an explicit probe, s' = s + 0.1 u for a
/// seeded random unit u, pushed back into the stable region of s.
StabilityReport certify(const Vector& s, double tau, std::optional<Vector> probe = std::nullopt,
                        std::uint64_t probe_seed = 0);

/// Argmax margin s_i - max_{j != i} s_j (+inf for a single score).
double score_margin(const Vector& s, std::size_t* argmax = nullptr);

nlohmann::json to_json(const StabilityReport& r);
std::string stability_csv_header();
std::string stability_csv_row(const StabilityReport& r);

}  // namespace tropattn
