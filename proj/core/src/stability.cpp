#include "tropattn/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "tropattn/io.hpp"
#include "tropattn/rng.hpp"
#include "tropattn/tropical.hpp"

namespace tropattn {

namespace {

constexpr std::size_t kDenseHessianLimit = 512;
constexpr int kPowerIterationCap = 10000;
constexpr double kPowerIterationTol = 1e-10;

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("temperature must be finite and positive");
}

// Softmax split around the argmax i: p_i = 1 / (1 + A) and q_j = p_j for
// j != i, each computed directly so small masses are not lost to 1 - p_i.
struct SplitSoftmax {
  std::size_t i;
  double tail;   // A = sum_{j != i} exp((s_j - s_i) / tau)
  double p_top;  // p_i
  Vector q;      // q_i = 0
};

SplitSoftmax split_softmax(const Vector& s, double tau) {
  if (s.size() == 0) throw Error("score vector must not be empty");
  Eigen::Index top = 0;
  s.maxCoeff(&top);
  SplitSoftmax out{static_cast<std::size_t>(top), 0.0, 1.0, Vector::Zero(s.size())};
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (j == top) continue;
    out.q[j] = std::exp((s[j] - s[top]) / tau);
    out.tail += out.q[j];
  }
  out.q /= (1.0 + out.tail);
  out.p_top = 1.0 / (1.0 + out.tail);
  return out;
}

// expm1(r) - r without cancellation for small r.
double expm1_minus_id(double r) {
  if (std::abs(r) < 1e-3) {
    const double r2 = r * r;
    return r2 * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r / 120.0)));
  }
  return std::expm1(r) - r;
}

// log1p(x) - x without cancellation for small x.
double log1p_minus_id(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return x2 * (-0.5 + x * (1.0 / 3.0 + x * (-0.25 + x / 5.0)));
  }
  return std::log1p(x) - x;
}

bool within(double measured, double bound) {
  return measured <= bound * (1.0 + 1e-12);
}

}  // namespace

double lse_potential(const Vector& s, double tau) {
  require_tau(tau);
  if (s.size() == 0) throw Error("score vector must not be empty");
  return lse_add({s.data(), static_cast<std::size_t>(s.size())}, Temperature(tau));
}

Vector softmax_gradient(const Vector& s, double tau) {
  require_tau(tau);
  const auto sp = split_softmax(s, tau);
  Vector p = sp.q;
  p[static_cast<Eigen::Index>(sp.i)] = sp.p_top;
  return p;
}

Vector hessian_apply(const Vector& s, double tau, const Vector& x) {
  require_tau(tau);
  if (x.size() != s.size()) throw Error("dimension mismatch");
  const auto sp = split_softmax(s, tau);
  const auto i = static_cast<Eigen::Index>(sp.i);
  // D = <p, x> - x_i = sum_{j != i} q_j (x_j - x_i)
  const Vector rel = x.array() - x[i];
  const double D = sp.q.dot(rel);
  Vector out = sp.q.cwiseProduct(rel.array().matrix() - Vector::Constant(x.size(), D));
  out[i] = -sp.p_top * D;
  return out / tau;
}

double hessian_spectral_norm(const Vector& s, double tau) {
  require_tau(tau);
  const Eigen::Index n = s.size();
  if (n == 0) throw Error("score vector must not be empty");
  if (n == 1) return 0.0;

  Matrix dense;
  if (static_cast<std::size_t>(n) <= kDenseHessianLimit) {
    const auto sp = split_softmax(s, tau);
    const auto i = static_cast<Eigen::Index>(sp.i);
    dense = -sp.q * sp.q.transpose();
    dense.diagonal() += sp.q;
    dense.row(i) = -sp.p_top * sp.q.transpose();
    dense.col(i) = -sp.p_top * sp.q;
    dense(i, i) = sp.p_top * (sp.tail / (1.0 + sp.tail));
    dense /= tau;
  }
  auto apply = [&](const Vector& v) -> Vector {
    return dense.size() ? Vector(dense * v) : hessian_apply(s, tau, v);
  };

  // The all-ones direction spans the kernel, so start from a ramp with its
  // mean removed.
  Vector v(n);
  for (Eigen::Index j = 0; j < n; ++j) v[j] = static_cast<double>(j + 1) / static_cast<double>(n);
  v.array() -= v.mean();
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < kPowerIterationCap; ++it) {
    Vector w = apply(v);
    const double next = v.dot(w);
    const double norm = w.norm();
    if (!(norm > 0.0)) return std::max(0.0, next);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= kPowerIterationTol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Rayleigh quotient of the final iterate.
  return std::max(lambda, v.dot(apply(v)));
}

double score_margin(const Vector& s, std::size_t* argmax) {
  if (s.size() == 0) throw Error("score vector must not be empty");
  Eigen::Index top = 0;
  s.maxCoeff(&top);
  if (argmax) *argmax = static_cast<std::size_t>(top);
  double second = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (j != top) second = std::max(second, s[j]);
  return s[top] - second;
}

// Value, gradient and curvature are evaluated at s itself, which always lies
// in its own stable region; only the affine check depends on the probe.
bool StabilityReport::bounds_hold() const {
  if (!(delta > 0.0)) return true;  // no strict argmax, nothing to certify
  return within(value_gap, value_bound) && within(grad_l1_gap, grad_bound) &&
         within(hess_norm, hess_bound_corrected) &&
         (!in_stable_region || within(affine_residual, affine_bound_corrected));
}

bool StabilityReport::stated_bounds_hold() const {
  if (!(delta > 0.0)) return true;
  return within(value_gap, value_bound) && within(grad_l1_gap, grad_bound) &&
         within(hess_norm, hess_bound) &&
         (!in_stable_region || within(affine_residual, affine_bound));
}

StabilityReport certify(const Vector& s, double tau, std::optional<Vector> probe,
                        std::uint64_t probe_seed) {
  require_tau(tau);
  StabilityReport r;
  r.n = static_cast<std::size_t>(s.size());
  r.tau = tau;
  r.delta = score_margin(s, &r.argmax);
  const auto i = static_cast<Eigen::Index>(r.argmax);

  const auto sp = split_softmax(s, tau);
  r.value_gap = tau * std::log1p(sp.tail);
  r.grad_l1_gap = 2.0 * sp.q.sum();
  r.hess_norm = hessian_spectral_norm(s, tau);

  if (!probe) {
    const CounterRng rng(probe_seed);
    Vector u(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j) u[j] = rng.normal(static_cast<std::uint64_t>(j));
    if (u.norm() > 0.0) u.normalize();
    Vector sp2 = s + 0.1 * u;
    if (r.delta > 0.0) {
      for (Eigen::Index j = 0; j < s.size(); ++j)
        if (j != i && sp2[i] - sp2[j] < r.delta) sp2[j] = sp2[i] - r.delta;
    }
    probe = std::move(sp2);
  }
  const Vector& s2 = *probe;
  if (s2.size() != s.size()) throw Error("probe has the wrong dimension");
  r.probe_distance = (s2 - s).norm();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!(r.delta > 0.0)) {
    r.value_bound = r.grad_bound = r.hess_bound = r.affine_bound = nan;
    r.hess_bound_corrected = r.affine_bound_corrected = nan;
    r.affine_residual = std::abs(lse_potential(s2, tau) - lse_potential(s, tau) -
                                 softmax_gradient(s, tau).dot(s2 - s));
    return r;
  }

  double probe_margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (j != i) probe_margin = std::min(probe_margin, s2[i] - s2[j]);
  const double slack = 1e-12 * std::max({1.0, std::abs(s[i]), std::abs(s2[i])});
  r.in_stable_region = probe_margin >= r.delta - slack;

  const double others = static_cast<double>(r.n - 1);
  const double decay = std::isinf(r.delta) ? 0.0 : std::exp(-r.delta / tau);
  r.bound_underflow = decay == 0.0 && !std::isinf(r.delta);
  r.value_bound = tau * std::log1p(others * decay);
  r.grad_bound = 2.0 * others * decay;
  r.hess_bound = others * decay / tau;
  r.affine_bound = others * decay * (s - s2).squaredNorm() / (2.0 * tau);
  r.hess_bound_corrected = 2.0 * r.hess_bound;
  r.affine_bound_corrected = 2.0 * r.affine_bound;

  // |P(s') - P(s) - <grad P(s), s' - s>| = tau |log1p(X) - sum q_j r_j|,
  // X = sum q_j expm1(r_j), r_j = ((s'_j - s_j) - (s'_i - s_i)) / tau.
  const double di = s2[i] - s[i];
  double x_sum = 0.0, curvature = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (j == i) continue;
    const double rj = ((s2[j] - s[j]) - di) / tau;
    if (std::abs(rj) < 1.0) {
      x_sum += sp.q[j] * std::expm1(rj);
      curvature += sp.q[j] * expm1_minus_id(rj);
    } else {
      // q_j e^{r_j} may overflow as a product; form it from the exponents.
      const double a = (s[j] - s[i]) / tau;
      const double moved = std::exp(a + rj) / (1.0 + sp.tail);
      x_sum += moved - sp.q[j];
      curvature += moved - sp.q[j] * (1.0 + rj);
    }
  }
  r.affine_residual = tau * std::abs(curvature + log1p_minus_id(x_sum));
  return r;
}

nlohmann::json to_json(const StabilityReport& r) {
  return {{"N", r.n},
          {"tau", r.tau},
          {"argmax", r.argmax},
          {"delta", r.delta},
          {"value_gap", r.value_gap},
          {"value_bound", r.value_bound},
          {"grad_l1_gap", r.grad_l1_gap},
          {"grad_bound", r.grad_bound},
          {"hess_norm", r.hess_norm},
          {"hess_bound", r.hess_bound},
          {"affine_residual", r.affine_residual},
          {"affine_bound", r.affine_bound},
          {"hess_bound_corrected", r.hess_bound_corrected},
          {"affine_bound_corrected", r.affine_bound_corrected},
          {"probe_distance", r.probe_distance},
          {"in_stable_region", r.in_stable_region},
          {"bound_underflow", r.bound_underflow},
          {"bounds_hold", r.bounds_hold()},
          {"stated_bounds_hold", r.stated_bounds_hold()}};
}

std::string stability_csv_header() {
  return "N,tau,argmax,delta,value_gap,value_bound,grad_l1_gap,grad_bound,hess_norm,hess_bound,"
         "affine_residual,affine_bound,hess_bound_corrected,affine_bound_corrected,probe_distance,"
         "in_stable_region,bound_underflow,bounds_hold,stated_bounds_hold";
}

std::string stability_csv_row(const StabilityReport& r) {
  return csv_join({std::to_string(r.n), format_number(r.tau), std::to_string(r.argmax),
                   format_number(r.delta), format_number(r.value_gap),
                   format_number(r.value_bound), format_number(r.grad_l1_gap),
                   format_number(r.grad_bound), format_number(r.hess_norm),
                   format_number(r.hess_bound), format_number(r.affine_residual),
                   format_number(r.affine_bound), format_number(r.hess_bound_corrected),
                   format_number(r.affine_bound_corrected), format_number(r.probe_distance),
                   r.in_stable_region ? "1" : "0", r.bound_underflow ? "1" : "0",
                   r.bounds_hold() ? "1" : "0", r.stated_bounds_hold() ? "1" : "0"});
}

}  // namespace tropattn
