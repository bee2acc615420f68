#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "tropattn/experiments.hpp"
#include "tropattn/rng.hpp"
#include "tropattn/stability.hpp"

using namespace tropattn;

TEST_CASE("lse potential") {
  CHECK(lse_potential(make_vector({2.5}), 0.3) == 2.5);
  CHECK(lse_potential(make_vector({0, 0}), 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(lse_potential(make_vector({1e308, -1e308}), 1e-3)));
  CHECK_THROWS_AS(lse_potential(make_vector({1}), 0.0), Error);
  CHECK_THROWS_AS(lse_potential(make_vector({1}), -1.0), Error);
  const CounterRng rng(1);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const double tau = std::exp(rng.uniform(i, 0, std::log(1e-3), 0.0));
    std::vector<double> s;
    for (std::uint64_t j = 0; j < 8; ++j) s.push_back(rng.normal(i, 1 + j));
    const double got = lse_potential(to_vector(s), tau);
    CHECK(std::abs(got - static_cast<double>(oracle::naive_lse(s, tau))) <= 1e-13 * std::max(1.0, std::abs(got)));
  }
}

TEST_CASE("softmax gradient") {
  const Vector p = softmax_gradient(make_vector({0, 0}), 4.0);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  CHECK_THROWS_AS(softmax_gradient(make_vector({1}), 0.0), Error);
  const CounterRng rng(2);
  for (std::uint64_t i = 0; i < 100; ++i) {
    Vector s(6);
    for (Eigen::Index j = 0; j < 6; ++j) s[j] = rng.normal(i, static_cast<std::uint64_t>(j));
    const Vector g = softmax_gradient(s, 0.3);
    CHECK(std::abs(g.sum() - 1.0) <= 1e-12);
    for (Eigen::Index k = 0; k < 6; ++k) {
      const double fd = oracle::central_diff([](const Vector& x) { return lse_potential(x, 0.3); }, s, k, 1e-6);
      CHECK(std::abs(fd - g[k]) <= 1e-6);
    }
  }
}

TEST_CASE("hessian spectral norm") {
  CHECK(hessian_spectral_norm(make_vector({3}), 0.5) == 0.0);
  CHECK(hessian_spectral_norm(make_vector({0, 0}), 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  const CounterRng rng(3);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto n = static_cast<Eigen::Index>(2 + rng.bits(i, 0) % 40);
    const double tau = std::exp(rng.uniform(i, 1, std::log(0.05), std::log(2.0)));
    Vector s(n);
    for (Eigen::Index j = 0; j < n; ++j) s[j] = rng.normal(i, 2 + static_cast<std::uint64_t>(j));
    const double got = hessian_spectral_norm(s, tau);
    const double ref = oracle::dense_hessian_norm(s, tau);
    CHECK(got == doctest::Approx(ref).epsilon(1e-7));
    CHECK(got <= 1.0 / (2.0 * tau) + 1e-12);
  }
}

TEST_CASE("hessian norm via matrix-free products above 512 scores") {
  const CounterRng rng(4);
  Vector s(700);
  for (Eigen::Index j = 0; j < s.size(); ++j) s[j] = 0.3 * rng.normal(static_cast<std::uint64_t>(j));
  const double got = hessian_spectral_norm(s, 0.2);
  CHECK(got == doctest::Approx(oracle::dense_hessian_norm(s, 0.2)).epsilon(1e-7));
  const Vector x = Vector::LinSpaced(700, -1, 1);
  const Vector p = softmax_gradient(s, 0.2);
  const Vector ref = (p.cwiseProduct(x) - p * p.dot(x)) / 0.2;
  CHECK((hessian_apply(s, 0.2, x) - ref).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("hessian power iteration is not fooled by the all-ones kernel") {
  // The constant vector spans the kernel of diag(p) - p p^T; a start vector
  // inside it would report zero curvature.
  const Vector s = make_vector({1.0, 0.2, -0.5, 0.7});
  CHECK(hessian_spectral_norm(s, 0.4) == doctest::Approx(oracle::dense_hessian_norm(s, 0.4)).epsilon(1e-9));
}

TEST_CASE("margin and worked example") {
  std::size_t arg = 9;
  CHECK(score_margin(make_vector({0.1, 2.0, 1.5}), &arg) == doctest::Approx(0.5));
  CHECK(arg == 1);
  CHECK(score_margin(make_vector({4.0})) == INFINITY);

  Vector s = Vector::Zero(512);
  s[0] = 2.0;
  const auto r = certify(s, 0.125);
  CHECK(r.delta == 2.0);
  CHECK(r.in_stable_region);
  CHECK(r.value_bound == doctest::Approx(7.18e-6).epsilon(0.02));
  CHECK(r.grad_bound == doctest::Approx(1.15e-4).epsilon(0.02));
  CHECK(r.hess_bound == doctest::Approx(4.6e-4).epsilon(0.02));
  CHECK(r.bounds_hold());
}

TEST_CASE("two scores: value gap equals its bound") {
  for (double delta : {0.01, 0.3, 2.0})
    for (double tau : {0.05, 1.0}) {
      const auto r = certify(make_vector({delta, 0.0}), tau);
      CHECK(r.value_gap == doctest::Approx(tau * std::log1p(std::exp(-delta / tau))).epsilon(1e-13));
      CHECK(r.value_gap == doctest::Approx(r.value_bound).epsilon(1e-13));
    }
}

TEST_CASE("stated curvature constant fails for two scores; corrected one holds") {
  // delta / tau = 5: lambda = 2 p (1 - p) / tau is about 2 e^{-5} / tau.
  const auto r = certify(make_vector({0.5, 0.0}), 0.1);
  CHECK(r.hess_norm > r.hess_bound);
  CHECK(r.hess_norm <= r.hess_bound_corrected);
  CHECK_FALSE(r.stated_bounds_hold());
  CHECK(r.bounds_hold());
}

TEST_CASE("ties are reported outside the stable region") {
  const auto r = certify(make_vector({1.0, 1.0, 0.0}), 0.5);
  CHECK(r.delta == 0.0);
  CHECK_FALSE(r.in_stable_region);
  CHECK(std::isnan(r.value_bound));
  CHECK(r.bounds_hold());
}

TEST_CASE("underflowing bounds are flagged") {
  const auto r = certify(make_vector({10.0, 0.0, -1.0}), 1e-3);
  CHECK(r.bound_underflow);
  CHECK(r.value_bound == 0.0);
  CHECK(r.value_gap == 0.0);
  CHECK(r.bounds_hold());
}

TEST_CASE("probes outside the stable region are detected") {
  const auto r = certify(make_vector({1.0, 0.0}), 0.2, make_vector({1.0, 0.5}));
  CHECK_FALSE(r.in_stable_region);
  CHECK_THROWS_AS(certify(make_vector({1.0, 0.0}), 0.2, make_vector({1.0})), Error);
}

TEST_CASE("an escaping probe does not excuse the pointwise bounds") {
  const auto r = certify(make_vector({3.0, 1.0, 0.5}), 0.2, make_vector({2.9, 1.05, 0.4}));
  CHECK_FALSE(r.in_stable_region);
  CHECK(r.hess_norm > r.hess_bound);
  CHECK_FALSE(r.stated_bounds_hold());
  CHECK(r.bounds_hold());
}

TEST_CASE("random margin-positive instances satisfy every corrected bound") {
  StabilityParams params;
  std::size_t stated_failures = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto [s, tau] = random_stability_instance(3, k, params);
    const auto r = certify(s, tau, std::nullopt, k);
    CHECK(r.in_stable_region);
    CHECK(r.value_gap >= 0.0);
    CHECK(r.bounds_hold());
    if (!r.stated_bounds_hold()) ++stated_failures;
    CHECK(r.hess_norm <= 1.0 / (2.0 * tau) + 1e-12);
  }
  MESSAGE("instances exceeding the stated curvature constant: " << stated_failures);
}

TEST_CASE("affine residual matches a direct evaluation when it is large enough to resolve") {
  const CounterRng rng(12);
  for (std::uint64_t i = 0; i < 200; ++i) {
    Vector s(5), sp(5);
    for (Eigen::Index j = 0; j < 5; ++j) s[j] = rng.normal(i, static_cast<std::uint64_t>(j));
    for (Eigen::Index j = 0; j < 5; ++j) sp[j] = s[j] + 0.3 * rng.normal(i, 10 + static_cast<std::uint64_t>(j));
    const double tau = 0.7;
    const auto r = certify(s, tau, sp);
    const double direct = std::abs(lse_potential(sp, tau) - lse_potential(s, tau) - softmax_gradient(s, tau).dot(sp - s));
    CHECK(r.affine_residual == doctest::Approx(direct).epsilon(1e-6).scale(1e-12));
  }
}

TEST_CASE("gradient is Lipschitz with the corrected curvature constant inside a shared region") {
  const CounterRng rng(13);
  StabilityParams params;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto [s, tau] = random_stability_instance(21, k, params);
    std::size_t i = 0;
    const double delta = score_margin(s, &i);
    Vector sp = s;
    for (Eigen::Index j = 0; j < s.size(); ++j) sp[j] += 0.05 * delta * rng.normal(k, static_cast<std::uint64_t>(j));
    const auto top = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < s.size(); ++j)
      if (j != top && sp[top] - sp[j] < delta) sp[j] = sp[top] - delta;
    const double lhs = (softmax_gradient(s, tau) - softmax_gradient(sp, tau)).norm();
    const double bound = 2.0 * static_cast<double>(s.size() - 1) * std::exp(-delta / tau) / tau * (s - sp).norm();
    CHECK(lhs <= bound * (1 + 1e-9) + 1e-300);
  }
}

TEST_CASE("report serialization") {
  const auto r = certify(make_vector({1.0, 0.2, -0.3}), 0.25);
  const auto j = to_json(r);
  CHECK(j.at("N") == 3);
  CHECK(j.at("bounds_hold") == true);
  const auto header = stability_csv_header();
  const auto row = stability_csv_row(r);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
}
