#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "tropattn/attention.hpp"
#include "tropattn/bounds.hpp"
#include "tropattn/census.hpp"
#include "tropattn/experiments.hpp"
#include "tropattn/network.hpp"
#include "tropattn/rng.hpp"

using namespace tropattn;

namespace {

BlockNetwork identity_net(const Vector& v1, const Vector& b2) {
  const auto d = v1.size();
  BlockLayer layer;
  layer.heads.emplace_back(std::vector<Vector>{Vector::Ones(d)}, std::vector<Vector>{v1});
  layer.residual = true;
  layer.ffn = FeedForward{Matrix::Zero(3, d), Vector::Constant(3, -1.0), Matrix::Zero(d, 3), b2, true};
  return BlockNetwork(d, {layer});
}

BlockNetwork voronoi_net(const std::vector<Vector>& keys) {
  std::vector<Vector> values(keys.size(), Vector::Zero(2));
  BlockLayer layer;
  layer.heads.emplace_back(keys, values);
  layer.residual = true;
  return BlockNetwork(2, {layer});
}

}  // namespace

TEST_CASE("identity network") {
  const Vector v1 = make_vector({0.5, -1}), b2 = make_vector({2, 3});
  const auto net = identity_net(v1, b2);
  const CounterRng rng(1);
  std::set<std::string> sigs;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Vector x = make_vector({rng.normal(i, 0), rng.normal(i, 1)});
    const auto out = forward(x, net, Temperature::zero());
    CHECK((out.y - (x + v1 + b2)).norm() <= 1e-14);
    CHECK_FALSE(out.sig.boundary);
    sigs.insert(out.sig.key());
  }
  CHECK(sigs.size() == 1);
  const auto census = monte_carlo_census(net, Box::cube(2, -4, 4), 5000, 9);
  CHECK(census.n_distinct == 1);
  CHECK(census.n_boundary_discarded == 0);
}

TEST_CASE("network validation and dimension checks") {
  const auto net = identity_net(make_vector({0, 0}), make_vector({0, 0}));
  CHECK_THROWS_AS(forward(make_vector({1, 2, 3}), net, Temperature::zero()), Error);
  BlockLayer bad;
  CHECK_THROWS_AS(BlockNetwork(2, {bad}), Error);
  BlockLayer wrong;
  wrong.heads.emplace_back(std::vector<Vector>{make_vector({1, 0})}, std::vector<Vector>{make_vector({1, 0, 0})});
  CHECK_THROWS_AS(BlockNetwork(2, {wrong}), Error);
}

TEST_CASE("census of a three-key head is bounded by the nonempty cells") {
  const std::vector<Vector> keys{make_vector({1, 0.2}), make_vector({-0.7, 1}), make_vector({-0.3, -1.1})};
  const auto net = voronoi_net(keys);
  const auto census = monte_carlo_census(net, Box::cube(2, -4, 4), 20000, 5);
  const auto cells = empty_cell_census(keys, std::vector<double>(3, 0.0), 20000, 5);
  CHECK(census.n_distinct <= cells.size());
  CHECK(census.n_distinct == 3);
  CHECK(census.n_distinct <= census.n_samples - census.n_boundary_discarded);
}

TEST_CASE("census determinism, thread independence and prefix monotonicity") {
  const auto net = random_block_network(77, 2, 2, 8, 4, 2);
  const Box box = Box::cube(2, -4, 4);
  const auto a = monte_carlo_census(net, box, 50000, 123, 1);
  const auto b = monte_carlo_census(net, box, 50000, 123, 3);
  CHECK(a.n_distinct == b.n_distinct);
  CHECK(a.n_boundary_discarded == b.n_boundary_discarded);
  std::uint64_t prev = 0;
  for (std::uint64_t n : {100, 1000, 10000, 50000}) {
    const auto r = monte_carlo_census(net, box, n, 123, 2);
    CHECK(r.n_distinct >= prev);
    prev = r.n_distinct;
  }
  CHECK(prev == a.n_distinct);
}

TEST_CASE("random networks are piecewise affine away from boundaries") {
  const auto net = random_block_network(5, 2, 2, 8, 4, 2);
  const CounterRng rng(6);
  int probed = 0;
  for (std::uint64_t i = 0; i < 50 && probed < 10; ++i) {
    const Vector x = make_vector({rng.uniform(i, 0, -3, 3), rng.uniform(i, 1, -3, 3)});
    const auto base = forward(x, net, Temperature::zero());
    // Keep only centres whose 1e-4 ball stays in one region.
    bool stable = !base.sig.boundary;
    for (std::uint64_t k = 0; k < 16 && stable; ++k) {
      const Vector y = x + 1e-4 * make_vector({rng.uniform(i, 10 + 2 * k, -1, 1), rng.uniform(i, 11 + 2 * k, -1, 1)});
      stable = forward(y, net, Temperature::zero()).sig == base.sig;
    }
    if (!stable) continue;
    ++probed;
    auto jacobian = [&](const Vector& p) {
      Matrix J(2, 2);
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < 2; ++k) {
        Vector up = p, down = p;
        up[k] += h;
        down[k] -= h;
        J.col(k) = (forward(up, net, Temperature::zero()).y - forward(down, net, Temperature::zero()).y) / (2 * h);
      }
      return J;
    };
    const Matrix J0 = jacobian(x);
    for (std::uint64_t k = 0; k < 10; ++k) {
      const Vector y = x + 5e-5 * make_vector({rng.uniform(i, 100 + 2 * k, -1, 1), rng.uniform(i, 101 + 2 * k, -1, 1)});
      CHECK((jacobian(y) - J0).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, J0.cwiseAbs().maxCoeff()));
    }
  }
  CHECK(probed == 10);
}

TEST_CASE("finite temperature forward records dominance") {
  const std::vector<Vector> keys{make_vector({1, 0}), make_vector({-1, 0})};
  const auto net = voronoi_net(keys);
  const auto sharp = forward(make_vector({1, 0}), net, Temperature(0.1));
  CHECK(sharp.sig.layers[0].routing[0] == 0);
  CHECK(sharp.sig.layers[0].dominant[0]);
  const auto flat = forward(make_vector({1e-3, 0}), net, Temperature(100.0));
  CHECK(flat.sig.layers[0].routing[0] == 0);
  CHECK(flat.sig.layers[0].dominant[0]);  // 0.5 + tiny
  const auto tie = forward(make_vector({0, 1}), net, Temperature::zero());
  CHECK(tie.sig.boundary);
}

TEST_CASE("sawtooth values and slopes") {
  CHECK(sawtooth(0.0, 1) == 0.0);
  CHECK(sawtooth(0.5, 1) == 1.0);
  CHECK(std::abs(sawtooth(1.0, 1)) <= 1e-15);
  CHECK(sawtooth(0.25, 1) == 0.5);
  for (std::uint64_t w : {1, 2, 3, 5}) {
    const double tw = 2.0 * static_cast<double>(w);
    for (std::uint64_t k = 0; k <= 2 * w; ++k)
      CHECK(std::abs(sawtooth(static_cast<double>(k) / tw, w) - static_cast<double>(k % 2)) <= 1e-12);
    for (std::uint64_t k = 0; k < 2 * w; ++k) {
      const double mid = (static_cast<double>(k) + 0.5) / tw, h = 1e-3 / tw;
      const double slope = (sawtooth(mid + h, w) - sawtooth(mid - h, w)) / (2 * h);
      CHECK(std::abs(slope - (k % 2 == 0 ? tw : -tw)) <= 1e-8 * tw);
    }
  }
  CHECK_THROWS_AS(sawtooth(0.5, 0), Error);
}

TEST_CASE("lower-bound network structure") {
  const auto net = build_lower_bound_net(2, 1, 2, 1);
  REQUIRE(net.depth() == 1);
  CHECK(net.layers()[0].heads.size() == 1);
  // Voronoi walls at j / N and the hand-computed trace at x = 0.3:
  // routed to p = 0.25, u = 0.3 - 0.25 = 0.05, s(2 * 0.05 + 0.5) = s(0.6) = 0.8.
  const auto r = forward(make_vector({0.3}), net, Temperature::zero());
  CHECK(r.sig.layers[0].routing[0] == 0);
  CHECK(r.y[0] == doctest::Approx(0.8));
  CHECK(forward(make_vector({0.5}), net, Temperature::zero()).sig.boundary);
  CHECK(forward(make_vector({0.75}), net, Temperature::zero()).sig.boundary);
  // Each of the four pieces maps onto [0, 1] with slope magnitude 2wN.
  for (double lo : {0.0, 0.25, 0.5, 0.75}) {
    const double a = forward(make_vector({lo + 1e-9}), net, Temperature::zero()).y[0];
    const double b = forward(make_vector({lo + 0.25 - 1e-9}), net, Temperature::zero()).y[0];
    CHECK(std::abs(std::min(a, b)) <= 1e-6);
    CHECK(std::abs(std::max(a, b) - 1.0) <= 1e-6);
    const double m = lo + 0.1;
    const double slope = (forward(make_vector({m + 1e-6}), net, Temperature::zero()).y[0] -
                          forward(make_vector({m - 1e-6}), net, Temperature::zero()).y[0]) / 2e-6;
    CHECK(std::abs(std::abs(slope) - 4.0) <= 1e-6);
  }
  CHECK_THROWS_WITH_AS(build_lower_bound_net(2, 2, 3, 1), "FFN too narrow for construction", Error);
}

TEST_CASE("lower-bound block is surjective on the unit cube") {
  for (auto [N, d, dff] : std::vector<std::tuple<int, int, int>>{{2, 1, 2}, {3, 1, 4}, {2, 2, 4}}) {
    const auto net = build_lower_bound_net(N, d, dff, 1);
    const int grid = d == 1 ? 4000 : 200;
    Vector lo = Vector::Constant(d, INFINITY), hi = Vector::Constant(d, -INFINITY);
    for (int i = 0; i < (d == 1 ? grid : grid * grid); ++i) {
      Vector x(d);
      x[0] = (i % grid + 0.5) / grid;
      if (d == 2) x[1] = (i / grid + 0.5) / grid;
      const Vector y = forward(x, net, Temperature::zero()).y;
      lo = lo.cwiseMin(y);
      hi = hi.cwiseMax(y);
    }
    const double w = static_cast<double>(dff / (2 * d));
    const double slack = 2.0 * w * N / grid;
    CHECK(lo.maxCoeff() <= slack);
    CHECK(hi.minCoeff() >= 1.0 - slack);
  }
}

TEST_CASE("exact piece counts and census against theory") {
  CHECK(count_linear_pieces_1d(build_lower_bound_net(2, 1, 2, 1), 0, 1) == 4);
  CHECK(count_linear_pieces_1d(build_lower_bound_net(3, 1, 2, 1), 0, 1) == 6);
  CHECK(count_linear_pieces_1d(build_lower_bound_net(2, 1, 2, 2), 0, 1) == 16);
  CHECK(count_linear_pieces_1d(build_lower_bound_net(2, 1, 4, 2), 0, 1) == 64);

  auto cmp = census_vs_theory(2, 1, 2, 1, 100000, 1);
  CHECK(cmp.measured == 4);
  CHECK(cmp.oracle == 4);
  CHECK(cmp.construction_count == 4);
  CHECK(cmp.lower == 2);
  CHECK(BigInt(cmp.measured) <= cmp.upper);
  cmp = census_vs_theory(3, 1, 2, 1, 100000, 1);
  CHECK(cmp.measured == 6);
  cmp = census_vs_theory(2, 1, 2, 2, 1000000, 1);
  CHECK(cmp.measured == 16);
  cmp = census_vs_theory(2, 2, 4, 1, 1000000, 1);
  CHECK(cmp.measured == 16);
  CHECK(cmp.oracle == 16);
  CHECK_THROWS_WITH_AS(census_vs_theory(10, 2, 40, 2, 1000, 1),
                       "guard exceeded: exact region count above 10^6", Error);
}

TEST_CASE("1-D piece count agrees with a dense slope scan on random nets") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto net = random_block_network(seed, 1, 2, 4, 3, 2);
    const auto exact = count_linear_pieces_1d(net, -2, 2);
    // Count slope changes on a fine grid; each piece must be wider than the
    // grid step for this to be exact, so compare as a lower bound.
    const int n = 200000;
    std::uint64_t changes = 1;
    double prev_slope = NAN;
    for (int i = 0; i < n; ++i) {
      const double a = -2.0 + 4.0 * i / n, b = -2.0 + 4.0 * (i + 1) / n;
      const double slope = (forward(make_vector({b}), net, Temperature::zero()).y[0] -
                            forward(make_vector({a}), net, Temperature::zero()).y[0]) / (b - a);
      if (!std::isnan(prev_slope) && std::abs(slope - prev_slope) > 1e-7 * std::max(1.0, std::abs(slope))) ++changes;
      prev_slope = slope;
    }
    // A kink inside a grid cell creates two slope changes, so the scan sees
    // between exact and 2 * exact - 1 changes + 1.
    CHECK(changes >= exact);
    CHECK(changes <= 2 * exact);
  }
}

TEST_CASE("network json round trip") {
  const auto net = random_block_network(3, 2, 2, 4, 3, 2);
  const auto j = to_json(net);
  const auto back = network_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  const auto lb = build_lower_bound_net(2, 2, 4, 1);
  CHECK(to_json(network_from_json(to_json(lb))).dump() == to_json(lb).dump());
  const CounterRng rng(4);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Vector x = make_vector({rng.normal(i, 0), rng.normal(i, 1)});
    CHECK(forward(x, back, Temperature::zero()).y == forward(x, net, Temperature::zero()).y);
  }
}
