#include "tropattn/census.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_set>

#include "tropattn/bounds.hpp"
#include "tropattn/rng.hpp"

namespace tropattn {

namespace {

constexpr std::uint64_t kCensusBatch = 1U << 14;

struct Partial {
  std::unordered_set<std::string> seen;
  std::uint64_t boundary = 0;
};

void census_batch(const BlockNetwork& net, const Box& box, const CounterRng& rng,
                  std::uint64_t begin, std::uint64_t end, Partial& out) {
  const Eigen::Index d = net.dim();
  Vector x(d);
  for (std::uint64_t i = begin; i < end; ++i) {
    for (Eigen::Index a = 0; a < d; ++a)
      x[a] = rng.uniform(i, static_cast<std::uint64_t>(a), box.lo[a], box.hi[a]);
    auto r = forward(x, net, Temperature::zero());
    if (r.sig.boundary) {
      ++out.boundary;
      continue;
    }
    out.seen.insert(r.sig.key());
  }
}

}  // namespace

CensusReport monte_carlo_census(const BlockNetwork& net, const Box& box, std::uint64_t n,
                                std::uint64_t seed, unsigned threads) {
  if (n == 0) throw Error("census needs at least one sample");
  if (box.dim() != net.dim()) throw Error("dimension mismatch");
  const CounterRng rng(seed);
  const std::uint64_t batches = (n + kCensusBatch - 1) / kCensusBatch;
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(batches)));

  std::vector<Partial> partials(threads);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&](unsigned t) {
    for (std::uint64_t b; (b = next.fetch_add(1)) < batches;) {
      census_batch(net, box, rng, b * kCensusBatch, std::min(n, (b + 1) * kCensusBatch),
                   partials[t]);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  // Set union is order independent, so the merged count is deterministic.
  Partial& merged = partials.front();
  for (std::size_t t = 1; t < partials.size(); ++t) {
    merged.seen.merge(partials[t].seen);
    merged.boundary += partials[t].boundary;
  }
  return {n, merged.seen.size(), merged.boundary, seed, box};
}

double sawtooth(double x, std::uint64_t w) {
  if (w == 0) throw Error("sawtooth needs at least one tooth");
  const double tw = 2.0 * static_cast<double>(w);
  double s = tw * std::max(0.0, x);
  for (std::uint64_t m = 1; m < 2 * w; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    s += 2.0 * tw * sign * std::max(0.0, x - static_cast<double>(m) / tw);
  }
  return s;
}

BlockNetwork build_lower_bound_net(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                                   std::uint64_t depth) {
  if (n_tokens == 0) throw Error("sequence length must be positive");
  const std::uint64_t w = sawtooth_teeth(dim, d_ff);
  const auto d = static_cast<Eigen::Index>(dim);
  const double N = static_cast<double>(n_tokens);
  const double tw = 2.0 * static_cast<double>(w);

  // Parabolic lifting: q = (x_h, 1), k_j = (p_j, -p_j^2 / 2), so the argmax
  // is the nearest p_j and the walls sit at j / N.
  std::vector<Vector> keys, values;
  for (std::uint64_t j = 1; j <= n_tokens; ++j) {
    const double p = (static_cast<double>(j) - 0.5) / N;
    keys.push_back(make_vector({p, -0.5 * p * p}));
    values.push_back(make_vector({-p}));
  }

  BlockLayer layer;
  for (Eigen::Index h = 0; h < d; ++h) {
    HeadData head(keys, values);
    Matrix w_q = Matrix::Zero(d, 2);
    w_q(h, 0) = 1.0;
    head.set_query_map(std::move(w_q), make_vector({0.0, 1.0}));
    layer.heads.push_back(std::move(head));
  }
  layer.residual = true;

  // Unit (h, m) computes max(0, N u_h + 0.5 - m / 2w); spare units stay off.
  const auto width = static_cast<Eigen::Index>(d_ff);
  FeedForward f{Matrix::Zero(width, d), Vector::Constant(width, -1.0), Matrix::Zero(d, width),
                Vector::Zero(d), false};
  for (Eigen::Index h = 0; h < d; ++h) {
    for (std::uint64_t m = 0; m < 2 * w; ++m) {
      const auto row = h * static_cast<Eigen::Index>(2 * w) + static_cast<Eigen::Index>(m);
      f.w1(row, h) = N;
      f.b1[row] = 0.5 - static_cast<double>(m) / tw;
      f.w2(h, row) = m == 0 ? tw : 2.0 * tw * ((m % 2 == 0) ? 1.0 : -1.0);
    }
  }
  layer.ffn = std::move(f);

  return BlockNetwork(d, std::vector<BlockLayer>(depth, layer));
}

namespace {

// x -> slope * x + offset, restricted to [a, b].
struct Piece {
  double a, b;
  Vector slope;
  Vector offset;
};

// Splits [a, b] where the upper envelope of lines c_j + t * m_j changes its
// winner; calls emit(lo, hi, winner) for each sub-interval.
template <typename Emit>
void envelope_walk(const Vector& intercepts, const Vector& slopes, double a, double b, Emit emit) {
  const Eigen::Index n = intercepts.size();
  auto value = [&](Eigen::Index j, double t) { return intercepts[j] + slopes[j] * t; };
  double t = a;
  while (t < b) {
    // Winner just to the right of t: max value, then max slope.
    Eigen::Index w = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
      const double dv = value(j, t) - value(w, t);
      if (dv > 1e-12 || (std::abs(dv) <= 1e-12 && slopes[j] > slopes[w])) w = j;
    }
    double next = b;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (slopes[j] <= slopes[w]) continue;
      const double cross = (intercepts[w] - intercepts[j]) / (slopes[j] - slopes[w]);
      if (cross > t + 1e-13) next = std::min(next, cross);
    }
    emit(t, next, w);
    t = next;
  }
}

}  // namespace

std::uint64_t count_linear_pieces_1d(const BlockNetwork& net, double lo, double hi) {
  if (net.dim() != 1) throw Error("breakpoint enumeration needs a one-dimensional network");
  if (!(hi > lo)) throw Error("empty interval");
  std::vector<Piece> pieces{{lo, hi, Vector::Ones(1), Vector::Zero(1)}};

  for (const auto& layer : net.layers()) {
    // Attention: split by each head's routing winner, head by head.
    struct Routed {
      Piece piece;
      Vector gathered_slope, gathered_offset;
      Eigen::Index filled;
    };
    Eigen::Index concat = 0;
    for (const auto& h : layer.heads) concat += h.value_dim();
    std::vector<Routed> routed;
    for (const auto& p : pieces) routed.push_back({p, Vector::Zero(concat), Vector::Zero(concat), 0});
    for (const auto& h : layer.heads) {
      std::vector<Routed> next;
      for (const auto& r : routed) {
        // q(x) = project(u(x)) is affine in x: q0 + x q1.
        const Vector q0 = h.project_query(r.piece.offset);
        const Vector q1 = h.project_query(r.piece.offset + r.piece.slope) - q0;
        const Vector c = h.keys() * q0;
        const Vector m = h.keys() * q1;
        envelope_walk(c, m, r.piece.a, r.piece.b, [&](double a, double b, Eigen::Index w) {
          Routed s = r;
          s.piece.a = a;
          s.piece.b = b;
          s.gathered_offset.segment(r.filled, h.value_dim()) = h.value(static_cast<std::size_t>(w));
          s.filled += h.value_dim();
          next.push_back(std::move(s));
        });
      }
      routed = std::move(next);
    }

    std::vector<Piece> after;
    for (auto& r : routed) {
      // Gathered values are constant on the piece.
      Vector u_slope = layer.w_o ? Vector(*layer.w_o * r.gathered_slope) : r.gathered_slope;
      Vector u_off = layer.w_o ? Vector(*layer.w_o * r.gathered_offset) : r.gathered_offset;
      if (layer.residual) {
        u_slope += r.piece.slope;
        u_off += r.piece.offset;
      }
      if (!layer.ffn) {
        after.push_back({r.piece.a, r.piece.b, u_slope, u_off});
        continue;
      }
      const auto& f = *layer.ffn;
      const Vector pre_slope = f.w1 * u_slope;
      const Vector pre_off = f.w1 * u_off + f.b1;
      std::vector<double> cuts{r.piece.a, r.piece.b};
      for (Eigen::Index i = 0; i < pre_slope.size(); ++i) {
        if (pre_slope[i] == 0.0) continue;
        const double z = -pre_off[i] / pre_slope[i];
        if (z > r.piece.a && z < r.piece.b) cuts.push_back(z);
      }
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k], b = cuts[k + 1];
        if (b - a <= 1e-14) continue;
        const double mid = 0.5 * (a + b);
        Vector mask = ((pre_off + mid * pre_slope).array() > 0.0).cast<double>().matrix();
        Vector y_slope = f.w2 * mask.cwiseProduct(pre_slope);
        Vector y_off = f.w2 * mask.cwiseProduct(pre_off) + f.b2;
        if (f.residual) {
          y_slope += u_slope;
          y_off += u_off;
        }
        after.push_back({a, b, y_slope, y_off});
      }
    }
    pieces = std::move(after);
  }

  // Adjacent pieces carrying the same affine map form one maximal region.
  std::uint64_t count = 0;
  const Piece* prev = nullptr;
  for (const auto& p : pieces) {
    if (p.b - p.a <= 1e-14) continue;
    const bool same = prev && (p.slope - prev->slope).cwiseAbs().maxCoeff() <= 1e-9 &&
                      (p.offset - prev->offset).cwiseAbs().maxCoeff() <= 1e-9;
    if (!same) ++count;
    prev = &p;
  }
  return count;
}

TheoryComparison census_vs_theory(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t d_ff,
                                  std::uint64_t depth, std::uint64_t n_samples, std::uint64_t seed,
                                  unsigned threads) {
  const std::uint64_t w = sawtooth_teeth(dim, d_ff);
  const BigInt exact = construction_region_count(n_tokens, dim, d_ff, depth);
  if (exact > BigInt(static_cast<std::uint64_t>(kCensusRegionGuard)))
    throw Error("guard exceeded: exact region count above 10^6");

  const BlockNetwork net = build_lower_bound_net(n_tokens, dim, d_ff, depth);
  TheoryComparison out;
  out.teeth = w;
  out.census = monte_carlo_census(net, Box::cube(static_cast<Eigen::Index>(dim), 0.0, 1.0),
                                  n_samples, seed, threads);
  out.measured = out.census.n_distinct;
  out.construction_count = exact;
  out.lower = region_lower_bound(n_tokens, dim, d_ff, depth);
  out.upper = region_upper_bound(n_tokens, dim, dim, d_ff, depth);
  // The construction acts coordinate-wise, so the d-dimensional count is the
  // d-th power of the one-dimensional one.
  const auto line = build_lower_bound_net(n_tokens, 1, 2 * w, depth);
  out.oracle = big_pow(BigInt(count_linear_pieces_1d(line, 0.0, 1.0)), dim);
  return out;
}

}  // namespace tropattn
