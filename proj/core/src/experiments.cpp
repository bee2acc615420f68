#include "tropattn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "parallel.hpp"
#include "tropattn/attention.hpp"
#include "tropattn/bounds.hpp"
#include "tropattn/io.hpp"
#include "tropattn/polytope.hpp"
#include "tropattn/rng.hpp"

namespace tropattn {

Experiment parse_experiment(const std::string& name) {
  static const std::map<std::string, Experiment> table{
      {"field", Experiment::kField},
      {"minkowski_scaling", Experiment::kMinkowskiScaling},
      {"minkowski-scaling", Experiment::kMinkowskiScaling},
      {"region_scaling", Experiment::kRegionScaling},
      {"region-scaling", Experiment::kRegionScaling},
      {"stability", Experiment::kStability},
      {"lower_bound_verify", Experiment::kLowerBoundVerify},
      {"lower-bound-verify", Experiment::kLowerBoundVerify}};
  auto it = table.find(name);
  if (it == table.end()) throw Error("unknown experiment '" + name + "'");
  return it->second;
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::kField: return "field";
    case Experiment::kMinkowskiScaling: return "minkowski_scaling";
    case Experiment::kRegionScaling: return "region_scaling";
    case Experiment::kStability: return "stability";
    case Experiment::kLowerBoundVerify: return "lower_bound_verify";
  }
  return "unknown";
}

std::uint64_t default_seed(Experiment e) {
  switch (e) {
    case Experiment::kField: return 42;
    case Experiment::kMinkowskiScaling: return 7;
    case Experiment::kRegionScaling: return 1337;
    case Experiment::kStability: return 3;
    case Experiment::kLowerBoundVerify: return 2024;
  }
  return 0;
}

namespace {

std::string csv_document(const std::string& schema, const std::string& header,
                         const std::vector<std::string>& rows) {
  std::string out = csv_schema_line(schema) + "\n" + header + "\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

const std::vector<Vector>& default_palette() {
  static const std::vector<Vector> palette{
      make_vector({0.894, 0.102, 0.110}), make_vector({0.216, 0.494, 0.722}),
      make_vector({0.302, 0.686, 0.290}), make_vector({0.596, 0.306, 0.639}),
      make_vector({1.000, 0.498, 0.000}), make_vector({0.651, 0.337, 0.157}),
      make_vector({0.969, 0.506, 0.749}), make_vector({0.600, 0.600, 0.600})};
  return palette;
}

unsigned char to_byte(double x) {
  return static_cast<unsigned char>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
}

}  // namespace

// ---------------------------------------------------------------------------

FieldResult run_field(const FieldParams& params, const RunContext& ctx) {
  if (params.grid < 16) throw Error("field grid must be at least 16");
  if (params.box.dim() != 2) throw Error("field box must be two-dimensional");

  FieldResult result;
  if (params.keys) {
    result.keys = *params.keys;
  } else {
    const CounterRng rng(ctx.seed);
    for (std::uint64_t j = 0; j < 5; ++j)
      result.keys.push_back(make_vector({rng.normal(j, 0), rng.normal(j, 1)}));
  }
  if (params.values.empty()) {
    for (std::size_t j = 0; j < result.keys.size(); ++j)
      result.values.push_back(default_palette()[j % default_palette().size()]);
  } else {
    result.values = params.values;
  }
  const HeadData head(result.keys, result.values);
  if (head.key_dim() != 2) throw Error("field keys must be two-dimensional");

  const std::size_t g = params.grid;
  const std::size_t cells = g * g;
  auto query = [&](std::size_t ix, std::size_t iy) {
    const double hx = (params.box.hi[0] - params.box.lo[0]) / static_cast<double>(g);
    const double hy = (params.box.hi[1] - params.box.lo[1]) / static_cast<double>(g);
    return make_vector({params.box.lo[0] + (static_cast<double>(ix) + 0.5) * hx,
                        params.box.lo[1] + (static_cast<double>(iy) + 0.5) * hy});
  };

  std::vector<std::uint32_t> winners(cells);
  std::vector<unsigned char> ties(cells, 0);
  detail::parallel_for(g, ctx.threads, [&](std::size_t iy) {
    for (std::size_t ix = 0; ix < g; ++ix) {
      const auto r = hard_routing(query(ix, iy), head);
      winners[iy * g + ix] = static_cast<std::uint32_t>(r.winner);
      ties[iy * g + ix] = r.is_tie() ? 1 : 0;
    }
  });
  result.distinct_zero_winners = std::set<std::uint32_t>(winners.begin(), winners.end()).size();
  result.tie_cells = static_cast<std::size_t>(std::count(ties.begin(), ties.end(), 1));

  if (params.write_grids) {
    std::vector<std::string> rows;
    rows.reserve(cells);
    std::string pgm = "P5\n" + std::to_string(g) + " " + std::to_string(g) + "\n255\n";
    const double scale = head.size() > 1 ? 255.0 / static_cast<double>(head.size() - 1) : 0.0;
    for (std::size_t iy = 0; iy < g; ++iy)
      for (std::size_t ix = 0; ix < g; ++ix) {
        const Vector q = query(ix, iy);
        rows.push_back(csv_join({std::to_string(ix), std::to_string(iy), format_number(q[0]),
                                 format_number(q[1]), std::to_string(winners[iy * g + ix]),
                                 std::to_string(ties[iy * g + ix])}));
      }
    for (std::size_t row = 0; row < g; ++row)
      for (std::size_t ix = 0; ix < g; ++ix)
        pgm.push_back(static_cast<char>(
            std::lround(scale * winners[(g - 1 - row) * g + ix])));
    write_text_file(ctx.out_dir / "winner_map.csv",
                    csv_document("tropattn.field.winners/1", "ix,iy,qx,qy,winner,tie", rows));
    write_text_file(ctx.out_dir / "winner_map.pgm", pgm);
  }

  for (double tau : params.taus) {
    const Temperature temp(tau);
    std::vector<Vector> rgb(cells);
    std::vector<std::uint32_t> dominant(cells);
    detail::parallel_for(g, ctx.threads, [&](std::size_t iy) {
      for (std::size_t ix = 0; ix < g; ++ix) {
        const Vector q = query(ix, iy);
        const Vector w = attention_weights(q, head, temp);
        Eigen::Index arg = 0;
        w.maxCoeff(&arg);
        rgb[iy * g + ix] = head.values().transpose() * w;
        dominant[iy * g + ix] = static_cast<std::uint32_t>(arg);
      }
    });
    FieldTauSummary summary{tau, cells, 0, 0};
    for (std::size_t c = 0; c < cells; ++c) {
      if ((rgb[c] - head.value(winners[c])).cwiseAbs().maxCoeff() <= 1e-2) ++summary.matching_cells;
    }
    summary.distinct_dominant_winners =
        std::set<std::uint32_t>(dominant.begin(), dominant.end()).size();
    result.per_tau.push_back(summary);

    if (params.write_grids) {
      std::vector<std::string> rows;
      rows.reserve(cells);
      std::string ppm = "P6\n" + std::to_string(g) + " " + std::to_string(g) + "\n255\n";
      for (std::size_t iy = 0; iy < g; ++iy)
        for (std::size_t ix = 0; ix < g; ++ix) {
          const Vector q = query(ix, iy);
          const Vector& c = rgb[iy * g + ix];
          rows.push_back(csv_join({std::to_string(ix), std::to_string(iy), format_number(q[0]),
                                   format_number(q[1]), format_number(c[0]), format_number(c[1]),
                                   format_number(c[2]), std::to_string(dominant[iy * g + ix])}));
        }
      for (std::size_t row = 0; row < g; ++row)
        for (std::size_t ix = 0; ix < g; ++ix) {
          const Vector& c = rgb[(g - 1 - row) * g + ix];
          for (Eigen::Index k = 0; k < 3; ++k)
            ppm.push_back(static_cast<char>(k < c.size() ? to_byte(c[k]) : 0));
        }
      const std::string stem = "field_tau_" + format_number(tau);
      write_text_file(ctx.out_dir / (stem + ".csv"),
                      csv_document("tropattn.field/1", "ix,iy,qx,qy,r,g,b,dominant", rows));
      write_text_file(ctx.out_dir / (stem + ".ppm"), ppm);
    }
  }

  if (ctx.format == OutputFormat::kJson) {
    nlohmann::json j;
    j["seed"] = ctx.seed;
    j["grid"] = g;
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& k : result.keys) keys.push_back(to_std(k));
    j["keys"] = keys;
    j["distinct_zero_winners"] = result.distinct_zero_winners;
    j["tie_cells"] = result.tie_cells;
    for (const auto& s : result.per_tau)
      j["per_tau"].push_back({{"tau", s.tau},
                              {"cells", s.cells},
                              {"matching_cells", s.matching_cells},
                              {"match_fraction", s.match_fraction()},
                              {"distinct_dominant_winners", s.distinct_dominant_winners}});
    write_json(ctx.out_dir / "field_summary.json", j);
  } else {
    std::vector<std::string> rows;
    for (const auto& s : result.per_tau)
      rows.push_back(csv_join({format_number(s.tau), std::to_string(s.cells),
                               std::to_string(s.matching_cells), format_number(s.match_fraction()),
                               std::to_string(s.distinct_dominant_winners)}));
    write_text_file(ctx.out_dir / "field_summary.csv",
                    csv_document("tropattn.field.summary/1",
                                 "tau,cells,matching_cells,match_fraction,distinct_dominant_winners",
                                 rows));
  }
  return result;
}

// ---------------------------------------------------------------------------

double MinkowskiCell::mean() const {
  if (counts.empty()) return 0.0;
  return static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0})) /
         static_cast<double>(counts.size());
}

std::size_t MinkowskiCell::max() const {
  return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

const MinkowskiCell& MinkowskiResult::cell(std::uint64_t n_heads, std::uint64_t n_tokens) const {
  for (const auto& c : cells)
    if (c.n_heads == n_heads && c.n_tokens == n_tokens) return c;
  throw Error("no such (H, N) cell");
}

std::vector<std::vector<Vector>> minkowski_trial_points(std::uint64_t seed, std::uint64_t dim,
                                                        std::uint64_t n_heads,
                                                        std::uint64_t n_tokens,
                                                        std::uint64_t trial) {
  // Head h's cloud depends on (seed, N, trial, h) only, so the H-head
  // instance extends the (H-1)-head one.
  const CounterRng rng = CounterRng(seed).split(n_tokens).split(trial);
  std::vector<std::vector<Vector>> out(n_heads);
  for (std::uint64_t h = 0; h < n_heads; ++h)
    for (std::uint64_t j = 0; j < n_tokens; ++j) {
      Vector p(static_cast<Eigen::Index>(dim));
      for (std::uint64_t a = 0; a < dim; ++a) p[static_cast<Eigen::Index>(a)] = rng.normal(h * n_tokens + j, a);
      out[h].push_back(std::move(p));
    }
  return out;
}

MinkowskiResult run_minkowski_scaling(const MinkowskiParams& params, const RunContext& ctx) {
  if (params.trials == 0) throw Error("minkowski scaling needs at least one trial");
  MinkowskiResult result;
  std::vector<std::uint64_t> heads = params.heads, tokens = params.tokens;
  std::sort(heads.begin(), heads.end());
  std::sort(tokens.begin(), tokens.end());
  for (auto H : heads)
    for (auto N : tokens)
      result.cells.push_back({H, N, std::vector<std::size_t>(params.trials, 0),
                              minkowski_vertex_upper_bound(N, H, params.dim)});

  const std::size_t jobs = result.cells.size() * params.trials;
  detail::parallel_for(jobs, ctx.threads, [&](std::size_t job) {
    auto& cell = result.cells[job / params.trials];
    const std::uint64_t trial = job % params.trials;
    const auto clouds =
        minkowski_trial_points(ctx.seed, params.dim, cell.n_heads, cell.n_tokens, trial);
    std::vector<Polytope> parts;
    for (const auto& cloud : clouds)
      parts.push_back(convex_hull(cloud, static_cast<Eigen::Index>(params.dim)));
    cell.counts[trial] = minkowski_sum(parts).num_vertices();
  });

  std::vector<std::string> summary_rows, trial_rows;
  nlohmann::json jcells = nlohmann::json::array();
  for (const auto& c : result.cells) {
    const bool ok = BigInt(c.max()) <= c.bound && (c.n_heads != 1 || c.max() <= c.n_tokens);
    result.bounds_hold = result.bounds_hold && ok;
    summary_rows.push_back(csv_join({std::to_string(c.n_heads), std::to_string(c.n_tokens),
                                     std::to_string(params.dim), std::to_string(params.trials),
                                     format_number(c.mean()), std::to_string(c.max()),
                                     format_number(c.bound), ok ? "1" : "0"}));
    for (std::size_t t = 0; t < c.counts.size(); ++t)
      trial_rows.push_back(csv_join({std::to_string(c.n_heads), std::to_string(c.n_tokens),
                                     std::to_string(t), std::to_string(c.counts[t])}));
    jcells.push_back({{"H", c.n_heads},
                      {"N", c.n_tokens},
                      {"d", params.dim},
                      {"trials", params.trials},
                      {"mean_f0", c.mean()},
                      {"max_f0", c.max()},
                      {"bound", format_number(c.bound)},
                      {"within_bound", ok},
                      {"counts", c.counts}});
  }
  if (ctx.format == OutputFormat::kJson) {
    write_json(ctx.out_dir / "minkowski_scaling.json",
               {{"schema", "tropattn.minkowski/1"}, {"seed", ctx.seed}, {"cells", jcells}});
  } else {
    write_text_file(ctx.out_dir / "minkowski_scaling.csv",
                    csv_document("tropattn.minkowski/1",
                                 "H,N,d,trials,mean_f0,max_f0,bound,within_bound", summary_rows));
    write_text_file(ctx.out_dir / "minkowski_trials.csv",
                    csv_document("tropattn.minkowski.trials/1", "H,N,trial,f0", trial_rows));
  }
  return result;
}

// ---------------------------------------------------------------------------

BlockNetwork random_block_network(std::uint64_t seed, std::uint64_t dim, std::uint64_t n_heads,
                                  std::uint64_t d_ff, std::uint64_t n_tokens, std::uint64_t depth) {
  const auto d = static_cast<Eigen::Index>(dim);
  const auto H = static_cast<Eigen::Index>(n_heads);
  const auto F = static_cast<Eigen::Index>(d_ff);
  const CounterRng root(seed);
  auto gaussian = [](const CounterRng& r, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        m(i, j) = r.normal(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
    return m;
  };

  std::vector<BlockLayer> layers;
  for (std::uint64_t l = 0; l < depth; ++l) {
    const CounterRng lr = root.split(l);
    BlockLayer layer;
    for (std::uint64_t h = 0; h < n_heads; ++h) {
      const CounterRng hr = lr.split(100 + h);
      std::vector<Vector> keys, values;
      for (std::uint64_t j = 0; j < n_tokens; ++j) {
        keys.push_back(gaussian(hr.split(1), static_cast<Eigen::Index>(n_tokens), d).row(static_cast<Eigen::Index>(j)).transpose());
        values.push_back(gaussian(hr.split(2), static_cast<Eigen::Index>(n_tokens), d).row(static_cast<Eigen::Index>(j)).transpose());
      }
      HeadData head(std::move(keys), std::move(values));
      // The query bias makes routing cells a power diagram rather than a fan
      // of cones through the origin.
      head.set_query_map(gaussian(hr.split(0), d, d), Vector(gaussian(hr.split(3), d, 1).col(0)));
      layer.heads.push_back(std::move(head));
    }
    // Fan-in scaling keeps the residual stream O(1) so later layers still cut
    // the sampling box.
    const double fan_o = 1.0 / std::sqrt(static_cast<double>(H * d));
    const double fan_1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double fan_2 = 1.0 / std::sqrt(static_cast<double>(F));
    layer.w_o = fan_o * gaussian(lr.split(1), d, H * d);
    layer.residual = true;
    FeedForward f{fan_1 * gaussian(lr.split(2), F, d), gaussian(lr.split(3), F, 1).col(0),
                  fan_2 * gaussian(lr.split(4), d, F), gaussian(lr.split(5), d, 1).col(0), true};
    layer.ffn = std::move(f);
    layers.push_back(std::move(layer));
  }
  return BlockNetwork(d, std::move(layers));
}

std::uint64_t region_run_seed(std::uint64_t master, std::uint64_t k) {
  return CounterRng(master).split(k).bits(0);
}

double RegionResult::mean_distinct(std::uint64_t depth, std::uint64_t n_tokens) const {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : rows)
    if (r.depth == depth && r.n_tokens == n_tokens) {
      total += static_cast<double>(r.report.n_distinct);
      ++count;
    }
  if (count == 0) throw Error("no such (L, N) cell");
  return total / static_cast<double>(count);
}

double RegionResult::log_log_slope(std::uint64_t depth) const {
  std::vector<double> xs, ys;
  for (auto N : tokens) {
    xs.push_back(std::log(static_cast<double>(N)));
    ys.push_back(std::log(mean_distinct(depth, N)));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

RegionResult run_region_scaling(const RegionParams& params, const RunContext& ctx) {
  if (params.seeds == 0 || params.n_samples == 0) throw Error("region scaling needs seeds and samples");
  RegionResult result;
  result.depths = params.depths;
  result.tokens = params.tokens;
  std::sort(result.depths.begin(), result.depths.end());
  std::sort(result.tokens.begin(), result.tokens.end());
  const Box box = Box::cube(static_cast<Eigen::Index>(params.dim), -params.box_half_width,
                            params.box_half_width);

  for (auto L : result.depths)
    for (auto N : result.tokens)
      for (std::uint64_t k = 0; k < params.seeds; ++k) {
        const std::uint64_t run_seed = region_run_seed(ctx.seed, k);
        const auto net = random_block_network(run_seed, params.dim, params.heads, params.d_ff, N, L);
        result.rows.push_back(
            {L, N, run_seed, monte_carlo_census(net, box, params.n_samples, run_seed, ctx.threads)});
      }

  std::vector<std::string> rows, summary;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    const BigInt upper = region_upper_bound(r.n_tokens, params.heads, params.dim, params.d_ff, r.depth);
    const BigInt lower = params.d_ff >= 2 * params.dim
                             ? region_lower_bound(r.n_tokens, params.dim, params.d_ff, r.depth)
                             : BigInt(0);
    rows.push_back(census_csv_row(r.n_tokens, params.dim, params.heads, params.d_ff, r.depth,
                                  r.report, lower, upper));
    auto j = to_json(r.report);
    j["N"] = r.n_tokens;
    j["L"] = r.depth;
    j["lower"] = format_number(lower);
    j["upper"] = format_number(upper);
    jrows.push_back(j);
  }
  nlohmann::json jsummary = nlohmann::json::array();
  for (auto L : result.depths) {
    for (auto N : result.tokens) {
      summary.push_back(csv_join({std::to_string(L), std::to_string(N),
                                  format_number(result.mean_distinct(L, N)),
                                  format_number(result.log_log_slope(L))}));
      jsummary.push_back({{"L", L},
                          {"N", N},
                          {"mean_distinct", result.mean_distinct(L, N)},
                          {"slope", result.log_log_slope(L)}});
    }
  }
  if (ctx.format == OutputFormat::kJson) {
    write_json(ctx.out_dir / "region_scaling.json", {{"schema", kCensusSchema},
                                                     {"seed", ctx.seed},
                                                     {"d", params.dim},
                                                     {"H", params.heads},
                                                     {"d_ff", params.d_ff},
                                                     {"rows", jrows},
                                                     {"summary", jsummary}});
  } else {
    write_text_file(ctx.out_dir / "region_scaling.csv",
                    csv_document(kCensusSchema, census_csv_header(), rows));
    write_text_file(ctx.out_dir / "region_summary.csv",
                    csv_document("tropattn.census.summary/1", "L,N,mean_distinct,slope", summary));
  }
  return result;
}

// ---------------------------------------------------------------------------

std::pair<Vector, double> random_stability_instance(std::uint64_t seed, std::uint64_t k,
                                                    const StabilityParams& params) {
  if (params.max_tokens < 2) throw Error("max_tokens must be at least 2");
  const CounterRng rng = CounterRng(seed).split(k);
  const std::uint64_t n = 2 + rng.bits(0) % (params.max_tokens - 1);
  const double tau =
      std::exp(std::log(params.tau_min) + rng.uniform(1) * (std::log(params.tau_max) - std::log(params.tau_min)));
  const double spread = 0.5 + 19.5 * rng.uniform(2);
  for (std::uint64_t attempt = 0;; ++attempt) {
    Vector s(static_cast<Eigen::Index>(n));
    for (std::uint64_t j = 0; j < n; ++j)
      s[static_cast<Eigen::Index>(j)] = tau * spread * rng.normal(3 + attempt * n + j);
    if (score_margin(s) > 0.0) return {s, tau};
  }
}

StabilityResult run_stability(const StabilityParams& params, const RunContext& ctx) {
  StabilityResult result;
  if (params.random_count > 0) {
    result.reports.resize(params.random_count);
    detail::parallel_for(params.random_count, ctx.threads, [&](std::size_t k) {
      auto [s, tau] = random_stability_instance(ctx.seed, k, params);
      result.reports[k] = certify(s, tau, std::nullopt, ctx.seed + k);
    });
  } else {
    if (!params.scores) throw Error("stability needs --scores, a scores file, or --random");
    result.reports.push_back(certify(*params.scores, params.tau, params.probe, ctx.seed));
  }
  for (const auto& r : result.reports) {
    if (!r.bounds_hold()) ++result.violations;
    if (!r.stated_bounds_hold()) ++result.stated_violations;
  }

  if (ctx.format == OutputFormat::kJson) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : result.reports) j.push_back(to_json(r));
    write_json(ctx.out_dir / "stability.json",
               {{"schema", "tropattn.stability/1"}, {"violations", result.violations},
                {"stated_violations", result.stated_violations},
                {"reports", j}});
  } else {
    std::vector<std::string> rows;
    for (const auto& r : result.reports) rows.push_back(stability_csv_row(r));
    write_text_file(ctx.out_dir / "stability.csv",
                    csv_document("tropattn.stability/1", stability_csv_header(), rows));
  }
  return result;
}

// ---------------------------------------------------------------------------

LowerBoundResult run_lower_bound_verify(const LowerBoundParams& params, const RunContext& ctx) {
  LowerBoundResult result;
  for (const auto& t : params.tuples) {
    auto cmp = census_vs_theory(t.n_tokens, t.dim, t.d_ff, t.depth, params.n_samples, ctx.seed,
                                ctx.threads);
    if (BigInt(cmp.measured) < cmp.construction_count) result.all_realized = false;
    result.rows.push_back({t, std::move(cmp)});
  }
  std::vector<std::string> rows;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    const auto& c = r.comparison;
    rows.push_back(csv_join({std::to_string(r.tuple.n_tokens), std::to_string(r.tuple.dim),
                             std::to_string(r.tuple.d_ff), std::to_string(r.tuple.depth),
                             std::to_string(c.teeth), std::to_string(c.census.n_samples),
                             std::to_string(c.census.seed), std::to_string(c.measured),
                             format_number(c.construction_count), format_number(c.oracle),
                             format_number(c.lower), format_number(c.upper),
                             std::to_string(c.census.n_boundary_discarded)}));
    jrows.push_back({{"N", r.tuple.n_tokens},
                     {"d", r.tuple.dim},
                     {"d_ff", r.tuple.d_ff},
                     {"L", r.tuple.depth},
                     {"w", c.teeth},
                     {"n", c.census.n_samples},
                     {"seed", c.census.seed},
                     {"measured", c.measured},
                     {"exact", format_number(c.construction_count)},
                     {"oracle", format_number(c.oracle)},
                     {"theorem_lower", format_number(c.lower)},
                     {"upper", format_number(c.upper)},
                     {"n_boundary", c.census.n_boundary_discarded}});
  }
  if (ctx.format == OutputFormat::kJson) {
    write_json(ctx.out_dir / "lower_bound_verify.json",
               {{"schema", "tropattn.lower_bound/1"}, {"all_realized", result.all_realized}, {"rows", jrows}});
  } else {
    write_text_file(
        ctx.out_dir / "lower_bound_verify.csv",
        csv_document("tropattn.lower_bound/1",
                     "N,d,d_ff,L,w,n,seed,measured,exact,oracle,theorem_lower,upper,n_boundary", rows));
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.experiment = parse_experiment(j.at("experiment").get<std::string>());
  c.ctx.seed = j.value("seed", default_seed(c.experiment));
  c.ctx.out_dir = j.value("output_dir", std::string("out"));
  const std::string fmt = j.value("format", std::string("csv"));
  if (fmt != "csv" && fmt != "json") throw Error("format must be csv or json");
  c.ctx.format = fmt == "json" ? OutputFormat::kJson : OutputFormat::kCsv;
  c.ctx.threads = j.value("threads", 1U);
  if (j.contains("params")) c.params = j.at("params");
  return c;
}

FieldParams field_params_from_json(const nlohmann::json& j) {
  FieldParams p;
  if (j.contains("keys")) p.keys = rows_from_json(j.at("keys"));
  if (j.contains("values")) p.values = rows_from_json(j.at("values"));
  maybe(j, "taus", p.taus);
  maybe(j, "grid", p.grid);
  if (j.contains("box")) {
    const auto b = j.at("box").get<std::vector<double>>();
    if (b.size() != 2) throw Error("box must be [lo, hi]");
    p.box = Box::cube(2, b[0], b[1]);
  }
  return p;
}

MinkowskiParams minkowski_params_from_json(const nlohmann::json& j) {
  MinkowskiParams p;
  maybe(j, "dim", p.dim);
  maybe(j, "heads", p.heads);
  maybe(j, "tokens", p.tokens);
  maybe(j, "trials", p.trials);
  return p;
}

RegionParams region_params_from_json(const nlohmann::json& j) {
  RegionParams p;
  maybe(j, "dim", p.dim);
  maybe(j, "heads", p.heads);
  maybe(j, "d_ff", p.d_ff);
  maybe(j, "depths", p.depths);
  maybe(j, "tokens", p.tokens);
  maybe(j, "n_samples", p.n_samples);
  maybe(j, "seeds", p.seeds);
  maybe(j, "box_half_width", p.box_half_width);
  return p;
}

StabilityParams stability_params_from_json(const nlohmann::json& j) {
  StabilityParams p;
  if (j.contains("scores")) p.scores = to_vector(j.at("scores").get<std::vector<double>>());
  if (j.contains("probe")) p.probe = to_vector(j.at("probe").get<std::vector<double>>());
  maybe(j, "tau", p.tau);
  maybe(j, "random_count", p.random_count);
  maybe(j, "max_tokens", p.max_tokens);
  maybe(j, "tau_min", p.tau_min);
  maybe(j, "tau_max", p.tau_max);
  return p;
}

LowerBoundParams lower_bound_params_from_json(const nlohmann::json& j) {
  LowerBoundParams p;
  if (j.contains("tuples")) {
    p.tuples.clear();
    for (const auto& t : j.at("tuples")) {
      const auto v = t.get<std::vector<std::uint64_t>>();
      if (v.size() != 4) throw Error("lower-bound tuples are [N, d, d_ff, L]");
      p.tuples.push_back({v[0], v[1], v[2], v[3]});
    }
  }
  maybe(j, "n_samples", p.n_samples);
  return p;
}

int run_experiment(const ExperimentConfig& config) {
  const auto& ctx = config.ctx;
  switch (config.experiment) {
    case Experiment::kField:
      run_field(field_params_from_json(config.params), ctx);
      return kExitOk;
    case Experiment::kMinkowskiScaling:
      return run_minkowski_scaling(minkowski_params_from_json(config.params), ctx).bounds_hold
                 ? kExitOk
                 : kExitBoundViolation;
    case Experiment::kRegionScaling: {
      const auto params = region_params_from_json(config.params);
      const auto result = run_region_scaling(params, ctx);
      for (const auto& r : result.rows)
        if (BigInt(r.report.n_distinct) >
            region_upper_bound(r.n_tokens, params.heads, params.dim, params.d_ff, r.depth))
          return kExitBoundViolation;
      return kExitOk;
    }
    case Experiment::kStability:
      return run_stability(stability_params_from_json(config.params), ctx).violations == 0
                 ? kExitOk
                 : kExitBoundViolation;
    case Experiment::kLowerBoundVerify:
      return run_lower_bound_verify(lower_bound_params_from_json(config.params), ctx).all_realized
                 ? kExitOk
                 : kExitBoundViolation;
  }
  return kExitUsage;
}

}  // namespace tropattn
