#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tropattn/census.hpp"
#include "tropattn/network.hpp"
#include "tropattn/stability.hpp"
#include "tropattn/types.hpp"

namespace tropattn {

enum class Experiment { kField, kMinkowskiScaling, kRegionScaling, kStability, kLowerBoundVerify };
enum class OutputFormat { kCsv, kJson };

Experiment parse_experiment(const std::string& name);
std::string to_string(Experiment e);
std::uint64_t default_seed(Experiment e);

/// Exit statuses shared by the tool and the experiment runners.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitBoundViolation = 2;

struct RunContext {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  OutputFormat format = OutputFormat::kCsv;
  unsigned threads = 1;
};

// --- dequantization field -------------------------------------------------

struct FieldParams {
  std::optional<std::vector<Vector>> keys;  // default: 5 standard normal keys in R^2
  std::vector<Vector> values;               // RGB in [0,1]; default palette
  std::vector<double> taus{1.0, 0.5, 0.1, 0.001};
  std::size_t grid = 256;
  Box box = Box::cube(2, -4.0, 4.0);
  bool write_grids = true;
};

struct FieldTauSummary {
  double tau;
  std::size_t cells;
  /// Cells whose RGB is within 1e-2 (max norm) of the zero-temperature winner's value.
  std::size_t matching_cells;
  std::size_t distinct_dominant_winners;
  double match_fraction() const { return static_cast<double>(matching_cells) / static_cast<double>(cells); }
};

struct FieldResult {
  std::vector<Vector> keys;
  std::vector<Vector> values;
  std::vector<FieldTauSummary> per_tau;
  std::size_t distinct_zero_winners = 0;
  std::size_t tie_cells = 0;
};

FieldResult run_field(const FieldParams& params, const RunContext& ctx);

// --- Minkowski vertex scaling ----------------------------------------------

struct MinkowskiParams {
  std::uint64_t dim = 4;
  std::vector<std::uint64_t> heads{1, 2, 3};
  std::vector<std::uint64_t> tokens{2, 3, 4, 5, 6, 7};
  std::uint64_t trials = 20;
};

struct MinkowskiCell {
  std::uint64_t n_heads;
  std::uint64_t n_tokens;
  std::vector<std::size_t> counts;  // one per trial
  BigInt bound;
  double mean() const;
  std::size_t max() const;
};

struct MinkowskiResult {
  std::vector<MinkowskiCell> cells;  // sorted by (H, N)
  bool bounds_hold = true;
  const MinkowskiCell& cell(std::uint64_t n_heads, std::uint64_t n_tokens) const;
};

/// Head point sets for one (H, N, trial): H clouds of N standard normal points.
std::vector<std::vector<Vector>> minkowski_trial_points(std::uint64_t seed, std::uint64_t dim,
                                                        std::uint64_t n_heads,
                                                        std::uint64_t n_tokens,
                                                        std::uint64_t trial);

MinkowskiResult run_minkowski_scaling(const MinkowskiParams& params, const RunContext& ctx);

// --- region-count scaling ----------------------------------------------------

struct RegionParams {
  std::uint64_t dim = 2;
  std::uint64_t heads = 2;
  std::uint64_t d_ff = 8;
  std::vector<std::uint64_t> depths{1, 2};
  std::vector<std::uint64_t> tokens{2, 3, 4, 5};
  std::uint64_t n_samples = 2'000'000;
  std::uint64_t seeds = 5;
  double box_half_width = 4.0;
};

struct RegionRow {
  std::uint64_t depth;
  std::uint64_t n_tokens;
  std::uint64_t run_seed;
  CensusReport report;
};

struct RegionResult {
  std::vector<RegionRow> rows;
  double mean_distinct(std::uint64_t depth, std::uint64_t n_tokens) const;
  /// Least-squares slope of log(mean count) against log N for one depth.
  double log_log_slope(std::uint64_t depth) const;
  std::vector<std::uint64_t> depths, tokens;
};

/// Gaussian network whose weights are pure functions of (seed, layer, role,
/// index): deeper nets extend shallower ones and larger N only appends keys.
BlockNetwork random_block_network(std::uint64_t seed, std::uint64_t dim, std::uint64_t n_heads,
                                  std::uint64_t d_ff, std::uint64_t n_tokens, std::uint64_t depth);

std::uint64_t region_run_seed(std::uint64_t master, std::uint64_t k);

RegionResult run_region_scaling(const RegionParams& params, const RunContext& ctx);

// --- stability certification ------------------------------------------------

struct StabilityParams {
  std::optional<Vector> scores;  // single certification
  std::optional<Vector> probe;
  double tau = 0.125;
  std::uint64_t random_count = 0;  // > 0: batch of random margin-positive instances
  std::uint64_t max_tokens = 64;
  double tau_min = 1e-3;
  double tau_max = 1.0;
};

struct StabilityResult {
  std::vector<StabilityReport> reports;
  std::size_t violations = 0;         // against the corrected constants
  std::size_t stated_violations = 0;  // curvature constant without the factor 2
};

/// Random instance k of a batch: N in [2, max_tokens], tau log-uniform in
/// [tau_min, tau_max], scores tau * c * g with g standard normal.
std::pair<Vector, double> random_stability_instance(std::uint64_t seed, std::uint64_t k,
                                                    const StabilityParams& params);

StabilityResult run_stability(const StabilityParams& params, const RunContext& ctx);

// --- lower-bound construction -------------------------------------------------

struct LowerBoundTuple {
  std::uint64_t n_tokens, dim, d_ff, depth;
};

struct LowerBoundParams {
  std::vector<LowerBoundTuple> tuples{{2, 1, 2, 1}, {3, 1, 2, 1}, {2, 1, 2, 2}, {2, 2, 4, 1}};
  std::uint64_t n_samples = 200'000;
};

struct LowerBoundRow {
  LowerBoundTuple tuple;
  TheoryComparison comparison;
};

struct LowerBoundResult {
  std::vector<LowerBoundRow> rows;
  bool all_realized = true;
};

LowerBoundResult run_lower_bound_verify(const LowerBoundParams& params, const RunContext& ctx);

// --- configuration ---------------------------------------------------------------

struct ExperimentConfig {
  Experiment experiment = Experiment::kField;
  RunContext ctx;
  nlohmann::json params = nlohmann::json::object();
};

/// Parses {"experiment": ..., "seed": ..., "output_dir": ..., "format": ...,
/// "threads": ..., "params": {...}}. Missing seed falls back to the
/// experiment default.
ExperimentConfig config_from_json(const nlohmann::json& j);

FieldParams field_params_from_json(const nlohmann::json& j);
MinkowskiParams minkowski_params_from_json(const nlohmann::json& j);
RegionParams region_params_from_json(const nlohmann::json& j);
StabilityParams stability_params_from_json(const nlohmann::json& j);
LowerBoundParams lower_bound_params_from_json(const nlohmann::json& j);

/// Dispatches to the runner; returns kExitOk or kExitBoundViolation.
int run_experiment(const ExperimentConfig& config);

}  // namespace tropattn
