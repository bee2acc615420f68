// tropattn: reproduces the tropical-attention experiments from the command
// line. Every subcommand accepts --config/--seed/--out/--format/--threads;
// flags override the config file, and THREADS overrides the config's thread
// count but not --threads.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tropattn/experiments.hpp"
#include "tropattn/io.hpp"

namespace {

using tropattn::Experiment;
using nlohmann::json;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--format", f.format, "summary format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

// Collects subcommand-specific flags as JSON overrides on "params".
struct Overrides {
  json params = json::object();

  template <typename T>
  void option(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& help) {
    cmd->add_option_function<T>(flag, [this, key](const T& v) { params[key] = v; }, help);
  }
};

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string cell; std::getline(ss, cell, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw CLI::ValidationError("not a number list: " + text);
    }
  }
  return out;
}

std::optional<unsigned> threads_from_env() {
  const char* env = std::getenv("THREADS");
  if (env == nullptr || *env == '\0') return std::nullopt;
  try {
    const long v = std::stol(env);
    if (v >= 1) return static_cast<unsigned>(v);
  } catch (const std::exception&) {
  }
  std::cerr << "warning: ignoring THREADS=" << env << "\n";
  return std::nullopt;
}

tropattn::ExperimentConfig build_config(Experiment e, const CommonFlags& f, const json& overrides) {
  json file = json::object();
  if (!f.config.empty()) {
    file = json::parse(tropattn::read_text_file(f.config));
    if (file.contains("experiment") &&
        tropattn::parse_experiment(file.at("experiment").get<std::string>()) != e)
      throw tropattn::Error("config is for experiment '" + file.at("experiment").get<std::string>() +
                            "', not '" + tropattn::to_string(e) + "'");
  }
  file["experiment"] = tropattn::to_string(e);
  if (!file.contains("params")) file["params"] = json::object();
  file["params"].update(overrides);

  auto config = tropattn::config_from_json(file);
  if (f.seed) config.ctx.seed = *f.seed;
  if (f.out) config.ctx.out_dir = *f.out;
  if (f.format) config.ctx.format = *f.format == "json" ? tropattn::OutputFormat::kJson
                                                        : tropattn::OutputFormat::kCsv;
  if (auto env = threads_from_env()) config.ctx.threads = *env;
  if (f.threads) config.ctx.threads = *f.threads;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tropical geometry of attention: experiment harness"};
  app.require_subcommand(1);

  struct Sub {
    Experiment experiment;
    CLI::App* cmd;
    CommonFlags flags;
    Overrides extra;
  };
  std::vector<Sub> subs;
  subs.reserve(5);
  auto add = [&](Experiment e, const std::string& name, const std::string& help) -> Sub& {
    subs.push_back({e, app.add_subcommand(name, help), {}, {}});
    add_common(subs.back().cmd, subs.back().flags);
    return subs.back();
  };

  {
    auto& s = add(Experiment::kField, "field", "temperature sweep of a five-key head over a 2-D grid");
    s.extra.option<std::size_t>(s.cmd, "--grid", "grid", "grid resolution per axis (>= 16)");
    s.cmd->add_option_function<std::string>(
        "--taus", [&s](const std::string& v) { s.extra.params["taus"] = parse_doubles(v); },
        "comma-separated temperatures");
    s.cmd->add_option_function<std::string>(
        "--box", [&s](const std::string& v) { s.extra.params["box"] = parse_doubles(v); },
        "lo,hi of the square query box");
  }
  {
    auto& s = add(Experiment::kMinkowskiScaling, "minkowski-scaling",
                  "exact vertex counts of multi-head Minkowski sums");
    s.extra.option<std::uint64_t>(s.cmd, "--dim", "dim", "key dimension");
    s.extra.option<std::vector<std::uint64_t>>(s.cmd, "--heads", "heads", "head counts");
    s.extra.option<std::vector<std::uint64_t>>(s.cmd, "--tokens", "tokens", "token counts");
    s.extra.option<std::uint64_t>(s.cmd, "--trials", "trials", "trials per (H, N)");
  }
  {
    auto& s = add(Experiment::kRegionScaling, "region-scaling",
                  "Monte Carlo region census of random attention blocks");
    s.extra.option<std::uint64_t>(s.cmd, "--dim", "dim", "model dimension");
    s.extra.option<std::uint64_t>(s.cmd, "--heads", "heads", "heads per layer");
    s.extra.option<std::uint64_t>(s.cmd, "--d-ff", "d_ff", "FFN width");
    s.extra.option<std::vector<std::uint64_t>>(s.cmd, "--depths", "depths", "depths L");
    s.extra.option<std::vector<std::uint64_t>>(s.cmd, "--tokens", "tokens", "token counts");
    s.extra.option<std::uint64_t>(s.cmd, "--samples", "n_samples", "samples per census");
    s.extra.option<std::uint64_t>(s.cmd, "--seeds", "seeds", "random networks per cell");
  }
  {
    auto& s = add(Experiment::kStability, "stability", "certify softmax stability bounds");
    s.cmd->add_option_function<std::string>(
        "--scores", [&s](const std::string& v) { s.extra.params["scores"] = parse_doubles(v); },
        "comma-separated score vector");
    s.cmd->add_option_function<std::string>(
        "--probe", [&s](const std::string& v) { s.extra.params["probe"] = parse_doubles(v); },
        "comma-separated probe vector");
    s.cmd->add_option_function<std::string>(
        "--scores-file",
        [&s](const std::string& path) {
          const json doc = json::parse(tropattn::read_text_file(path));
          s.extra.params["scores"] = doc.is_array() ? doc : doc.at("scores");
          if (doc.is_object() && doc.contains("tau")) s.extra.params["tau"] = doc.at("tau");
        },
        "JSON file holding a score array or {\"scores\": [...], \"tau\": ...}")
        ->check(CLI::ExistingFile);
    s.extra.option<double>(s.cmd, "--tau", "tau", "temperature");
    s.extra.option<std::uint64_t>(s.cmd, "--random", "random_count", "random instances to certify");
  }
  {
    auto& s = add(Experiment::kLowerBoundVerify, "lower-bound-verify",
                  "census of the constructive lower-bound network");
    s.cmd->add_option_function<std::vector<std::string>>(
        "--tuple",
        [&s](const std::vector<std::string>& vs) {
          json tuples = json::array();
          for (const auto& v : vs) {
            json t = json::array();
            for (double x : parse_doubles(v)) {
              if (x < 1 || x != static_cast<double>(static_cast<std::uint64_t>(x)))
                throw CLI::ValidationError("tuple entries must be positive integers: " + v);
              t.push_back(static_cast<std::uint64_t>(x));
            }
            tuples.push_back(t);
          }
          s.extra.params["tuples"] = tuples;
        },
        "N,d,d_ff,L (repeatable)");
    s.extra.option<std::uint64_t>(s.cmd, "--samples", "n_samples", "census samples per tuple");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? tropattn::kExitOk : tropattn::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tropattn::kExitUsage;
  }

  for (const auto& s : subs) {
    if (!s.cmd->parsed()) continue;
    try {
      const auto config = build_config(s.experiment, s.flags, s.extra.params);
      std::cerr << "running " << tropattn::to_string(config.experiment) << " seed=" << config.ctx.seed
                << " threads=" << config.ctx.threads << " out=" << config.ctx.out_dir.string() << "\n";
      const int status = tropattn::run_experiment(config);
      if (status == tropattn::kExitBoundViolation)
        std::cerr << "bound violation detected; see " << config.ctx.out_dir.string() << "\n";
      else
        std::cerr << "done\n";
      return status;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return tropattn::kExitUsage;
    }
  }
  return tropattn::kExitUsage;
}
