// Command-line front end over the C API.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ame/ame.h"

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct Config {
  std::string input;
  std::optional<std::string> holdout;
  double holdout_frac = 0.1;
  std::string treatment_col;
  std::string outcome_col;
  std::optional<std::string> id_col;
  std::string algorithm = "flame";
  double c = 0.1;
  int flame_iters = 1;
  std::string missing = "drop";
  int impute_count = 1;
  int impute_sweeps = 5;
  bool replacement = false;
  std::optional<int> max_iterations;
  std::optional<std::int64_t> min_unmatched_treated;
  std::optional<std::int64_t> min_unmatched_control;
  std::optional<double> pe_rise;
  std::optional<double> bf_floor;
  double ridge_lambda = 0.1;
  std::string na_token = "NA";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string output_dir = "./out";
};

template <class T>
Json opt_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <class T>
void opt_from(const Json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

Json config_json(const Config& c) {
  return Json{{"input", c.input},
              {"holdout", opt_json(c.holdout)},
              {"holdout_frac", c.holdout_frac},
              {"treatment_col", c.treatment_col},
              {"outcome_col", c.outcome_col},
              {"id_col", opt_json(c.id_col)},
              {"algorithm", c.algorithm},
              {"c", c.c},
              {"flame_iters", c.flame_iters},
              {"missing", c.missing},
              {"impute_count", c.impute_count},
              {"impute_sweeps", c.impute_sweeps},
              {"replacement", c.replacement},
              {"max_iterations", opt_json(c.max_iterations)},
              {"min_unmatched_treated", opt_json(c.min_unmatched_treated)},
              {"min_unmatched_control", opt_json(c.min_unmatched_control)},
              {"pe_rise", opt_json(c.pe_rise)},
              {"bf_floor", opt_json(c.bf_floor)},
              {"ridge_lambda", c.ridge_lambda},
              {"na_token", c.na_token},
              {"seed", c.seed},
              {"threads", c.threads},
              {"output_dir", c.output_dir}};
}

Config config_from_json(const Json& j) {
  Config c;
  c.input = j.at("input").get<std::string>();
  opt_from(j, "holdout", c.holdout);
  c.holdout_frac = j.at("holdout_frac").get<double>();
  c.treatment_col = j.at("treatment_col").get<std::string>();
  c.outcome_col = j.at("outcome_col").get<std::string>();
  opt_from(j, "id_col", c.id_col);
  c.algorithm = j.at("algorithm").get<std::string>();
  c.c = j.at("c").get<double>();
  c.flame_iters = j.at("flame_iters").get<int>();
  c.missing = j.at("missing").get<std::string>();
  c.impute_count = j.at("impute_count").get<int>();
  c.impute_sweeps = j.at("impute_sweeps").get<int>();
  c.replacement = j.at("replacement").get<bool>();
  opt_from(j, "max_iterations", c.max_iterations);
  opt_from(j, "min_unmatched_treated", c.min_unmatched_treated);
  opt_from(j, "min_unmatched_control", c.min_unmatched_control);
  opt_from(j, "pe_rise", c.pe_rise);
  opt_from(j, "bf_floor", c.bf_floor);
  c.ridge_lambda = j.at("ridge_lambda").get<double>();
  c.na_token = j.at("na_token").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.threads = j.at("threads").get<unsigned>();
  c.output_dir = j.at("output_dir").get<std::string>();
  return c;
}

class Failure {
 public:
  Failure(int exit_code, std::string message) : exit_code_(exit_code), message_(std::move(message)) {}
  int exit_code() const { return exit_code_; }
  const std::string& message() const { return message_; }

 private:
  int exit_code_;
  std::string message_;
};

void check(ame_status status) {
  if (status != AME_OK) {
    throw Failure(ame_status_exit_code(status),
                  std::string(ame_status_name(status)) + ": " + ame_last_error_message());
  }
}

// Owning wrappers for the C handles.
template <class T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (ptr != nullptr) Free(ptr);
  }
};
using Table = Handle<ame_table, ame_table_free>;
using Result = Handle<ame_result, ame_result_free>;

ame_options to_options(const Config& c) {
  ame_options o;
  ame_options_init(&o);
  if (c.algorithm == "flame") {
    o.algorithm = AME_FLAME;
  } else if (c.algorithm == "dame") {
    o.algorithm = AME_DAME;
  } else {
    o.algorithm = AME_HYBRID;
  }
  o.c = c.c;
  o.flame_iterations_before_dame = c.flame_iters;
  o.with_replacement = c.replacement ? 1 : 0;
  if (c.max_iterations) o.max_iterations = *c.max_iterations;
  if (c.min_unmatched_treated) o.min_unmatched_treated = *c.min_unmatched_treated;
  if (c.min_unmatched_control) o.min_unmatched_control = *c.min_unmatched_control;
  if (c.pe_rise) o.pe_rise_epsilon = *c.pe_rise;
  if (c.bf_floor) o.bf_floor = *c.bf_floor;
  o.ridge_lambda = c.ridge_lambda;
  o.missing = c.missing == "drop" ? AME_MISSING_DROP : c.missing == "impute" ? AME_MISSING_IMPUTE : AME_MISSING_SENTINEL;
  o.impute_count = c.impute_count;
  o.impute_sweeps = c.impute_sweeps;
  o.holdout_fraction = c.holdout_frac;
  o.seed = c.seed;
  o.threads = c.threads;
  return o;
}

// FNV-1a over the file bytes; enough to tell whether an input changed.
Json provenance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Json{{"path", path}};
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  std::uint64_t size = 0;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash = (hash ^ static_cast<unsigned char>(buf[i])) * 0x100000001b3ULL;
    }
    size += static_cast<std::uint64_t>(in.gcount());
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return Json{{"path", fs::absolute(path).string()}, {"bytes", size}, {"fnv1a64", hex}};
}

void print_iterations(const ame_result* result) {
  const size_t n = ame_result_iteration_count(result);
  for (size_t i = 0; i < n; ++i) {
    ame_iteration it;
    check(ame_result_iteration(result, i, &it));
    std::cerr << "iteration " << it.iteration << " dropped={" << it.dropped << "} pe=" << it.pe << " bf=" << it.bf;
    if (it.has_mq) std::cerr << " mq=" << it.mq;
    std::cerr << " new=" << it.n_newly_matched << " total=" << it.cumulative_matched << "\n";
  }
}

int run(const Config& cfg, bool verbose) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();

  const ame_load_options load{cfg.treatment_col.c_str(), cfg.outcome_col.c_str(), cfg.na_token.c_str(),
                              cfg.id_col ? cfg.id_col->c_str() : nullptr};
  Table input;
  check(ame_table_read_csv(cfg.input.c_str(), &load, &input.ptr));
  Table holdout;
  if (cfg.holdout) check(ame_table_read_csv(cfg.holdout->c_str(), &load, &holdout.ptr));

  const ame_options options = to_options(cfg);
  Result result;
  check(ame_run(&options, input.ptr, holdout.ptr, &result.ptr));
  if (verbose) print_iterations(result.ptr);

  check(ame_result_write(result.ptr, cfg.output_dir.c_str()));

  ame_summary summary;
  check(ame_result_summary(result.ptr, &summary));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path dir(cfg.output_dir);
  Json manifest{
      {"tool", "ame_match"},
      {"version", ame_version()},
      {"config", config_json(cfg)},
      {"input", provenance(cfg.input)},
      {"holdout", cfg.holdout ? provenance(*cfg.holdout) : Json(nullptr)},
      {"seed", cfg.seed},
      {"outputs",
       Json{{"matched", (dir / "matched.csv").string()},
            {"groups", (dir / "groups.json").string()},
            {"iterations", (dir / "iterations.csv").string()},
            {"effects", (dir / "effects.json").string()}}},
      {"stop_reason", summary.stop_reason},
      {"summary",
       Json{{"n_runs", summary.n_runs},
            {"n_matching_units", summary.n_matching_units},
            {"n_holdout_units", summary.n_holdout_units},
            {"n_matched_units", summary.n_matched_units},
            {"n_groups", summary.n_groups}}},
      {"timing",
       Json{{"started_unix_ms",
             std::chrono::duration_cast<std::chrono::milliseconds>(started.time_since_epoch()).count()},
            {"seconds", seconds}}}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw Failure(kExitRuntime, "WriteFailed: cannot write " + (dir / "manifest.json").string());

  if (verbose) {
    std::cerr << "stopped: " << summary.stop_reason << "; matched " << summary.n_matched_units << " of "
              << summary.n_matching_units << " units in " << summary.n_groups << " groups\n";
  }
  return 0;
}

Config load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure(kExitData, "IoError: cannot open manifest '" + path + "'");
  try {
    return config_from_json(Json::parse(in).at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw Failure(kExitData, "MalformedManifest: " + std::string(e.what()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Almost-exact matching (FLAME / DAME) for causal inference on discrete covariates", "ame_match"};
  Config cfg;
  std::string manifest;
  bool verbose = false;
  std::string holdout;

  app.add_option("--manifest", manifest, "Re-run the configuration stored in a manifest.json; other flags override it");
  app.add_option("--input", cfg.input, "Input CSV");
  auto* holdout_opt = app.add_option("--holdout", holdout, "Separate holdout CSV");
  app.add_option("--holdout-frac", cfg.holdout_frac, "Fraction of the input used as holdout")
      ->capture_default_str()
      ->excludes(holdout_opt);
  app.add_option("--treatment-col", cfg.treatment_col, "Binary treatment column");
  app.add_option("--outcome-col", cfg.outcome_col, "Numeric outcome column");
  app.add_option("--id-col", cfg.id_col, "Unit id column (default: row index)");
  app.add_option("--algorithm", cfg.algorithm, "flame, dame or hybrid")
      ->capture_default_str()
      ->check(CLI::IsMember({"flame", "dame", "hybrid"}));
  app.add_option("--c", cfg.c, "Balancing factor weight in the match quality")->capture_default_str();
  app.add_option("--flame-iters", cfg.flame_iters, "FLAME iterations before switching to DAME (hybrid)")
      ->capture_default_str();
  app.add_option("--missing", cfg.missing, "drop, impute or sentinel")
      ->capture_default_str()
      ->check(CLI::IsMember({"drop", "impute", "sentinel"}));
  app.add_option("--impute-count", cfg.impute_count, "Number of imputed datasets")->capture_default_str();
  app.add_option("--impute-sweeps", cfg.impute_sweeps, "Chained-equation sweeps per imputation")->capture_default_str();
  app.add_flag("--replacement", cfg.replacement, "Match with replacement");
  app.add_option("--max-iterations", cfg.max_iterations, "Stop after this many iterations");
  app.add_option("--min-unmatched-treated", cfg.min_unmatched_treated, "Stop when this few treated units remain");
  app.add_option("--min-unmatched-control", cfg.min_unmatched_control, "Stop when this few control units remain");
  app.add_option("--pe-rise", cfg.pe_rise, "Stop when PE exceeds (1 + eps) times the baseline");
  app.add_option("--bf-floor", cfg.bf_floor, "Stop when the balancing factor falls below this");
  app.add_option("--ridge-lambda", cfg.ridge_lambda, "Ridge penalty of the PE model")->capture_default_str();
  app.add_option("--na-token", cfg.na_token, "Cell text read as missing (empty cells always are)")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads (0: all cores)")->capture_default_str();
  app.add_option("--output-dir", cfg.output_dir, "Output directory")->capture_default_str();
  app.add_flag("--verbose", verbose, "Print per-iteration PE and BF to standard error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (!holdout.empty()) cfg.holdout = holdout;

  try {
    if (!manifest.empty()) {
      // Flags given explicitly win over the stored configuration.
      Config stored = load_manifest(manifest);
      const Config given = cfg;
      auto take = [&](const char* flag, auto member) {
        if (app.count(flag) > 0) stored.*member = given.*member;
      };
      take("--input", &Config::input);
      take("--holdout-frac", &Config::holdout_frac);
      take("--treatment-col", &Config::treatment_col);
      take("--outcome-col", &Config::outcome_col);
      take("--id-col", &Config::id_col);
      take("--algorithm", &Config::algorithm);
      take("--c", &Config::c);
      take("--flame-iters", &Config::flame_iters);
      take("--missing", &Config::missing);
      take("--impute-count", &Config::impute_count);
      take("--impute-sweeps", &Config::impute_sweeps);
      take("--replacement", &Config::replacement);
      take("--max-iterations", &Config::max_iterations);
      take("--min-unmatched-treated", &Config::min_unmatched_treated);
      take("--min-unmatched-control", &Config::min_unmatched_control);
      take("--pe-rise", &Config::pe_rise);
      take("--bf-floor", &Config::bf_floor);
      take("--ridge-lambda", &Config::ridge_lambda);
      take("--na-token", &Config::na_token);
      take("--seed", &Config::seed);
      take("--threads", &Config::threads);
      take("--output-dir", &Config::output_dir);
      if (app.count("--holdout") > 0) {
        stored.holdout = given.holdout;
      } else if (app.count("--holdout-frac") > 0) {
        stored.holdout.reset();
      }
      cfg = std::move(stored);
    }

    std::string missing_flags;
    if (cfg.input.empty()) missing_flags += " --input";
    if (cfg.treatment_col.empty()) missing_flags += " --treatment-col";
    if (cfg.outcome_col.empty()) missing_flags += " --outcome-col";
    if (!missing_flags.empty()) {
      std::cerr << app.help() << "\nerror: missing required option(s):" << missing_flags << "\n";
      return kExitUsage;
    }
    return run(cfg, verbose);
  } catch (const Failure& f) {
    std::cerr << "ame_match: " << f.message() << "\n";
    return f.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "ame_match: " << e.what() << "\n";
    return kExitRuntime;
  }
}
