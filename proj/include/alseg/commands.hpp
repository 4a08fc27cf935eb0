#pragma once

// The four alseg commands as library functions, so tests can drive them
// in-process. The CLI in tools/ only parses flags and maps exceptions to
// exit codes via exit_code_for().

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "alseg/alloop.hpp"
#include "alseg/config.hpp"
#include "alseg/io.hpp"

namespace alseg::commands {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

// ConfigError, ShapeError and InputError are validation failures (2);
// everything else is a runtime failure (1).
int exit_code_for(const std::exception& e) noexcept;

// ---- metrics CSV -------------------------------------------------------------

struct ReportRow {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double pool_fraction = 0.0;
  std::size_t n_annotated = 0;
  double dice_mean = 0.0;
  double dice_std = 0.0;
  double msd_mean = 0.0;
  double msd_std = 0.0;
  double wall_time_s = 0.0;
};

// strategy,seed,step,pool_fraction,n_annotated,dice_mean,dice_std,msd_mean,msd_std,wall_time_s
const std::vector<std::string>& report_header();
std::string format_report(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_report(std::string_view csv_text, std::string_view context);

// Strategy label used for upper-bound runs.
inline constexpr std::string_view kUpperBoundLabel = "UPPER_BOUND";

// ---- commands ----------------------------------------------------------------

struct CommonOptions {
  std::optional<fs::path> config;  // defaults when absent
  config::Overrides overrides;
  fs::path out;
  std::ostream* log = nullptr;  // progress lines; null when --quiet
};

// Writes <out>/manifest.json, <out>/images/*.altn and <out>/labels/*.altn,
// including the split the run would use for this config.
io::Dataset cmd_generate(const CommonOptions& opts);

struct RunOptions {
  CommonOptions common;
  bool upper_bound = false;
};

// Writes <out>/metrics.csv, <out>/manifest.json, <out>/config.json and
// <out>/checkpoints/stage_NNN.ckpt (+ .index.json) for every stage, plus
// <out>/checkpoints/final.ckpt. Upper-bound runs write a single-row CSV and
// one checkpoint.
void cmd_run(const RunOptions& opts);

struct ScoreOptions {
  fs::path checkpoint;
  fs::path data;
  fs::path out;  // CSV file
  std::uint64_t mc_seed = 0;  // MC-dropout seed, as recorded per step in a run manifest
  std::size_t n_i = 17;
  double dropout_rate = 0.5;
  // Restrict to these ids (default: every sample in the dataset).
  std::optional<std::vector<SampleId>> ids;
  std::ostream* log = nullptr;
};

// CSV columns: sample_id, uncertainty, d0 .. d{C_a-1}.
void cmd_score(const ScoreOptions& opts);

struct CompareOptions {
  std::vector<fs::path> run_sets;  // each a run directory or a directory of runs
  fs::path out;                    // JSON report
  double alpha = 0.05;
  std::ostream* log = nullptr;
};

struct SeedComparison {
  std::uint64_t seed = 0;
  std::size_t n_steps = 0;
  double mean_dice_a = 0.0;
  double mean_dice_b = 0.0;
  double t = 0.0;
  double p = 0.0;
  bool significant = false;
};

struct PairComparison {
  std::string strategy_a, strategy_b;
  std::string source_a, source_b;
  std::vector<SeedComparison> seeds;
  std::size_t significant_wins = 0;
};

// One-sided paired t-test of a > b that also covers degenerate inputs: all
// differences zero gives t = 0, p = 0.5; identical nonzero differences give
// t = +-inf and p = 0 or 1.
metrics::TTestResult paired_comparison_test(std::span<const double> a, std::span<const double> b);

// Every pair (i < j) of run sets in argument order, first set as "a".
std::vector<PairComparison> compare_run_sets(const CompareOptions& opts);
std::string format_comparison(const std::vector<PairComparison>& pairs, double alpha);
void cmd_compare(const CompareOptions& opts);

}  // namespace alseg::commands
