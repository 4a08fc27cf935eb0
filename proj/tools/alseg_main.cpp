// alseg: synthetic active-learning segmentation experiments.
//
//   alseg generate [--config FILE] --out DIR [--seed N]
//   alseg run      [--config FILE] --out DIR [--seed N] [--strategy NAME] [--upper-bound]
//   alseg score    --checkpoint FILE --data DIR --out FILE [--mc-seed N] [--n-i N] [--dropout P]
//   alseg compare  RUN_SET RUN_SET [...] --out FILE
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration/validation failure.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alseg/commands.hpp"
#include "alseg/selection.hpp"

namespace {

using namespace alseg;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Flags& f, bool with_strategy) {
  cmd->add_option("--config", f.config, "JSON run configuration (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory")->required();
  cmd->add_option("--seed", f.seed, "Override the configuration seed");
  if (with_strategy) {
    std::string names;
    for (const auto v : selection::all_variants()) names += (names.empty() ? "" : ", ") + std::string(selection::to_string(v));
    cmd->add_option("--strategy", f.strategy, "Override the query strategy (" + names + ")");
  }
  cmd->add_flag("--quiet", f.quiet, "Suppress progress output");
}

commands::CommonOptions common_from(const Flags& f) {
  commands::CommonOptions o;
  if (!f.config.empty()) o.config = f.config;
  o.overrides.seed = f.seed;
  o.overrides.strategy = f.strategy;
  o.out = f.out;
  o.log = f.quiet ? nullptr : &std::cerr;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning segmentation experiments on synthetic shape images"};
  app.require_subcommand(1);

  Flags gen_flags;
  CLI::App* gen = app.add_subcommand("generate", "Write a synthetic dataset and its split as TensorFiles");
  add_common(gen, gen_flags, false);

  Flags run_flags;
  bool upper_bound = false;
  CLI::App* run = app.add_subcommand("run", "Run one active-learning experiment");
  add_common(run, run_flags, true);
  run->add_flag("--upper-bound", upper_bound, "Annotate the whole pool up front and train once");

  commands::ScoreOptions score_opts;
  std::string score_checkpoint, score_data, score_out;
  bool score_quiet = false;
  CLI::App* score = app.add_subcommand("score", "Per-sample uncertainty and descriptor for a dataset");
  score->add_option("--checkpoint", score_checkpoint, "Model checkpoint (.ckpt)")->required()->check(CLI::ExistingFile);
  score->add_option("--data", score_data, "Dataset directory written by 'generate'")->required()->check(CLI::ExistingDirectory);
  score->add_option("--out", score_out, "Output CSV file")->required();
  score->add_option("--mc-seed", score_opts.mc_seed, "Base seed of the MC-dropout passes (see run manifest)");
  score->add_option("--n-i", score_opts.n_i, "Number of MC-dropout passes")->capture_default_str();
  score->add_option("--dropout", score_opts.dropout_rate, "Dropout rate")->capture_default_str();
  score->add_flag("--quiet", score_quiet, "Suppress progress output");

  std::vector<std::string> compare_sets;
  std::string compare_out;
  bool compare_quiet = false;
  CLI::App* compare = app.add_subcommand("compare", "Paired one-sided t-tests between run sets");
  compare->add_option("run_sets", compare_sets, "Run directories or directories of runs (one strategy each)")
      ->required()
      ->expected(2, -1);
  compare->add_option("--out", compare_out, "Output JSON report")->required();
  compare->add_flag("--quiet", compare_quiet, "Suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? commands::kExitOk : commands::kExitInvalid;
  }

  try {
    if (gen->parsed()) {
      commands::cmd_generate(common_from(gen_flags));
    } else if (run->parsed()) {
      commands::cmd_run({common_from(run_flags), upper_bound});
    } else if (score->parsed()) {
      score_opts.checkpoint = score_checkpoint;
      score_opts.data = score_data;
      score_opts.out = score_out;
      score_opts.log = score_quiet ? nullptr : &std::cerr;
      commands::cmd_score(score_opts);
    } else if (compare->parsed()) {
      commands::CompareOptions opts;
      for (const auto& s : compare_sets) opts.run_sets.emplace_back(s);
      opts.out = compare_out;
      opts.log = compare_quiet ? nullptr : &std::cerr;
      commands::cmd_compare(opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "alseg: " << e.what() << '\n';
    return commands::exit_code_for(e);
  }
  return commands::kExitOk;
}
