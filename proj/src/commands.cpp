#include "alseg/commands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "alseg/error.hpp"
#include "alseg/inference.hpp"
#include "alseg/metrics.hpp"
#include "alseg/rng.hpp"

namespace alseg::commands {
namespace {

using nlohmann::ordered_json;

void say(std::ostream* log, const std::string& line) {
  if (log != nullptr) *log << line << std::endl;
}

config::ConfigDocument read_config(const CommonOptions& opts) {
  return opts.config ? config::load_config(*opts.config) : config::ConfigDocument{};
}

std::string stage_checkpoint_name(std::size_t stage) {
  std::string digits = std::to_string(stage);
  return "stage_" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits + ".ckpt";
}

ReportRow row_from(std::string strategy, std::uint64_t seed, const metrics::StepMetrics& m) {
  return {std::move(strategy), seed,       m.step,       m.pool_fraction, m.n_annotated,
          m.dice_mean,         m.dice_std, m.msd_mean,   m.msd_std,       m.wall_time_s};
}

ordered_json metrics_json(const metrics::StepMetrics& m) {
  return {{"step", m.step},           {"pool_fraction", m.pool_fraction}, {"n_annotated", m.n_annotated},
          {"dice_mean", m.dice_mean}, {"dice_std", m.dice_std},           {"dice_per_class", m.dice},
          {"msd_mean", m.msd_mean},   {"msd_std", m.msd_std},             {"msd_per_class", m.msd}};
}

ordered_json batch_json(const selection::QueryBatch& batch) {
  ordered_json diags = ordered_json::array();
  for (const selection::Diagnostics& d : batch.diagnostics) {
    ordered_json e = {{"id", d.id}, {"uncertainty", d.uncertainty}, {"uncertainty_rank", d.uncertainty_rank}};
    e["representativeness"] = d.representativeness ? ordered_json(*d.representativeness) : ordered_json(nullptr);
    e["representativeness_rank"] =
        d.representativeness_rank ? ordered_json(*d.representativeness_rank) : ordered_json(nullptr);
    e["combined_rank"] = d.combined_rank;
    diags.push_back(std::move(e));
  }
  return {{"variant", selection::to_string(batch.variant)}, {"ids", batch.ids}, {"diagnostics", diags}};
}

ordered_json config_json(const alloop::RunConfig& c) {
  return ordered_json::parse(config::dump_resolved(c));
}

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

// Loads every metrics.csv under `root` (or root itself when it is a run).
std::vector<std::pair<fs::path, std::vector<ReportRow>>> load_run_set(const fs::path& root) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_regular_file(root / "metrics.csv", ec)) {
    files.push_back(root / "metrics.csv");
  } else if (fs::is_directory(root, ec)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") files.push_back(entry.path());
    }
  } else {
    throw IoError(root.string() + ": no such run directory");
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(root.string() + ": contains no metrics.csv");
  std::vector<std::pair<fs::path, std::vector<ReportRow>>> out;
  for (const fs::path& f : files) out.emplace_back(f, parse_report(io::read_text(f), f.string()));
  return out;
}

struct SeedSeries {
  std::vector<std::size_t> steps;
  std::vector<std::size_t> n_annotated;
  std::vector<double> dice;
};

struct RunSet {
  std::string strategy;
  std::map<std::uint64_t, SeedSeries> seeds;
};

RunSet collect(const fs::path& root) {
  RunSet set;
  for (const auto& [file, rows] : load_run_set(root)) {
    for (const ReportRow& r : rows) {
      if (set.strategy.empty()) set.strategy = r.strategy;
      if (r.strategy != set.strategy) {
        throw ConfigError(root.string() + ": mixes strategies " + set.strategy + " and " + r.strategy);
      }
      SeedSeries& s = set.seeds[r.seed];
      if (!s.steps.empty() && r.step <= s.steps.back()) {
        throw ConfigError(file.string() + ": seed " + std::to_string(r.seed) + " repeats or reorders step " +
                          std::to_string(r.step));
      }
      s.steps.push_back(r.step);
      s.n_annotated.push_back(r.n_annotated);
      s.dice.push_back(r.dice_mean);
    }
  }
  return set;
}

ordered_json number_or_infinity(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr || dynamic_cast<const ShapeError*>(&e) != nullptr ||
      dynamic_cast<const InputError*>(&e) != nullptr) {
    return kExitInvalid;
  }
  return kExitRuntime;
}

// ---- metrics CSV ---------------------------------------------------------------

const std::vector<std::string>& report_header() {
  static const std::vector<std::string> header = {"strategy", "seed",     "step",     "pool_fraction",
                                                  "n_annotated", "dice_mean", "dice_std", "msd_mean",
                                                  "msd_std",  "wall_time_s"};
  return header;
}

std::string format_report(const std::vector<ReportRow>& rows) {
  std::string out = io::csv_line(report_header());
  for (const ReportRow& r : rows) {
    const std::vector<std::string> fields = {
        r.strategy,
        std::to_string(r.seed),
        std::to_string(r.step),
        io::format_number(r.pool_fraction),
        std::to_string(r.n_annotated),
        io::format_number(r.dice_mean),
        io::format_number(r.dice_std),
        io::format_number(r.msd_mean),
        io::format_number(r.msd_std),
        io::format_number(r.wall_time_s),
    };
    out += io::csv_line(fields);
  }
  return out;
}

std::vector<ReportRow> parse_report(std::string_view csv_text, std::string_view context) {
  const auto records = io::parse_csv(csv_text);
  if (records.empty() || records.front() != report_header()) {
    throw IoError(std::string(context) + ": missing or unexpected metrics header");
  }
  auto count = [&](const std::string& s, const char* field) {
    const double v = io::parse_number(s, std::string(context) + ":" + field);
    if (v < 0 || v != std::floor(v) || v > 9.007199254740992e15) {
      throw IoError(std::string(context) + ": " + field + " must be a non-negative integer");
    }
    return v;
  };
  std::vector<ReportRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    ReportRow r;
    r.strategy = f[0];
    r.seed = static_cast<std::uint64_t>(count(f[1], "seed"));
    r.step = static_cast<std::size_t>(count(f[2], "step"));
    r.pool_fraction = io::parse_number(f[3], context);
    r.n_annotated = static_cast<std::size_t>(count(f[4], "n_annotated"));
    r.dice_mean = io::parse_number(f[5], context);
    r.dice_std = io::parse_number(f[6], context);
    r.msd_mean = io::parse_number(f[7], context);
    r.msd_std = io::parse_number(f[8], context);
    r.wall_time_s = io::parse_number(f[9], context);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- generate -------------------------------------------------------------------

io::Dataset cmd_generate(const CommonOptions& opts) {
  const alloop::RunConfig cfg = config::resolve(read_config(opts), opts.overrides);
  io::Dataset d;
  d.seed = cfg.seed;
  d.generator = cfg.dataset;
  d.samples = synthdata::generate_dataset(cfg.seed, cfg.dataset);
  const synthdata::PoolState state = synthdata::initial_split(d.samples, cfg.seed, cfg.n_initial, cfg.n_val, cfg.n_test);
  d.split = io::SplitAssignment{{state.annotated.begin(), state.annotated.end()},
                                {state.pool.begin(), state.pool.end()},
                                {state.validation.begin(), state.validation.end()},
                                {state.test.begin(), state.test.end()}};
  io::save_dataset(opts.out, d);
  say(opts.log, "generated " + std::to_string(d.samples.size()) + " samples in " + opts.out.string());
  return d;
}

// ---- run ------------------------------------------------------------------------

void cmd_run(const RunOptions& opts) {
  const alloop::RunConfig cfg = config::resolve(read_config(opts.common), opts.common.overrides);
  const fs::path& out = opts.common.out;
  std::ostream* log = opts.common.log;
  const fs::path ckpt_dir = out / "checkpoints";
  io::write_text(out / "config.json", config::dump_resolved(cfg) + "\n");

  ordered_json manifest;
  manifest["format"] = "alseg-run";
  manifest["version"] = 1;
  manifest["config"] = config_json(cfg);
  manifest["lambda"] = cfg.resolved_lambda();

  if (opts.upper_bound) {
    say(log, "upper-bound run, seed " + std::to_string(cfg.seed));
    const alloop::UpperBoundResult ub = alloop::run_upper_bound(cfg);
    io::save_checkpoint(ckpt_dir / "final.ckpt", ub.params);
    io::write_text(out / "metrics.csv", format_report({row_from(std::string(kUpperBoundLabel), cfg.seed, ub.metrics)}));
    manifest["kind"] = "upper_bound";
    manifest["truncated"] = false;
    ordered_json step = metrics_json(ub.metrics);
    step["checkpoint"] = "checkpoints/final.ckpt";
    manifest["steps"] = ordered_json::array({step});
    manifest["final_checkpoint"] = "checkpoints/final.ckpt";
    io::write_text(out / "manifest.json", json_text(manifest));
    say(log, "dice " + io::format_number(ub.metrics.dice_mean));
    return;
  }

  const std::string label(selection::to_string(cfg.strategy.variant));
  std::vector<ReportRow> rows;
  const alloop::RunRecord record = alloop::run_active_learning(cfg, [&](const alloop::StepRecord& r) {
    say(log, "step " + std::to_string(r.metrics.step) + ": annotated " + std::to_string(r.metrics.n_annotated) +
                 ", dice " + io::format_number(r.metrics.dice_mean) + ", msd " +
                 io::format_number(r.metrics.msd_mean));
  });

  ordered_json steps = ordered_json::array();
  for (std::size_t s = 0; s < record.steps.size(); ++s) {
    const alloop::StepRecord& r = record.steps[s];
    rows.push_back(row_from(label, cfg.seed, r.metrics));
    const std::string ckpt = stage_checkpoint_name(s);
    io::save_checkpoint(ckpt_dir / ckpt, record.stage_models[s]);
    ordered_json step = metrics_json(r.metrics);
    step["checkpoint"] = "checkpoints/" + ckpt;
    if (r.mc_seed) step["mc_seed"] = *r.mc_seed;
    if (r.batch) step["query"] = batch_json(*r.batch);
    steps.push_back(std::move(step));
  }
  io::save_checkpoint(ckpt_dir / "final.ckpt", record.stage_models.back());
  io::write_text(out / "metrics.csv", format_report(rows));
  manifest["kind"] = "active_learning";
  manifest["truncated"] = record.truncated;
  manifest["steps"] = std::move(steps);
  manifest["final_checkpoint"] = "checkpoints/final.ckpt";
  io::write_text(out / "manifest.json", json_text(manifest));
}

// ---- score ----------------------------------------------------------------------

void cmd_score(const ScoreOptions& opts) {
  if (opts.n_i < 2) throw ConfigError("--n-i must be >= 2");
  if (!(opts.dropout_rate >= 0.0 && opts.dropout_rate < 1.0)) throw ConfigError("--dropout must lie in [0, 1)");
  const micronet::ModelParams params = io::load_checkpoint(opts.checkpoint);
  const io::Dataset data = io::load_dataset(opts.data);
  if (data.generator.n_cl != params.n_cl) {
    throw ShapeError("checkpoint predicts " + std::to_string(params.n_cl) + " classes, dataset has " +
                     std::to_string(data.generator.n_cl));
  }
  std::vector<SampleId> ids;
  if (opts.ids) {
    ids = *opts.ids;
  } else {
    for (const auto& s : data.samples) ids.push_back(s.id);
  }
  const auto fg = inference::foreground_classes(params.n_cl);
  std::vector<std::string> header = {"sample_id", "uncertainty"};
  for (std::size_t c = 0; c < params.abstraction_channels(); ++c) header.push_back("d" + std::to_string(c));
  std::string csv = io::csv_line(header);
  for (const SampleId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= data.samples.size()) {
      throw InputError("sample id " + std::to_string(id) + " is not in " + opts.data.string());
    }
    const synthdata::Sample& s = data.samples[static_cast<std::size_t>(id)];
    const auto stack = inference::mc_inferences(params, s.image, opts.n_i, opts.mc_seed,
                                                opts.dropout_rate, id);
    const double u = inference::uncertainty_score(stack, fg);
    const auto desc = inference::image_descriptor(inference::abstraction_response(params, s.image), id);
    std::vector<std::string> fields = {std::to_string(id), io::format_number(u)};
    for (const float v : desc.vec) fields.push_back(io::format_number(v));
    csv += io::csv_line(fields);
  }
  io::write_text(opts.out, csv);
  say(opts.log, "scored " + std::to_string(ids.size()) + " samples into " + opts.out.string());
}

// ---- compare --------------------------------------------------------------------

metrics::TTestResult paired_comparison_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("paired comparison: samples differ in length");
  if (a.size() < 2) throw InputError("paired comparison: need at least 2 paired steps");
  const double first = a[0] - b[0];
  bool constant = true;
  for (std::size_t i = 1; i < a.size(); ++i) constant = constant && (a[i] - b[i]) == first;
  if (constant) {
    if (first == 0.0) return {0.0, 0.5};
    const double inf = std::numeric_limits<double>::infinity();
    return first > 0.0 ? metrics::TTestResult{inf, 0.0} : metrics::TTestResult{-inf, 1.0};
  }
  return metrics::paired_t_test_one_sided(a, b);
}

std::vector<PairComparison> compare_run_sets(const CompareOptions& opts) {
  if (opts.run_sets.size() < 2) throw ConfigError("compare needs at least two run sets");
  std::vector<RunSet> sets;
  for (const fs::path& p : opts.run_sets) sets.push_back(collect(p));
  std::vector<PairComparison> pairs;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      const RunSet& a = sets[i];
      const RunSet& b = sets[j];
      PairComparison pc{a.strategy, b.strategy, opts.run_sets[i].string(), opts.run_sets[j].string(), {}, 0};
      std::set<std::uint64_t> seeds_a, seeds_b;
      for (const auto& [seed, _] : a.seeds) seeds_a.insert(seed);
      for (const auto& [seed, _] : b.seeds) seeds_b.insert(seed);
      if (seeds_a != seeds_b) {
        throw ConfigError("run sets " + pc.source_a + " and " + pc.source_b + " cover different seeds");
      }
      for (const auto& [seed, sa] : a.seeds) {
        const SeedSeries& sb = b.seeds.at(seed);
        if (sa.steps != sb.steps || sa.n_annotated != sb.n_annotated) {
          throw ConfigError("seed " + std::to_string(seed) + ": step grids of " + pc.source_a + " and " +
                            pc.source_b + " differ");
        }
        SeedComparison sc;
        sc.seed = seed;
        sc.n_steps = sa.steps.size();
        for (std::size_t k = 0; k < sc.n_steps; ++k) {
          sc.mean_dice_a += sa.dice[k] / static_cast<double>(sc.n_steps);
          sc.mean_dice_b += sb.dice[k] / static_cast<double>(sc.n_steps);
        }
        const metrics::TTestResult tt = paired_comparison_test(sa.dice, sb.dice);
        sc.t = tt.t;
        sc.p = tt.p;
        sc.significant = tt.p < opts.alpha;
        pc.significant_wins += sc.significant ? 1 : 0;
        pc.seeds.push_back(sc);
      }
      pairs.push_back(std::move(pc));
    }
  }
  return pairs;
}

std::string format_comparison(const std::vector<PairComparison>& pairs, double alpha) {
  ordered_json report;
  report["format"] = "alseg-compare";
  report["version"] = 1;
  report["test"] = "one-sided paired t-test over steps, H1: mean Dice of a > b";
  report["alpha"] = alpha;
  ordered_json list = ordered_json::array();
  for (const PairComparison& pc : pairs) {
    ordered_json seeds = ordered_json::array();
    for (const SeedComparison& s : pc.seeds) {
      seeds.push_back({{"seed", s.seed},
                       {"n_steps", s.n_steps},
                       {"mean_dice_a", s.mean_dice_a},
                       {"mean_dice_b", s.mean_dice_b},
                       {"t", number_or_infinity(s.t)},
                       {"p", s.p},
                       {"significant", s.significant}});
    }
    list.push_back({{"a", pc.strategy_a},
                    {"b", pc.strategy_b},
                    {"source_a", pc.source_a},
                    {"source_b", pc.source_b},
                    {"n_seeds", pc.seeds.size()},
                    {"significant_wins", pc.significant_wins},
                    {"per_seed", seeds}});
  }
  report["comparisons"] = std::move(list);
  return json_text(report);
}

void cmd_compare(const CompareOptions& opts) {
  const auto pairs = compare_run_sets(opts);
  io::write_text(opts.out, format_comparison(pairs, opts.alpha));
  for (const PairComparison& pc : pairs) {
    say(opts.log, pc.strategy_a + " vs " + pc.strategy_b + ": " + std::to_string(pc.significant_wins) + "/" +
                      std::to_string(pc.seeds.size()) + " seeds significantly better");
  }
}

}  // namespace alseg::commands
