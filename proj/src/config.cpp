#include "alseg/config.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>

#include <json.hpp>

#include "alseg/error.hpp"
#include "alseg/io.hpp"

namespace alseg::config {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string join(std::string_view prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

void reject_unknown(const json& obj, std::string_view prefix, std::initializer_list<std::string_view> known) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + join(prefix, key) + "'");
  }
}

const json* section(const json& obj, std::string_view prefix, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) return nullptr;
  if (!it->is_object()) throw ConfigError(join(prefix, key) + ": expected an object");
  return &*it;
}

template <typename Int>
void read_count(const json& obj, std::string_view prefix, const char* key, Int& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string name = join(prefix, key);
  if (!it->is_number_integer()) throw ConfigError(name + ": expected a non-negative integer");
  if (it->is_number_unsigned()) {
    const auto v = it->get<std::uint64_t>();
    if (v > std::numeric_limits<Int>::max()) throw ConfigError(name + ": value too large");
    out = static_cast<Int>(v);
    return;
  }
  const auto v = it->get<std::int64_t>();
  if (v < 0) throw ConfigError(name + ": expected a non-negative integer, got " + std::to_string(v));
  out = static_cast<Int>(v);
}

void read_real(const json& obj, std::string_view prefix, const char* key, double& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number()) throw ConfigError(join(prefix, key) + ": expected a number");
  out = it->get<double>();
  if (!std::isfinite(out)) throw ConfigError(join(prefix, key) + ": must be finite");
}

std::optional<std::string> read_string(const json& obj, std::string_view prefix, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_string()) throw ConfigError(join(prefix, key) + ": expected a string");
  return it->get<std::string>();
}

alloop::LambdaMode parse_lambda_mode(const std::string& s) {
  if (s == "paper_formula") return alloop::LambdaMode::kPaperFormula;
  if (s == "explicit") return alloop::LambdaMode::kExplicit;
  if (s == "off") return alloop::LambdaMode::kOff;
  throw ConfigError("lambda.mode: expected paper_formula, explicit or off, got '" + s + "'");
}

alloop::RetrainMode parse_retrain_mode(const std::string& s) {
  if (s == "from_scratch") return alloop::RetrainMode::kFromScratch;
  if (s == "continue") return alloop::RetrainMode::kContinue;
  throw ConfigError("train.retrain_mode: expected from_scratch or continue, got '" + s + "'");
}

selection::Variant parse_strategy_name(const std::string& s, std::string_view field) {
  try {
    return selection::parse_variant(s);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(field) + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(alloop::LambdaMode mode) {
  switch (mode) {
    case alloop::LambdaMode::kPaperFormula: return "paper_formula";
    case alloop::LambdaMode::kExplicit: return "explicit";
    case alloop::LambdaMode::kOff: return "off";
  }
  return "?";
}

std::string_view to_string(alloop::RetrainMode mode) {
  return mode == alloop::RetrainMode::kFromScratch ? "from_scratch" : "continue";
}

ConfigDocument parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(root, "",
                 {"seed", "dataset", "split", "model", "strategy", "n_i", "train", "lambda", "n_al_steps"});

  ConfigDocument doc;
  alloop::RunConfig& c = doc.run;
  read_count(root, "", "seed", c.seed);
  read_count(root, "", "n_i", c.n_i);
  read_count(root, "", "n_al_steps", c.n_al_steps);

  if (const json* d = section(root, "", "dataset")) {
    reject_unknown(*d, "dataset", {"n_samples", "height", "width", "n_classes", "noise_a", "noise_b"});
    read_count(*d, "dataset", "n_samples", c.dataset.n_samples);
    read_count(*d, "dataset", "height", c.dataset.height);
    read_count(*d, "dataset", "width", c.dataset.width);
    read_count(*d, "dataset", "n_classes", c.dataset.n_cl);
    read_real(*d, "dataset", "noise_a", c.dataset.noise_a);
    read_real(*d, "dataset", "noise_b", c.dataset.noise_b);
  }
  if (const json* s = section(root, "", "split")) {
    reject_unknown(*s, "split", {"n_initial", "n_val", "n_test"});
    read_count(*s, "split", "n_initial", c.n_initial);
    read_count(*s, "split", "n_val", c.n_val);
    read_count(*s, "split", "n_test", c.n_test);
  }
  if (const json* m = section(root, "", "model")) {
    reject_unknown(*m, "model", {"n_ch"});
    read_count(*m, "model", "n_ch", c.n_ch);
  }
  if (const json* s = section(root, "", "strategy")) {
    reject_unknown(*s, "strategy", {"name", "n_unc", "n_rep"});
    if (auto name = read_string(*s, "strategy", "name")) c.strategy.variant = parse_strategy_name(*name, "strategy.name");
    read_count(*s, "strategy", "n_unc", c.strategy.n_unc);
    read_count(*s, "strategy", "n_rep", c.strategy.n_rep);
  }
  if (const json* t = section(root, "", "train")) {
    reject_unknown(*t, "train", {"learning_rate", "dropout_rate", "batch_size", "steps_per_stage", "retrain_mode"});
    read_real(*t, "train", "learning_rate", c.hyper.learning_rate);
    read_real(*t, "train", "dropout_rate", c.hyper.dropout_rate);
    read_count(*t, "train", "batch_size", c.hyper.batch_size);
    read_count(*t, "train", "steps_per_stage", c.train_steps_per_stage);
    if (auto mode = read_string(*t, "train", "retrain_mode")) c.retrain_mode = parse_retrain_mode(*mode);
  }
  if (const json* l = section(root, "", "lambda")) {
    reject_unknown(*l, "lambda", {"mode", "value"});
    if (auto mode = read_string(*l, "lambda", "mode")) {
      c.lambda_mode = parse_lambda_mode(*mode);
      doc.lambda_follows_strategy = false;
    }
    if (l->contains("value")) {
      read_real(*l, "lambda", "value", c.lambda_value);
      if (doc.lambda_follows_strategy) {
        c.lambda_mode = alloop::LambdaMode::kExplicit;
        doc.lambda_follows_strategy = false;
      } else if (c.lambda_mode != alloop::LambdaMode::kExplicit) {
        throw ConfigError("lambda.value is only meaningful with lambda.mode = explicit");
      }
    }
  }
  return doc;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

alloop::RunConfig resolve(ConfigDocument doc, const Overrides& overrides) {
  alloop::RunConfig& c = doc.run;
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.strategy) c.strategy.variant = parse_strategy_name(*overrides.strategy, "--strategy");
  if (doc.lambda_follows_strategy) {
    c.lambda_mode = c.strategy.requires_entropy() ? alloop::LambdaMode::kPaperFormula : alloop::LambdaMode::kOff;
  }
  c.validate();
  return c;
}

std::string dump_resolved(const alloop::RunConfig& c, int indent) {
  ordered_json j;
  j["seed"] = c.seed;
  j["dataset"] = {{"n_samples", c.dataset.n_samples}, {"height", c.dataset.height},
                  {"width", c.dataset.width},         {"n_classes", c.dataset.n_cl},
                  {"noise_a", c.dataset.noise_a},     {"noise_b", c.dataset.noise_b}};
  j["split"] = {{"n_initial", c.n_initial}, {"n_val", c.n_val}, {"n_test", c.n_test}};
  j["model"] = {{"n_ch", c.n_ch}};
  j["strategy"] = {{"name", selection::to_string(c.strategy.variant)},
                   {"n_unc", c.strategy.n_unc},
                   {"n_rep", c.strategy.n_rep}};
  j["n_i"] = c.n_i;
  j["train"] = {{"learning_rate", c.hyper.learning_rate},
                {"dropout_rate", c.hyper.dropout_rate},
                {"batch_size", c.hyper.batch_size},
                {"steps_per_stage", c.train_steps_per_stage},
                {"retrain_mode", to_string(c.retrain_mode)}};
  j["lambda"] = {{"mode", to_string(c.lambda_mode)}};
  if (c.lambda_mode == alloop::LambdaMode::kExplicit) j["lambda"]["value"] = c.lambda_value;
  j["n_al_steps"] = c.n_al_steps;
  return j.dump(indent);
}

}  // namespace alseg::config
