#include "run_config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "upgnn/errors.hpp"

namespace upgnn::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError("config: " + where + " must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

double require_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError("config: " + where + " must be a number");
  return v.get<double>();
}

std::size_t require_uint(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("config: " + where + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v.get<std::int64_t>());
}

std::string require_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError("config: " + where + " must be a string");
  return v.get<std::string>();
}

bool require_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError("config: " + where + " must be a boolean");
  return v.get<bool>();
}

void parse_data(const json& j, RunConfig& cfg) {
  check_keys(j, {"edges", "features", "labels"}, "data");
  DataPaths data;
  if (!j.contains("edges") || !j.contains("features") || !j.contains("labels")) {
    throw ConfigError("config: data needs edges, features, and labels paths");
  }
  data.edges = require_string(j.at("edges"), "data.edges");
  data.features = require_string(j.at("features"), "data.features");
  data.labels = require_string(j.at("labels"), "data.labels");
  cfg.data = data;
}

void parse_synth(const json& j, RunConfig& cfg) {
  check_keys(j,
             {"n", "m", "d", "density", "w_t", "outcome_shift", "simulations"},
             "synth");
  if (j.contains("n")) cfg.synth.n = require_uint(j.at("n"), "synth.n");
  if (j.contains("m")) cfg.synth.m = require_uint(j.at("m"), "synth.m");
  if (j.contains("d")) cfg.synth.d = require_uint(j.at("d"), "synth.d");
  if (j.contains("density")) {
    cfg.synth.density = require_number(j.at("density"), "synth.density");
  }
  if (j.contains("w_t")) {
    cfg.synth.w_t = require_number(j.at("w_t"), "synth.w_t");
  }
  if (j.contains("outcome_shift")) {
    cfg.synth.outcome_shift =
        require_number(j.at("outcome_shift"), "synth.outcome_shift");
  }
  if (j.contains("simulations")) {
    cfg.synth.simulations = require_uint(j.at("simulations"), "synth.simulations");
  }
}

void parse_model(const json& j, RunConfig& cfg) {
  check_keys(j,
             {"gnn", "hidden", "dropout", "epochs", "learning_rate",
              "weight_decay", "dr", "alpha", "lgc_layers", "seed"},
             "model");
  if (j.contains("gnn")) {
    cfg.model.gnn = parse_gnn_kind(require_string(j.at("gnn"), "model.gnn"));
  }
  if (j.contains("hidden")) {
    const json& h = j.at("hidden");
    if (!h.is_array() || h.size() != 3) {
      throw ConfigError(
          "config: model.hidden must be [projection, gnn, head] sizes");
    }
    cfg.model.proj_width = require_uint(h[0], "model.hidden[0]");
    cfg.model.gnn_hidden = require_uint(h[1], "model.hidden[1]");
    cfg.model.head_hidden = require_uint(h[2], "model.hidden[2]");
  }
  if (j.contains("dropout")) {
    cfg.model.dropout = require_number(j.at("dropout"), "model.dropout");
  }
  if (j.contains("epochs")) {
    cfg.model.epochs = require_uint(j.at("epochs"), "model.epochs");
  }
  if (j.contains("learning_rate")) {
    cfg.model.learning_rate =
        require_number(j.at("learning_rate"), "model.learning_rate");
  }
  if (j.contains("weight_decay")) {
    cfg.model.weight_decay =
        require_number(j.at("weight_decay"), "model.weight_decay");
  }
  if (j.contains("dr")) {
    cfg.model.dr_variant = require_bool(j.at("dr"), "model.dr");
  }
  if (j.contains("alpha")) {
    cfg.model.treatment_loss_weight = require_number(j.at("alpha"), "model.alpha");
  }
  if (j.contains("lgc_layers")) {
    cfg.model.lgc_layers = require_uint(j.at("lgc_layers"), "model.lgc_layers");
  }
  if (j.contains("seed")) {
    cfg.model.seed = require_uint(j.at("seed"), "model.seed");
    cfg.model_seed_set = true;
  }
}

void parse_eval(const json& j, RunConfig& cfg) {
  check_keys(j, {"model_spec", "folds", "seeds"}, "eval");
  if (j.contains("model_spec")) {
    cfg.model_spec =
        parse_model_spec(require_string(j.at("model_spec"), "eval.model_spec"));
  }
  if (j.contains("folds")) {
    cfg.folds = require_uint(j.at("folds"), "eval.folds");
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (!s.is_array() || s.empty()) {
      throw ConfigError("config: eval.seeds must be a non-empty array");
    }
    cfg.eval_seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      cfg.eval_seeds.push_back(require_uint(s[i], "eval.seeds entry"));
    }
  }
}

void parse_active(const json& j, RunConfig& cfg) {
  check_keys(j,
             {"policy", "frac_initial", "frac_target", "rounds", "epsilon",
              "clusters", "mc_passes", "weights", "invert_m"},
             "active");
  if (j.contains("policy")) {
    cfg.active.policy =
        parse_policy(require_string(j.at("policy"), "active.policy"));
  }
  if (j.contains("frac_initial")) {
    cfg.active.initial_fraction =
        require_number(j.at("frac_initial"), "active.frac_initial");
  }
  if (j.contains("frac_target")) {
    cfg.active.target_fraction =
        require_number(j.at("frac_target"), "active.frac_target");
  }
  if (j.contains("rounds")) {
    cfg.active.rounds = require_uint(j.at("rounds"), "active.rounds");
  }
  if (j.contains("epsilon")) {
    cfg.active.epsilon = require_number(j.at("epsilon"), "active.epsilon");
  }
  if (j.contains("clusters")) {
    cfg.active.clusters = require_uint(j.at("clusters"), "active.clusters");
  }
  if (j.contains("mc_passes")) {
    cfg.active.mc_passes = require_uint(j.at("mc_passes"), "active.mc_passes");
  }
  if (j.contains("invert_m")) {
    if (!j.at("invert_m").is_boolean()) {
      throw ConfigError("config: active.invert_m must be a boolean");
    }
    cfg.active.invert_m = j.at("invert_m").get<bool>();
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    if (!w.is_array() || w.size() != 3) {
      throw ConfigError(
          "config: active.weights must be [uncertainty, degree, distance]");
    }
    cfg.active.weights.q = require_number(w[0], "active.weights[0]");
    cfg.active.weights.d = require_number(w[1], "active.weights[1]");
    cfg.active.weights.m = require_number(w[2], "active.weights[2]");
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  check_keys(root, {"seed", "out", "workers", "data", "synth", "model", "eval",
                    "active"},
             "the top level");

  RunConfig cfg;
  if (root.contains("seed")) cfg.seed = require_uint(root.at("seed"), "seed");
  if (root.contains("out")) cfg.out = require_string(root.at("out"), "out");
  if (root.contains("workers")) {
    cfg.workers = require_uint(root.at("workers"), "workers");
    if (cfg.workers == 0) throw ConfigError("config: workers must be positive");
  }
  if (root.contains("data")) parse_data(root.at("data"), cfg);
  if (root.contains("synth")) parse_synth(root.at("synth"), cfg);
  if (root.contains("model")) parse_model(root.at("model"), cfg);
  if (root.contains("eval")) parse_eval(root.at("eval"), cfg);
  if (root.contains("active")) parse_active(root.at("active"), cfg);
  return cfg;
}

void finalize_seeds(RunConfig& cfg) {
  cfg.synth.seed = cfg.seed;
  cfg.active.seed = cfg.seed;
  if (!cfg.model_seed_set) cfg.model.seed = cfg.seed;
}

}  // namespace upgnn::cli
