#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "upgnn/checkpoint.hpp"
#include "upgnn/errors.hpp"
#include "upgnn/metrics.hpp"

namespace upgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write: " + path.string());
  out << content;
  if (!out) throw IoError("failed writing: " + path.string());
}

Dataset load_and_normalize(const RunConfig& cfg, std::size_t* duplicates) {
  if (!cfg.data) {
    throw ConfigError("config: this command needs a data section");
  }
  LoadResult loaded =
      load_dataset(cfg.data->edges, cfg.data->features, cfg.data->labels);
  if (duplicates) *duplicates = loaded.duplicate_edge_count;
  loaded.dataset.x_u = normalize_features(loaded.dataset.x_u);
  return std::move(loaded.dataset);
}

std::string predictions_csv(const Dataset& ds, const UpliftPrediction& pred) {
  std::ostringstream out;
  out << "user_id,y_treat,y_control,tau\n";
  for (std::size_t u = 0; u < ds.n(); ++u) {
    out << ds.user_ids[u] << ',' << fmt(pred.y_treat[u]) << ','
        << fmt(pred.y_control[u]) << ',' << fmt(pred.tau[u]) << '\n';
  }
  return out.str();
}

}  // namespace

int cmd_synth(const RunConfig& cfg) {
  // Generate (and thereby validate) every simulation before any file exists.
  std::vector<SyntheticResult> sims;
  for (std::size_t s = 0; s < cfg.synth.simulations; ++s) {
    sims.push_back(generate_synthetic(cfg.synth, s));
  }

  const fs::path root(cfg.out);
  for (std::size_t s = 0; s < sims.size(); ++s) {
    const SyntheticResult& sim = sims[s];
    const Dataset& ds = sim.dataset;
    const fs::path dir = sims.size() == 1
                             ? root
                             : root / ("sim" + std::to_string(s));
    fs::create_directories(dir);

    std::ostringstream edges;
    edges << "user_id,item_id\n";
    for (const auto& [u, p] : ds.graph.edges()) {
      edges << ds.user_ids[u] << ',' << ds.product_ids[p] << '\n';
    }
    write_file(dir / "edges.csv", edges.str());

    std::ostringstream features;
    features << "user_id";
    for (std::size_t j = 0; j < ds.x_u.cols(); ++j) features << ",f" << j;
    features << '\n';
    for (std::size_t u = 0; u < ds.n(); ++u) {
      features << ds.user_ids[u];
      for (std::size_t j = 0; j < ds.x_u.cols(); ++j) {
        features << ',' << fmt(ds.x_u(u, j));
      }
      features << '\n';
    }
    write_file(dir / "features.csv", features.str());

    std::ostringstream labels;
    labels << "user_id,treatment,outcome\n";
    for (std::size_t u = 0; u < ds.n(); ++u) {
      labels << ds.user_ids[u] << ',' << ds.treatment[u] << ','
             << fmt(ds.outcome[u]) << '\n';
    }
    write_file(dir / "labels.csv", labels.str());

    std::ostringstream effects;
    effects << "user_id,true_effect\n";
    for (std::size_t u = 0; u < ds.n(); ++u) {
      effects << ds.user_ids[u] << ',' << fmt(sim.true_effects[u]) << '\n';
    }
    write_file(dir / "effects.csv", effects.str());

    json meta;
    meta["seed"] = cfg.synth.seed;
    meta["simulation"] = s;
    meta["n"] = cfg.synth.n;
    meta["m"] = cfg.synth.m;
    meta["d"] = cfg.synth.d;
    meta["density"] = cfg.synth.density;
    meta["w_t"] = sim.w_t_used;
    meta["outcome_shift"] = cfg.synth.outcome_shift;
    write_file(dir / "metadata.json", meta.dump(2) + "\n");
  }
  std::cout << "wrote " << sims.size() << " simulation"
            << (sims.size() == 1 ? "" : "s") << " to " << cfg.out << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  std::size_t duplicates = 0;
  const Dataset ds = load_and_normalize(cfg, &duplicates);
  if (duplicates) {
    std::cerr << "upgnn: warning: dropped " << duplicates
              << " duplicate edges\n";
  }
  const std::vector<std::size_t> labeled = ds.labeled_users();
  const TrainResult result = train(ds, labeled, cfg.model);
  if (result.single_arm) {
    std::cerr << "upgnn: warning: labeled set has a single treatment arm; "
                 "the unused head stays at its decayed initialization\n";
  }

  fs::create_directories(cfg.out);
  const fs::path dir(cfg.out);
  save_checkpoint(result.model, (dir / "checkpoint.bin").string());

  std::ostringstream trace;
  trace << "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
    trace << e << ',' << fmt(result.loss_trace[e]) << '\n';
  }
  write_file(dir / "loss_trace.csv", trace.str());

  write_file(dir / "predictions.csv",
             predictions_csv(ds, predict(result.model, ds)));

  std::cout << "trained " << gnn_kind_name(cfg.model.gnn) << " for "
            << cfg.model.epochs << " epochs on " << labeled.size()
            << " labeled users; final loss "
            << (result.loss_trace.empty() ? std::string("n/a")
                                          : fmt(result.loss_trace.back()))
            << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const Dataset ds = load_and_normalize(cfg, nullptr);
  const MetricsReport report = run_experiment(
      ds, cfg.model_spec, cfg.folds, cfg.eval_seeds, cfg.model, cfg.workers);

  fs::create_directories(cfg.out);
  const fs::path dir(cfg.out);
  write_file(dir / "records.jsonl", report_records_jsonl(report));
  write_file(dir / "summary.json", report_summary_json(report));
  std::cout << report_table(report);
  return 0;
}

int cmd_active(const RunConfig& cfg) {
  const Dataset ds = load_and_normalize(cfg, nullptr);
  const ActiveRunResult result = active_learning_run(ds, cfg.model, cfg.active);

  // Metrics on the never-labeled remainder of the oracle pool.
  std::vector<char> selected(ds.n(), 0);
  for (const std::size_t u : result.labeled) selected[u] = 1;
  std::vector<std::size_t> remainder;
  for (std::size_t u = 0; u < ds.n(); ++u) {
    if (ds.label_mask[u] && !selected[u]) remainder.push_back(u);
  }

  json metrics;
  metrics["labeled"] = result.labeled.size();
  metrics["remainder"] = remainder.size();
  metrics["policy"] = policy_name(cfg.active.policy);
  metrics["rounds"] = result.history.size();
  const auto put = [&](const char* key, double frac) {
    try {
      metrics[key] =
          uplift_at_k(result.prediction.tau, ds.outcome, ds.treatment,
                      remainder, frac);
    } catch (const Error&) {
      metrics[key] = nullptr;
    }
  };
  if (remainder.empty()) {
    metrics["up40"] = nullptr;
    metrics["up20"] = nullptr;
    metrics["test_ate"] = nullptr;
  } else {
    put("up40", 0.4);
    put("up20", 0.2);
    try {
      metrics["test_ate"] = ate(ds.outcome, ds.treatment, remainder);
    } catch (const Error&) {
      metrics["test_ate"] = nullptr;
    }
  }

  std::ostringstream history;
  for (const RoundRecord& rec : result.history) {
    json line;
    line["round"] = rec.round;
    line["policy"] = rec.policy_used;
    line["batch"] = rec.batch;
    line["objective"] = rec.selection.objective;
    line["budget"] = rec.selection.budget;
    line["treated_count"] = rec.selection.treated_count;
    line["treated_cap"] = rec.selection.treated_cap;
    line["cluster_counts"] = rec.selection.cluster_counts;
    line["cluster_floors"] = rec.selection.cluster_floors;
    line["extra_pool"] = rec.selection.extra_pool;
    line["extra_used"] = rec.selection.extra_used;
    line["labeled_after"] = rec.labeled_after;
    history << line.dump() << '\n';
  }

  fs::create_directories(cfg.out);
  const fs::path dir(cfg.out);
  write_file(dir / "history.jsonl", history.str());
  write_file(dir / "predictions.csv", predictions_csv(ds, result.prediction));
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");

  std::cout << "active run: " << result.labeled.size() << " labeled over "
            << result.history.size() << " rounds; metrics in " << cfg.out
            << "/metrics.json\n";
  return 0;
}

}  // namespace upgnn::cli
