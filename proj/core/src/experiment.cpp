#include "upgnn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <sstream>
#include <thread>

#include "upgnn/baseline.hpp"
#include "upgnn/errors.hpp"
#include "upgnn/folds.hpp"
#include "upgnn/metrics.hpp"
#include "upgnn/rng.hpp"

namespace upgnn {

ModelSpecKind parse_model_spec(const std::string& name) {
  if (name == "umgnet") return ModelSpecKind::kUmgnet;
  if (name == "umgnet-dr") return ModelSpecKind::kUmgnetDr;
  if (name == "baseline-S") return ModelSpecKind::kBaselineS;
  if (name == "baseline-T") return ModelSpecKind::kBaselineT;
  throw ConfigError("unknown model spec '" + name + "'");
}

std::string model_spec_name(ModelSpecKind kind) {
  switch (kind) {
    case ModelSpecKind::kUmgnet: return "umgnet";
    case ModelSpecKind::kUmgnetDr: return "umgnet-dr";
    case ModelSpecKind::kBaselineS: return "baseline-S";
    case ModelSpecKind::kBaselineT: return "baseline-T";
  }
  throw ConfigError("unknown model spec");
}

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << v;
  return out.str();
}

// Shortest-round-trip formatting keeps serialized reports byte-stable.
std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string fmt(const std::optional<double>& v) {
  return v ? fmt(*v) : "null";
}

std::string canonical_config(ModelSpecKind spec, std::size_t k,
                             const std::vector<std::uint64_t>& seeds,
                             const ModelConfig& cfg) {
  std::ostringstream out;
  out << "spec=" << model_spec_name(spec) << ";folds=" << k << ";seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out << ',';
    out << seeds[i];
  }
  out << ";gnn=" << gnn_kind_name(cfg.gnn) << ";proj=" << cfg.proj_width
      << ";gnn_hidden=" << cfg.gnn_hidden << ";head=" << cfg.head_hidden
      << ";dropout=" << fmt(cfg.dropout) << ";epochs=" << cfg.epochs
      << ";lr=" << fmt(cfg.learning_rate) << ";wd=" << fmt(cfg.weight_decay)
      << ";dr=" << (cfg.dr_variant ? 1 : 0)
      << ";alpha=" << fmt(cfg.treatment_loss_weight)
      << ";lgc_layers=" << cfg.lgc_layers << ";model_seed=" << cfg.seed;
  return out.str();
}

MetricAggregate aggregate(const std::vector<FoldRecord>& records,
                          std::optional<double> FoldRecord::*field) {
  MetricAggregate agg;
  std::vector<double> values;
  for (const FoldRecord& r : records) {
    if (r.*field) {
      values.push_back(*(r.*field));
    } else {
      ++agg.missing;
    }
  }
  agg.count = values.size();
  if (values.empty()) return agg;
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  agg.mean = mean;
  agg.stddev = std::sqrt(var);
  return agg;
}

std::optional<double> try_metric(double (*f)(const std::vector<double>&,
                                             const std::vector<double>&,
                                             const std::vector<int>&,
                                             const std::vector<std::size_t>&,
                                             double),
                                 const std::vector<double>& tau,
                                 const Dataset& ds,
                                 const std::vector<std::size_t>& eval_set,
                                 double frac) {
  try {
    return f(tau, ds.outcome, ds.treatment, eval_set, frac);
  } catch (const UndefinedAteError&) {
    return std::nullopt;
  }
}

}  // namespace

MetricsReport run_experiment(const Dataset& ds, ModelSpecKind spec,
                             std::size_t k_folds,
                             const std::vector<std::uint64_t>& seeds,
                             const ModelConfig& mcfg, std::size_t workers) {
  if (seeds.empty()) throw ParameterError("experiment: no seeds given");
  if (workers == 0) throw ParameterError("experiment: workers must be positive");
  mcfg.validate();
  const std::vector<std::size_t> universe = ds.labeled_users();
  if (universe.empty()) {
    throw ParameterError("experiment: dataset has no labeled users");
  }

  MetricsReport report;
  report.model_spec = model_spec_name(spec);
  report.folds = k_folds;
  report.seeds = seeds;
  report.config_hash = hex64(fnv1a(canonical_config(spec, k_folds, seeds, mcfg)));

  // Fold plans depend only on (universe, k, seed), never on the model spec,
  // so reports for different specs stay comparable.
  std::vector<FoldPlan> plans;
  std::ostringstream plan_text;
  for (const std::uint64_t seed : seeds) {
    plans.push_back(split_folds(universe, k_folds, seed));
    plan_text << "seed=" << seed << ':';
    for (const auto& members : plans.back().fold_members) {
      for (const std::size_t u : members) plan_text << u << ',';
      plan_text << '|';
    }
  }
  report.fold_plan_hash = hex64(fnv1a(plan_text.str()));

  struct Task {
    std::size_t seed_index;
    std::size_t fold;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (std::size_t f = 0; f < k_folds; ++f) tasks.push_back({s, f});
  }
  report.records.resize(tasks.size());
  std::vector<std::exception_ptr> failures(tasks.size());

  const auto run_task = [&](std::size_t index) {
    const Task& task = tasks[index];
    const std::uint64_t seed = seeds[task.seed_index];
    const FoldPlan& plan = plans[task.seed_index];
    const std::vector<std::size_t>& train_set = plan.fold_members[task.fold];
    const std::vector<std::size_t> eval_set = plan.complement(task.fold);

    std::vector<double> tau;
    switch (spec) {
      case ModelSpecKind::kUmgnet:
      case ModelSpecKind::kUmgnetDr: {
        ModelConfig cfg = mcfg;
        cfg.dr_variant = spec == ModelSpecKind::kUmgnetDr;
        cfg.seed = mcfg.seed ^ derive_seed(seed, "model", task.fold);
        tau = predict(train(ds, train_set, cfg).model, ds).tau;
        break;
      }
      case ModelSpecKind::kBaselineS:
      case ModelSpecKind::kBaselineT: {
        const BaselineKind kind = spec == ModelSpecKind::kBaselineS
                                      ? BaselineKind::kS
                                      : BaselineKind::kT;
        const BaselineModel model = fit_baseline(ds, train_set, kind);
        std::vector<std::size_t> all(ds.n());
        for (std::size_t u = 0; u < ds.n(); ++u) all[u] = u;
        tau = predict_baseline(model, ds, all);
        break;
      }
    }

    FoldRecord rec;
    rec.seed = seed;
    rec.fold = task.fold;
    rec.up40 = try_metric(uplift_at_k, tau, ds, eval_set, 0.4);
    rec.up20 = try_metric(uplift_at_k, tau, ds, eval_set, 0.2);
    try {
      rec.test_ate = ate(ds.outcome, ds.treatment, eval_set);
    } catch (const UndefinedAteError&) {
      rec.test_ate = std::nullopt;
    }
    report.records[index] = std::move(rec);
  };

  if (workers == 1 || tasks.size() == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t thread_count = std::min(workers, tasks.size());
    std::vector<std::thread> threads;
    threads.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) {
      threads.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          try {
            run_task(i);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& e : failures) {
      if (e) std::rethrow_exception(e);
    }
  }

  report.up40 = aggregate(report.records, &FoldRecord::up40);
  report.up20 = aggregate(report.records, &FoldRecord::up20);
  report.test_ate = aggregate(report.records, &FoldRecord::test_ate);
  return report;
}

std::string report_records_jsonl(const MetricsReport& report) {
  std::ostringstream out;
  for (const FoldRecord& r : report.records) {
    out << "{\"seed\":" << r.seed << ",\"fold\":" << r.fold
        << ",\"up40\":" << fmt(r.up40) << ",\"up20\":" << fmt(r.up20)
        << ",\"test_ate\":" << fmt(r.test_ate) << "}\n";
  }
  return out.str();
}

namespace {

std::string aggregate_json(const MetricAggregate& agg) {
  std::ostringstream out;
  out << "{\"mean\":" << fmt(agg.mean) << ",\"std\":" << fmt(agg.stddev)
      << ",\"count\":" << agg.count << ",\"missing\":" << agg.missing << "}";
  return out.str();
}

}  // namespace

std::string report_summary_json(const MetricsReport& report) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"model_spec\": \"" << report.model_spec << "\",\n";
  out << "  \"folds\": " << report.folds << ",\n";
  out << "  \"seeds\": [";
  for (std::size_t i = 0; i < report.seeds.size(); ++i) {
    if (i) out << ", ";
    out << report.seeds[i];
  }
  out << "],\n";
  out << "  \"config_hash\": \"" << report.config_hash << "\",\n";
  out << "  \"fold_plan_hash\": \"" << report.fold_plan_hash << "\",\n";
  out << "  \"records\": " << report.records.size() << ",\n";
  out << "  \"up40\": " << aggregate_json(report.up40) << ",\n";
  out << "  \"up20\": " << aggregate_json(report.up20) << ",\n";
  out << "  \"test_ate\": " << aggregate_json(report.test_ate) << "\n";
  out << "}\n";
  return out.str();
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream out;
  out << "model_spec=" << report.model_spec << " folds=" << report.folds
      << " records=" << report.records.size() << "\n";
  const auto row = [&](const char* name, const MetricAggregate& agg) {
    out << std::left << std::setw(10) << name << std::right << std::fixed
        << std::setprecision(4) << std::setw(12) << agg.mean << " +/- "
        << std::setw(10) << agg.stddev << "   n=" << agg.count
        << " missing=" << agg.missing << "\n";
  };
  row("up40", report.up40);
  row("up20", report.up20);
  row("test_ate", report.test_ate);
  return out.str();
}

}  // namespace upgnn
