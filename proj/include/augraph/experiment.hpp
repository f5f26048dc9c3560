#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "augraph/augment.hpp"
#include "augraph/hash.hpp"
#include "augraph/synthgen.hpp"

namespace augraph {

inline const std::vector<std::string>& known_strategies() {
  static const std::vector<std::string> s{"reg", "all-promote", "random-k", "knn", "augraph"};
  return s;
}

struct ExperimentOptions {
  std::vector<std::string> strategies{"reg", "all-promote", "random-k", "augraph"};
  int k = 3;
  std::optional<double> tau;          // unset: per-scorer default
  std::string metric = "accuracy";    // validation metric that picks the augraph scorer
  int knn_k = 10;
  std::vector<uint64_t> random_seeds;  // random-k draws; empty: seed, seed+1, seed+2
  uint64_t seed = 42;
  TrainConfig train;
  BinPolicy bins;
  bool retrain_per_round = true;
  bool with_curve = false;  // per-budget accuracy sweep, one row per scorer and k
  int curve_k_max = 5;

  void validate() const {
    if (strategies.empty()) fail_validation("experiment: no strategies requested");
    for (const auto& s : strategies)
      if (std::find(known_strategies().begin(), known_strategies().end(), s) ==
          known_strategies().end())
        fail_validation("experiment: unknown strategy '" + s + "'");
    if (k < 0) fail_validation("experiment: k must be nonnegative");
    if (knn_k < 1) fail_validation("experiment: knn_k must be >= 1");
    if (curve_k_max < 0) fail_validation("experiment: curve_k_max must be nonnegative");
    train.validate();
    if (metric != "accuracy" && metric != "f1" && metric != "roc_auc")
      fail_validation("experiment: metric must be accuracy, f1, or roc_auc");
  }

  json to_json() const {
    json seeds = json::array();
    for (uint64_t s : effective_random_seeds()) seeds.push_back(s);
    return {{"strategies", strategies},
            {"k", k},
            {"tau", tau ? json(*tau) : json("per-scorer-default")},
            {"metric", metric},
            {"knn_k", knn_k},
            {"random_seeds", seeds},
            {"seed", seed},
            {"train", train.to_json()},
            {"float_bins", bins.float_bins},
            {"int_cardinality_cap", bins.int_cardinality_cap},
            {"retrain_per_round", retrain_per_round},
            {"with_curve", with_curve},
            {"curve_k_max", curve_k_max}};
  }

  std::vector<uint64_t> effective_random_seeds() const {
    if (!random_seeds.empty()) return random_seeds;
    return {seed, seed + 1, seed + 2};
  }
};

// The manifest pins everything that determines a run's outputs: input
// hashes plus the full option set. Timestamps deliberately live elsewhere
// (the run-meta sidecar) so outputs stay byte-identical across re-runs.
struct RunManifest {
  json inputs = json::object();  // logical name -> {path, hash}
  json options = json::object();

  json to_json() const { return {{"inputs", inputs}, {"options", options}}; }
  std::string hash() const { return content_hash(to_json().dump()); }
};

struct SplitMetrics {
  size_t count = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> roc_auc;

  static SplitMetrics from(const EvalResult& r) {
    return {r.count, r.accuracy, r.f1, r.roc_auc};
  }

  json to_json() const {
    json out = {{"count", count}, {"accuracy", accuracy}, {"f1", f1}};
    out["roc_auc"] = roc_auc ? json(*roc_auc) : json(nullptr);
    return out;
  }
};

struct StrategyResult {
  std::string strategy;
  std::string fingerprint;
  size_t vertices = 0;
  size_t edges = 0;
  SplitMetrics val;
  SplitMetrics test;
  json extra = json::object();  // chosen scorer, traces, per-seed runs

  json to_json() const {
    json out = {{"strategy", strategy}, {"fingerprint", fingerprint},
                {"vertices", vertices}, {"edges", edges},
                {"val", val.to_json()},  {"test", test.to_json()}};
    for (const auto& [k, v] : extra.items()) out[k] = v;
    return out;
  }
};

struct ExperimentResult {
  std::string manifest_hash;
  json manifest;
  std::vector<StrategyResult> strategies;
  json curve = json::array();

  json to_json() const {
    json rows = json::array();
    for (const auto& s : strategies) rows.push_back(s.to_json());
    json out = {{"manifest_hash", manifest_hash},
                {"manifest", manifest},
                {"strategies", rows}};
    if (!curve.empty()) out["curve"] = curve;
    return out;
  }

  // Plain-text comparison table, one strategy per row.
  std::string table_text() const {
    std::string out = "strategy        f1       accuracy  roc_auc\n";
    auto fmt = [](double v) {
      char buf[16];
      snprintf(buf, sizeof(buf), "%.4f", v);
      return std::string(buf);
    };
    for (const auto& s : strategies) {
      std::string row = s.strategy;
      row.resize(16, ' ');
      row += fmt(s.test.f1) + "   " + fmt(s.test.accuracy) + "    " +
             (s.test.roc_auc ? fmt(*s.test.roc_auc) : std::string("-"));
      out += row + "\n";
    }
    return out;
  }
};

namespace experiment_detail {

struct GraphEval {
  std::string fingerprint;
  size_t vertices = 0;
  size_t edges = 0;
  SplitMetrics val;
  SplitMetrics test;
};

// Trains and evaluates once per distinct graph; identical structure always
// yields identical metrics, so results are cached by fingerprint.
struct EvalCache {
  const Database* db;
  const TaskSpec* task;
  TrainConfig train_cfg;
  std::map<std::string, GraphEval> by_fingerprint;

  const GraphEval& run(const HeteroGraph& g) {
    std::string fp = g.fingerprint();
    auto it = by_fingerprint.find(fp);
    if (it != by_fingerprint.end()) return it->second;
    GnnModel model = train(g, *db, *task, train_cfg);
    GraphEval ge;
    ge.fingerprint = fp;
    ge.vertices = g.vertex_count();
    ge.edges = g.edge_count();
    ge.val = SplitMetrics::from(evaluate(model, g, *db, *task, Split::Val));
    ge.test = SplitMetrics::from(evaluate(model, g, *db, *task, Split::Test));
    return by_fingerprint.emplace(std::move(fp), std::move(ge)).first->second;
  }
};

inline double pick_metric(const SplitMetrics& m, const std::string& metric) {
  if (metric == "accuracy") return m.accuracy;
  if (metric == "f1") return m.f1;
  if (!m.roc_auc) fail_validation("roc_auc metric requires a binary task");
  return *m.roc_auc;
}

inline void fill(StrategyResult& out, const GraphEval& ge) {
  out.fingerprint = ge.fingerprint;
  out.vertices = ge.vertices;
  out.edges = ge.edges;
  out.val = ge.val;
  out.test = ge.test;
}

}  // namespace experiment_detail

inline const std::vector<ScorerKind>& augraph_scorer_kinds() {
  static const std::vector<ScorerKind> kinds{ScorerKind::MI, ScorerKind::EntropyGain,
                                             ScorerKind::PathDisagreement, ScorerKind::GnnGain};
  return kinds;
}

// `partial` (optional) receives every completed strategy as the run goes, so
// a caller can flush what finished when a later strategy throws.
inline ExperimentResult run_experiment(const Database& db, const TaskSpec& task,
                                       const ExperimentOptions& opts,
                                       const json& inputs = json::object(),
                                       ExperimentResult* partial = nullptr) {
  using namespace experiment_detail;
  opts.validate();
  if (!db.task_attached) fail_validation("experiment: task must be attached");

  RunManifest manifest;
  manifest.inputs = inputs;
  manifest.options = opts.to_json();

  ExperimentResult result;
  result.manifest = manifest.to_json();
  result.manifest_hash = manifest.hash();
  if (partial) *partial = result;

  HeteroGraph g0 = build_reg(db);
  EvalCache cache{&db, &task, opts.train, {}};

  auto make_scorer = [&](ScorerKind kind) {
    Scorer s;
    s.kind = kind;
    s.bins = opts.bins;
    s.metric = "accuracy";
    s.train = opts.train;
    return s;
  };
  auto loop_for = [&](ScorerKind kind, int budget) {
    LoopConfig cfg;
    cfg.scorer = make_scorer(kind);
    cfg.tau = opts.tau ? *opts.tau : default_tau(kind);
    cfg.candidate_pool = candidate_pool(db, CandidateOptions{opts.bins, 0.5, false});
    cfg.k = std::min<int>(budget, static_cast<int>(cfg.candidate_pool.size()));
    cfg.seed = opts.seed;
    cfg.retrain_per_round = opts.retrain_per_round;
    return cfg;
  };

  for (const auto& strategy : opts.strategies) {
    StrategyResult sr;
    sr.strategy = strategy;

    if (strategy == "reg") {
      fill(sr, cache.run(g0));
    } else if (strategy == "all-promote") {
      HeteroGraph g = build_all_promote(g0, db, CandidateOptions{opts.bins, 0.5, false});
      fill(sr, cache.run(g));
      sr.extra["promotions"] = g.promotions.size();
    } else if (strategy == "knn") {
      HeteroGraph g = build_knn_graph(db, task, opts.knn_k);
      fill(sr, cache.run(g));
      sr.extra["knn_k"] = opts.knn_k;
    } else if (strategy == "random-k") {
      json runs = json::array();
      SplitMetrics mean_val{}, mean_test{};
      double val_auc = 0, test_auc = 0;
      bool have_auc = true;
      std::vector<uint64_t> seeds = opts.effective_random_seeds();
      double inv = 1.0 / static_cast<double>(seeds.size());
      for (uint64_t s : seeds) {
        std::vector<AttributeRef> chosen;
        HeteroGraph g = build_random_k(g0, db, std::min<int>(opts.k,
                            static_cast<int>(candidate_pool(db).size())), s,
                            CandidateOptions{opts.bins, 0.5, false}, &chosen);
        const GraphEval& ge = cache.run(g);
        json attrs = json::array();
        for (const auto& a : chosen) attrs.push_back(a.to_json(db.schema));
        runs.push_back({{"seed", s},
                        {"attributes", attrs},
                        {"fingerprint", ge.fingerprint},
                        {"val", ge.val.to_json()},
                        {"test", ge.test.to_json()}});
        mean_val.count = ge.val.count;
        mean_val.accuracy += ge.val.accuracy * inv;
        mean_val.f1 += ge.val.f1 * inv;
        mean_test.count = ge.test.count;
        mean_test.accuracy += ge.test.accuracy * inv;
        mean_test.f1 += ge.test.f1 * inv;
        if (ge.val.roc_auc && ge.test.roc_auc) {
          val_auc += *ge.val.roc_auc * inv;
          test_auc += *ge.test.roc_auc * inv;
        } else {
          have_auc = false;
        }
      }
      if (have_auc) {
        mean_val.roc_auc = val_auc;
        mean_test.roc_auc = test_auc;
      }
      sr.val = mean_val;
      sr.test = mean_test;
      sr.fingerprint = "mean-over-" + std::to_string(seeds.size()) + "-draws";
      sr.extra["runs"] = runs;
    } else if (strategy == "augraph") {
      json variants = json::array();
      std::optional<size_t> best;
      double best_val = 0.0;
      std::vector<GraphEval> evals;
      std::vector<json> traces;
      std::vector<std::string> kind_names;
      for (ScorerKind kind : augraph_scorer_kinds()) {
        LoopConfig cfg = loop_for(kind, opts.k);
        PromotionTrace trace;
        HeteroGraph g = run_augmentation(g0, db, task, cfg, &trace);
        const GraphEval& ge = cache.run(g);
        evals.push_back(ge);
        traces.push_back(trace.to_json(db.schema));
        kind_names.emplace_back(scorer_kind_name(kind));
        double v = pick_metric(ge.val, opts.metric);
        variants.push_back({{"scorer", scorer_kind_name(kind)},
                            {"tau", cfg.tau},
                            {"promotions", trace.rounds.size()},
                            {"val", ge.val.to_json()},
                            {"test", ge.test.to_json()},
                            {"trace", traces.back()}});
        if (!best || v > best_val) {
          best = evals.size() - 1;
          best_val = v;
        }
      }
      fill(sr, evals[*best]);
      sr.extra["chosen_scorer"] = kind_names[*best];
      sr.extra["trace"] = traces[*best];
      sr.extra["variants"] = variants;
    }
    result.strategies.push_back(std::move(sr));
    if (partial) *partial = result;
  }

  if (opts.with_curve) {
    for (ScorerKind kind : augraph_scorer_kinds()) {
      LoopConfig cfg = loop_for(kind, opts.curve_k_max);
      PromotionTrace trace;
      HeteroGraph g_full = run_augmentation(g0, db, task, cfg, &trace);
      (void)g_full;
      HeteroGraph g = g0;
      for (size_t used = 0; used <= trace.rounds.size(); ++used) {
        if (used > 0) g = promote(g, db, trace.rounds[used - 1].attribute, opts.bins);
        const GraphEval& ge = cache.run(g);
        result.curve.push_back({{"scorer", scorer_kind_name(kind)},
                                {"k", used},
                                {"val_accuracy", ge.val.accuracy},
                                {"test_accuracy", ge.test.accuracy}});
      }
      if (partial) *partial = result;
    }
  }

  return result;
}

}  // namespace augraph
