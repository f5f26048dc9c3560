#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "augraph/binning.hpp"
#include "augraph/hetero_graph.hpp"
#include "augraph/rng.hpp"
#include "augraph/scoring.hpp"

namespace augraph {

inline double default_tau(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::EntropyGain:
    case ScorerKind::GnnGain: return 0.0;
    case ScorerKind::PathDisagreement: return 0.5;
    case ScorerKind::MI: return -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

struct LoopConfig {
  int k = 3;
  double tau = 0.0;
  Scorer scorer;
  std::vector<AttributeRef> candidate_pool;
  uint64_t seed = 0;
  bool retrain_per_round = true;  // gnn gain: refit the frozen model each round

  void validate() const {
    if (k < 0) fail_validation("augment: budget k must be nonnegative");
    if (static_cast<size_t>(k) > candidate_pool.size())
      fail_validation("augment: budget k exceeds candidate pool size",
                      {{"k", k}, {"pool", candidate_pool.size()}});
    scorer.validate();
  }
};

struct TraceRound {
  int round = 0;  // 1-based
  AttributeRef attribute;
  double score = 0.0;
  std::vector<std::pair<AttributeRef, double>> scores;  // every candidate that round
};

struct PromotionTrace {
  std::vector<TraceRound> rounds;
  std::string stop_reason;  // budget | threshold | pool-exhausted
  std::vector<std::pair<AttributeRef, double>> final_scores;  // sweep that tripped the threshold

  json to_json(const Schema& schema) const {
    json rounds_json = json::array();
    for (const auto& r : rounds) {
      json scores_json = json::array();
      for (const auto& [attr, sc] : r.scores)
        scores_json.push_back({{"attribute", attr.to_json(schema)}, {"score", sc}});
      rounds_json.push_back({{"round", r.round},
                             {"attribute", r.attribute.to_json(schema)},
                             {"score", r.score},
                             {"candidates", scores_json}});
    }
    json fin = json::array();
    for (const auto& [attr, sc] : final_scores)
      fin.push_back({{"attribute", attr.to_json(schema)}, {"score", sc}});
    return {{"rounds", rounds_json}, {"stop_reason", stop_reason}, {"final_scores", fin}};
  }
};

// Greedy loop: rescore the remaining pool on the current graph, promote the
// argmax while it strictly beats tau, stop on budget, exhausted pool, or
// threshold (checked in that order). On a scorer error the partial trace is
// left in *trace_out before the error propagates.
inline HeteroGraph run_augmentation(const HeteroGraph& g0, const Database& db,
                                    const TaskSpec& task, const LoopConfig& cfg,
                                    PromotionTrace* trace_out = nullptr) {
  cfg.validate();
  if (cfg.candidate_pool.empty()) fail_validation("augment: empty candidate pool");

  PromotionTrace local;
  PromotionTrace& trace = trace_out ? *trace_out : local;
  trace = PromotionTrace{};

  HeteroGraph g = g0;
  std::vector<AttributeRef> pool = cfg.candidate_pool;

  std::optional<GnnModel> stale_model;  // single-model variant only
  if (cfg.scorer.kind == ScorerKind::GnnGain && !cfg.retrain_per_round)
    stale_model = train(g0, db, task, cfg.scorer.train);

  int round = 0;
  while (true) {
    if (round == cfg.k) {
      trace.stop_reason = "budget";
      break;
    }
    if (pool.empty()) {
      trace.stop_reason = "pool-exhausted";
      break;
    }

    std::vector<ScoreReport> reports;
    if (stale_model) {
      std::optional<double> base;
      for (const auto& attr : pool)
        reports.push_back(score_gnn_gain_frozen(g, db, task, attr, *stale_model,
                                                cfg.scorer.metric, cfg.scorer.bins, &base));
    } else {
      reports = score_all(g, db, task, pool, cfg.scorer);
    }

    size_t best = 0;
    for (size_t i = 1; i < reports.size(); ++i) {
      if (reports[i].score > reports[best].score ||
          (reports[i].score == reports[best].score &&
           reports[i].attribute < reports[best].attribute))
        best = i;
    }

    std::vector<std::pair<AttributeRef, double>> sweep;
    sweep.reserve(reports.size());
    for (const auto& r : reports) sweep.emplace_back(r.attribute, r.score);

    if (!(reports[best].score > cfg.tau)) {
      trace.stop_reason = "threshold";
      trace.final_scores = std::move(sweep);
      break;
    }

    g = promote(g, db, reports[best].attribute, cfg.scorer.bins);
    ++round;
    TraceRound tr;
    tr.round = round;
    tr.attribute = reports[best].attribute;
    tr.score = reports[best].score;
    tr.scores = std::move(sweep);
    trace.rounds.push_back(std::move(tr));
    pool.erase(std::find(pool.begin(), pool.end(), reports[best].attribute));
  }
  return g;
}

// Rebuilds the loop's output graph from its trace alone.
inline HeteroGraph replay_trace(const HeteroGraph& g0, const Database& db,
                                const PromotionTrace& trace, const BinPolicy& bins = {}) {
  HeteroGraph g = g0;
  for (const auto& r : trace.rounds) g = promote(g, db, r.attribute, bins);
  return g;
}

inline HeteroGraph build_all_promote(const HeteroGraph& g0, const Database& db,
                                     const CandidateOptions& opts = {},
                                     std::vector<std::string>* warnings = nullptr) {
  std::vector<AttributeRef> pool = candidate_pool(db, opts, warnings);
  return promote_all(g0, db, pool, opts.bins, warnings);
}

inline HeteroGraph build_random_k(const HeteroGraph& g0, const Database& db, int k, uint64_t seed,
                                  const CandidateOptions& opts = {},
                                  std::vector<AttributeRef>* chosen = nullptr) {
  std::vector<AttributeRef> pool = candidate_pool(db, opts);
  if (k < 0 || static_cast<size_t>(k) > pool.size())
    fail_validation("random-k: k must be in [0, pool size]",
                    {{"k", k}, {"pool", pool.size()}});
  Rng rng = substream(seed, "random-k");
  rng.shuffle(pool);
  pool.resize(static_cast<size_t>(k));
  if (chosen) *chosen = pool;
  return promote_all(g0, db, pool, opts.bins);
}

// Single-table baseline: k-nearest-neighbor edges over per-row feature
// vectors (one-hot categoricals, z-scored numerics). The graph keeps the
// marker vertices from the base construction and adds one undirected edge
// type, each pair stored once as (low index, high index).
inline HeteroGraph build_knn_graph(const Database& db, const TaskSpec& task, int k_nn,
                                   const std::string& metric = "euclidean") {
  if (metric != "euclidean") fail_validation("knn: unsupported metric '" + metric + "'");
  size_t data_relations = 0;
  for (const auto& rel : db.schema.relations)
    if (rel.name != kTrainRelation) ++data_relations;
  if (data_relations != 1)
    fail_validation("knn requires single-table input",
                    {{"relations", data_relations}});
  if (!db.task_attached) fail_validation("knn: task must be attached");

  const RelationDecl& rel = *db.schema.find(task.target_relation);
  const Table& tab = db.table(task.target_relation);
  size_t n = tab.size();
  if (k_nn < 1) fail_validation("knn: k_nn must be >= 1");
  if (static_cast<size_t>(k_nn) >= n)
    fail_validation("knn: k_nn must be smaller than the row count",
                    {{"k_nn", k_nn}, {"rows", n}});

  // feature layout: per categorical attribute one indicator per distinct
  // value (missing rows all-zero), per numeric attribute one standardized
  // channel (missing rows at the mean)
  std::vector<std::vector<double>> feat(n);
  for (size_t c = 1; c < static_cast<size_t>(rel.arity()); ++c) {
    const AttrType& ty = rel.attr_types[c];
    if (ty.is_key() || ty.is_fk()) continue;
    if (ty.is_numeric()) {
      double sum = 0.0, sq = 0.0;
      size_t cnt = 0;
      for (size_t r = 0; r < n; ++r) {
        if (tab[r][c].is_missing()) continue;
        double v = tab[r][c].kind == Value::Kind::Int ? static_cast<double>(tab[r][c].i)
                                                      : tab[r][c].d;
        sum += v;
        sq += v * v;
        ++cnt;
      }
      double mean = cnt ? sum / static_cast<double>(cnt) : 0.0;
      double var = cnt ? sq / static_cast<double>(cnt) - mean * mean : 0.0;
      double sd = var > 1e-12 ? std::sqrt(var) : 0.0;
      for (size_t r = 0; r < n; ++r) {
        double z = 0.0;
        if (!tab[r][c].is_missing() && sd > 0.0) {
          double v = tab[r][c].kind == Value::Kind::Int ? static_cast<double>(tab[r][c].i)
                                                        : tab[r][c].d;
          z = (v - mean) / sd;
        }
        feat[r].push_back(z);
      }
    } else {
      std::map<std::string, size_t> values;
      for (size_t r = 0; r < n; ++r)
        if (!tab[r][c].is_missing()) values.emplace(tab[r][c].s, 0);
      size_t base = feat[0].size();
      size_t slot = 0;
      for (auto& [v, idx] : values) idx = base + slot++;
      for (size_t r = 0; r < n; ++r) {
        feat[r].resize(base + values.size(), 0.0);
        if (!tab[r][c].is_missing()) feat[r][values.at(tab[r][c].s)] = 1.0;
      }
    }
  }

  HeteroGraph g = build_reg(db);
  int tt = g.vtype_index(task.target_relation);

  std::set<std::pair<int, int>> pairs;
  std::vector<std::pair<double, size_t>> order;
  for (size_t r = 0; r < n; ++r) {
    order.clear();
    for (size_t s = 0; s < n; ++s) {
      if (s == r) continue;
      double d2 = 0.0;
      for (size_t i = 0; i < feat[r].size(); ++i) {
        double diff = feat[r][i] - feat[s][i];
        d2 += diff * diff;
      }
      order.emplace_back(d2, s);
    }
    std::sort(order.begin(), order.end());
    for (int j = 0; j < k_nn; ++j) {
      int a = static_cast<int>(r), b = static_cast<int>(order[static_cast<size_t>(j)].second);
      pairs.emplace(std::min(a, b), std::max(a, b));
    }
  }

  EdgeType et;
  et.name = "knn";
  et.src_type = tt;
  et.dst_type = tt;
  for (const auto& [a, b] : pairs) et.add_edge(a, b);
  g.etypes.push_back(std::move(et));
  return g;
}

}  // namespace augraph
