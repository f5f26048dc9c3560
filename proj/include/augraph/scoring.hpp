#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "augraph/binning.hpp"
#include "augraph/database.hpp"
#include "augraph/gnn.hpp"
#include "augraph/graph_view.hpp"
#include "augraph/hetero_graph.hpp"

namespace augraph {

enum class ScorerKind { MI, EntropyGain, PathDisagreement, GnnGain };

inline const char* scorer_kind_name(ScorerKind k) {
  switch (k) {
    case ScorerKind::MI: return "mi";
    case ScorerKind::EntropyGain: return "entropy-gain";
    case ScorerKind::PathDisagreement: return "path-disagreement";
    case ScorerKind::GnnGain: return "gnn-gain";
  }
  return "?";
}

inline ScorerKind parse_scorer_kind(const std::string& s) {
  if (s == "mi") return ScorerKind::MI;
  if (s == "entropy-gain" || s == "entropy") return ScorerKind::EntropyGain;
  if (s == "path-disagreement" || s == "path") return ScorerKind::PathDisagreement;
  if (s == "gnn-gain" || s == "gnn") return ScorerKind::GnnGain;
  fail_validation("unknown scorer '" + s +
                  "' (expected mi, entropy-gain, path-disagreement, or gnn-gain)");
}

struct Scorer {
  ScorerKind kind = ScorerKind::MI;
  int d = 2;                        // neighborhood radius for entropy gain
  bool include_center = false;      // count the vertex in its own neighborhood
  std::string metric = "accuracy";  // gnn gain: accuracy | f1 | roc_auc
  BinPolicy bins;
  TrainConfig train;                // config for the frozen model behind gnn gain

  void validate() const {
    if (d < 1) fail_validation("scorer: d must be >= 1");
    if (metric != "accuracy" && metric != "f1" && metric != "roc_auc")
      fail_validation("scorer: metric must be accuracy, f1, or roc_auc");
    train.validate();
  }

  json to_json() const {
    json out = {{"kind", scorer_kind_name(kind)}};
    if (kind == ScorerKind::EntropyGain) {
      out["d"] = d;
      out["include_center"] = include_center;
    }
    if (kind == ScorerKind::GnnGain) {
      out["metric"] = metric;
      out["train"] = train.to_json();
    }
    return out;
  }
};

struct ScoreReport {
  AttributeRef attribute;
  std::string kind;
  double score = 0.0;
  json details;

  json to_json(const Schema& schema) const {
    return {{"attribute", attribute.to_json(schema)},
            {"kind", kind},
            {"score", score},
            {"details", details}};
  }
};

inline double metric_value(const EvalResult& r, const std::string& metric) {
  if (metric == "accuracy") return r.accuracy;
  if (metric == "f1") return r.f1;
  if (metric == "roc_auc") {
    if (!r.roc_auc) fail_validation("roc_auc metric requires a binary task");
    return *r.roc_auc;
  }
  fail_validation("unknown metric '" + metric + "'");
}

namespace scoring_detail {

inline double entropy_of_counts(const std::vector<int>& counts) {
  long long total = 0;
  for (int c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (int c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

// The training table joined outward from the target relation: one column per
// reachable relation (breadth-first over foreign-key links, each relation
// joined once), one output row per combination, nulls kept. Fan-out toward
// children duplicates rows; that multiplicity is intentional.
struct JoinedTable {
  std::vector<std::string> relations;  // join order, [0] = target
  std::map<std::string, int> rel_index;
  std::vector<std::vector<int>> rows;  // row index per relation, -1 = null
  std::vector<int> labels;             // class index of the originating target row
  std::vector<std::string> warnings;
};

inline JoinedTable build_train_join(const Database& db, const TaskSpec& task) {
  JoinedTable jt;
  const std::string& target = task.target_relation;
  jt.relations.push_back(target);
  jt.rel_index[target] = 0;

  const Table& ttab = db.table(target);
  for (size_t r = 0; r < ttab.size(); ++r) {
    const std::string& key = ttab[r][0].s;
    auto it = task.split.find(key);
    if (it == task.split.end() || it->second != Split::Train) continue;
    jt.rows.push_back({static_cast<int>(r)});
    jt.labels.push_back(task.class_index(task.labels.at(key)));
  }
  if (jt.rows.empty()) fail_validation("joined training table is empty: no train rows");

  std::vector<std::string> queue{target};
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    std::string cur = queue[qi];
    for (const auto& link : db.schema.links) {
      if (link.relation == kTrainRelation || link.target == kTrainRelation) continue;
      std::string other;
      bool cur_is_child = false;
      if (link.relation == cur && !jt.rel_index.count(link.target)) {
        other = link.target;
        cur_is_child = true;
      } else if (link.target == cur && !jt.rel_index.count(link.relation)) {
        other = link.relation;
      } else {
        continue;
      }

      int cur_col = jt.rel_index.at(cur);
      int other_col = static_cast<int>(jt.relations.size());
      jt.relations.push_back(other);
      jt.rel_index[other] = other_col;
      queue.push_back(other);

      if (cur_is_child) {
        // follow the foreign key up to its parent row, null stays null
        const Table& ctab = db.table(cur);
        const auto& pkeys = db.key_index(other);
        size_t pos = static_cast<size_t>(link.position) - 1;
        for (auto& row : jt.rows) {
          int c = row[static_cast<size_t>(cur_col)];
          int p = -1;
          if (c >= 0) {
            const Value& fk = ctab[static_cast<size_t>(c)][pos];
            if (!fk.is_missing()) {
              auto hit = pkeys.find(fk.s);
              if (hit != pkeys.end()) p = hit->second;
            }
          }
          row.push_back(p);
        }
      } else {
        // fan out to every child row referencing the current row's key
        const Table& ctab = db.table(other);
        size_t pos = static_cast<size_t>(link.position) - 1;
        std::map<std::string, std::vector<int>> children;
        for (size_t c = 0; c < ctab.size(); ++c) {
          const Value& fk = ctab[c][pos];
          if (!fk.is_missing()) children[fk.s].push_back(static_cast<int>(c));
        }
        const Table& ptab = db.table(cur);
        std::vector<std::vector<int>> grown;
        std::vector<int> grown_labels;
        grown.reserve(jt.rows.size());
        for (size_t i = 0; i < jt.rows.size(); ++i) {
          std::vector<int>& row = jt.rows[i];
          int p = row[static_cast<size_t>(cur_col)];
          const std::vector<int>* kids = nullptr;
          if (p >= 0) {
            auto hit = children.find(ptab[static_cast<size_t>(p)][0].s);
            if (hit != children.end()) kids = &hit->second;
          }
          if (!kids) {
            row.push_back(-1);
            grown.push_back(std::move(row));
            grown_labels.push_back(jt.labels[i]);
          } else {
            for (int kid : *kids) {
              std::vector<int> copy = row;
              copy.push_back(kid);
              grown.push_back(std::move(copy));
              grown_labels.push_back(jt.labels[i]);
            }
          }
        }
        jt.rows = std::move(grown);
        jt.labels = std::move(grown_labels);
      }
    }
  }

  for (const auto& rel : db.schema.relations) {
    if (rel.name == kTrainRelation) continue;
    if (!jt.rel_index.count(rel.name))
      jt.warnings.push_back("relation '" + rel.name +
                            "' unreachable from target by foreign-key links; dropped from join");
  }
  return jt;
}

}  // namespace scoring_detail

// Mutual information between the binned attribute and the label over the
// joined training table, natural log. Joined rows whose attribute cell is
// null or missing do not enter the contingency table.
inline ScoreReport score_mi(const Database& db, const TaskSpec& task, const AttributeRef& attr,
                            const BinPolicy& bins = {}) {
  using namespace scoring_detail;
  if (!db.task_attached) fail_validation("mi: task must be attached");
  BinnedColumn col = binned_column(db, attr, bins);
  JoinedTable jt = build_train_join(db, task);
  auto rel_it = jt.rel_index.find(attr.relation);
  if (rel_it == jt.rel_index.end())
    fail_validation("attribute " + attr.display(db.schema) +
                    " is unreachable from the target relation via foreign-key links");

  size_t colidx = static_cast<size_t>(rel_it->second);
  size_t n_classes = task.classes.size();
  std::map<int, std::vector<long long>> table;  // token id -> per-class counts
  std::vector<long long> class_totals(n_classes, 0);
  long long total = 0, dropped = 0;
  for (size_t i = 0; i < jt.rows.size(); ++i) {
    int r = jt.rows[i][colidx];
    if (r < 0 || !col.tokens[static_cast<size_t>(r)]) {
      ++dropped;
      continue;
    }
    int tid = col.token_id(*col.tokens[static_cast<size_t>(r)]);
    auto& counts = table[tid];
    if (counts.empty()) counts.assign(n_classes, 0);
    counts[static_cast<size_t>(jt.labels[i])] += 1;
    class_totals[static_cast<size_t>(jt.labels[i])] += 1;
    ++total;
  }

  ScoreReport rep;
  rep.attribute = attr;
  rep.kind = scorer_kind_name(ScorerKind::MI);
  json counts_json = json::object();
  double mi = 0.0;
  if (total > 0) {
    double n = static_cast<double>(total);
    for (const auto& [tid, counts] : table) {
      long long row_total = 0;
      for (long long c : counts) row_total += c;
      json per_class = json::array();
      for (size_t y = 0; y < n_classes; ++y) {
        per_class.push_back(counts[y]);
        if (counts[y] == 0) continue;
        double p_ay = static_cast<double>(counts[y]) / n;
        double p_a = static_cast<double>(row_total) / n;
        double p_y = static_cast<double>(class_totals[y]) / n;
        mi += p_ay * std::log(p_ay / (p_a * p_y));
      }
      counts_json[col.distinct[static_cast<size_t>(tid)]] = per_class;
    }
  }
  rep.score = mi;
  rep.details = {{"joined_rows", jt.rows.size()},
                 {"counted_rows", total},
                 {"dropped_null_rows", dropped},
                 {"joint_counts", counts_json},
                 {"warnings", jt.warnings}};
  if (!std::isfinite(rep.score)) fail_runtime("mi: non-finite score");
  return rep;
}

namespace scoring_detail {

// Per-train-vertex entropy of the label distribution over the d-hop
// neighborhood, restricted to train vertices of the target type. A vertex
// whose neighborhood holds no train vertices falls back to the entropy of
// the global train-label distribution: an isolated vertex is maximally
// uninformed, not perfectly pure.
struct EntropySide {
  std::vector<int> train_rows;       // target-type vertex indices
  std::vector<int> train_labels;     // aligned class indices
  std::vector<char> is_train;        // per target-type vertex
  std::vector<int> label_of;         // per target-type vertex, -1 if not train
  double prior = 0.0;
  std::vector<double> entropy;       // per train vertex
};

inline void neighborhood_entropies(const GraphView& view, int target_type, int d,
                                   bool include_center, size_t n_classes, EntropySide& side) {
  KhopWorkspace ws;
  ws.prepare(view);
  side.entropy.assign(side.train_rows.size(), 0.0);
  std::vector<int> counts(n_classes, 0);
  for (size_t k = 0; k < side.train_rows.size(); ++k) {
    VertexRef src{target_type, side.train_rows[k]};
    std::fill(counts.begin(), counts.end(), 0);
    int seen = 0;
    visit_khop(view, ws, src, d, [&](const VertexRef& v, int dist) {
      if (dist == 0 && !include_center) return;
      if (v.type != target_type) return;
      int lab = side.label_of[static_cast<size_t>(v.index)];
      if (lab < 0) return;
      counts[static_cast<size_t>(lab)] += 1;
      ++seen;
    });
    side.entropy[k] = seen == 0 ? side.prior : entropy_of_counts(counts);
  }
}

inline EntropySide entropy_side_template(const HeteroGraph& g, const TaskSpec& task) {
  EntropySide side;
  int tt = g.vtype_index(task.target_relation);
  if (tt < 0) fail_validation("entropy gain: graph has no target vertex type");
  const VertexType& vt = g.vtypes[static_cast<size_t>(tt)];
  side.is_train.assign(vt.ids.size(), 0);
  side.label_of.assign(vt.ids.size(), -1);
  std::vector<int> prior_counts(task.classes.size(), 0);
  for (size_t v = 0; v < vt.ids.size(); ++v) {
    auto it = task.split.find(vt.ids[v]);
    if (it == task.split.end() || it->second != Split::Train) continue;
    int lab = task.class_index(task.labels.at(vt.ids[v]));
    side.is_train[v] = 1;
    side.label_of[v] = lab;
    side.train_rows.push_back(static_cast<int>(v));
    side.train_labels.push_back(lab);
    prior_counts[static_cast<size_t>(lab)] += 1;
  }
  if (side.train_rows.empty()) fail_validation("entropy gain: no train vertices");
  side.prior = entropy_of_counts(prior_counts);
  return side;
}

}  // namespace scoring_detail

inline ScoreReport score_entropy_gain(const HeteroGraph& g, const Database& db,
                                      const TaskSpec& task, const AttributeRef& attr, int d = 2,
                                      const BinPolicy& bins = {}, bool include_center = false) {
  using namespace scoring_detail;
  if (d < 1) fail_validation("entropy gain: d must be >= 1");
  if (!db.task_attached) fail_validation("entropy gain: task must be attached");
  int tt = g.vtype_index(task.target_relation);
  EntropySide base_side = entropy_side_template(g, task);

  ScoreReport rep;
  rep.attribute = attr;
  rep.kind = scorer_kind_name(ScorerKind::EntropyGain);

  BinnedColumn col = binned_column(db, attr, bins);
  if (col.non_missing == 0) {
    rep.score = 0.0;
    rep.details = {{"unchanged", true}, {"reason", "attribute has no non-missing values"}};
    return rep;
  }

  GraphView base_view(g);
  neighborhood_entropies(base_view, tt, d, include_center, task.classes.size(), base_side);
  std::vector<double> before = base_side.entropy;

  GraphView aug_view(g, db, attr, bins);
  neighborhood_entropies(aug_view, tt, d, include_center, task.classes.size(), base_side);

  double sum = 0.0;
  size_t changed = 0;
  for (size_t k = 0; k < before.size(); ++k) {
    double delta = before[k] - base_side.entropy[k];
    if (delta != 0.0) ++changed;
    sum += delta;
  }
  rep.score = sum / static_cast<double>(before.size());
  rep.details = {{"train_vertices", before.size()},
                 {"changed_neighborhoods", changed},
                 {"prior_entropy", base_side.prior},
                 {"d", d}};
  if (!std::isfinite(rep.score)) fail_runtime("entropy gain: non-finite score");
  return rep;
}

namespace scoring_detail {

// Token sets for path disagreement: the binned values of the attribute's
// relation found on the row itself (when the attribute lives on the target)
// and on rows one foreign-key step away. Two train rows count as connected
// when their sets intersect, i.e. they would share an attribute vertex
// within the two-layer receptive field after promotion.
struct PairGroups {
  // canonical token-id set -> (group size, per-class counts)
  std::map<std::vector<int>, std::pair<long long, std::vector<long long>>> groups;
  long long train_rows = 0;
};

inline PairGroups path_groups(const Database& db, const TaskSpec& task, const AttributeRef& attr,
                              const BinnedColumn& col) {
  PairGroups pg;
  const Table& ttab = db.table(task.target_relation);
  size_t n_classes = task.classes.size();

  std::map<std::string, std::vector<int>> children_by_key;  // attr-relation rows per target key
  for (const auto& link : db.schema.links) {
    if (link.relation != attr.relation || link.target != task.target_relation) continue;
    const Table& ctab = db.table(attr.relation);
    size_t pos = static_cast<size_t>(link.position) - 1;
    for (size_t c = 0; c < ctab.size(); ++c) {
      const Value& fk = ctab[c][pos];
      if (!fk.is_missing()) children_by_key[fk.s].push_back(static_cast<int>(c));
    }
  }

  auto attr_keys = db.key_index(attr.relation);

  for (size_t r = 0; r < ttab.size(); ++r) {
    const std::string& key = ttab[r][0].s;
    auto it = task.split.find(key);
    if (it == task.split.end() || it->second != Split::Train) continue;
    int label = task.class_index(task.labels.at(key));

    std::vector<int> tokens;
    auto add_row = [&](int row) {
      const auto& tok = col.tokens[static_cast<size_t>(row)];
      if (tok) tokens.push_back(col.token_id(*tok));
    };
    if (attr.relation == task.target_relation) add_row(static_cast<int>(r));
    for (const auto& link : db.schema.links) {
      if (link.relation == task.target_relation && link.target == attr.relation) {
        const Value& fk = ttab[r][static_cast<size_t>(link.position) - 1];
        if (fk.is_missing()) continue;
        auto hit = attr_keys.find(fk.s);
        if (hit != attr_keys.end()) add_row(hit->second);
      }
    }
    auto kid_it = children_by_key.find(key);
    if (kid_it != children_by_key.end())
      for (int c : kid_it->second) add_row(c);

    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    auto& slot = pg.groups[tokens];
    if (slot.second.empty()) slot.second.assign(n_classes, 0);
    slot.first += 1;
    slot.second[static_cast<size_t>(label)] += 1;
    pg.train_rows += 1;
  }
  return pg;
}

inline bool sorted_intersects(const std::vector<int>& a, const std::vector<int>& b) {
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i;
    else ++j;
  }
  return false;
}

}  // namespace scoring_detail

// Share of connected train pairs that disagree on the label, sign-flipped so
// that higher is better. Pairs are counted per token-set group rather than
// by enumerating all pairs.
inline ScoreReport score_path_disagreement(const HeteroGraph& g, const Database& db,
                                           const TaskSpec& task, const AttributeRef& attr,
                                           const BinPolicy& bins = {}) {
  using namespace scoring_detail;
  if (!db.task_attached) fail_validation("path disagreement: task must be attached");
  if (g.vtype_index(task.target_relation) < 0)
    fail_validation("path disagreement: graph has no target vertex type");
  BinnedColumn col = binned_column(db, attr, bins);
  PairGroups pg = path_groups(db, task, attr, col);

  std::vector<const std::vector<int>*> keys;
  std::vector<const std::pair<long long, std::vector<long long>>*> stats;
  for (const auto& [toks, st] : pg.groups) {
    if (toks.empty()) continue;  // rows touching no attribute value connect nothing
    keys.push_back(&toks);
    stats.push_back(&st);
  }

  long long z = 0, disagree = 0;
  for (size_t gi = 0; gi < keys.size(); ++gi) {
    long long n = stats[gi]->first;
    z += n * (n - 1) / 2;
    long long same = 0;
    for (long long cy : stats[gi]->second) same += cy * (cy - 1) / 2;
    disagree += n * (n - 1) / 2 - same;
    for (size_t hj = gi + 1; hj < keys.size(); ++hj) {
      if (!sorted_intersects(*keys[gi], *keys[hj])) continue;
      long long m = stats[hj]->first;
      z += n * m;
      long long agree = 0;
      for (size_t y = 0; y < stats[gi]->second.size(); ++y)
        agree += stats[gi]->second[y] * stats[hj]->second[y];
      disagree += n * m - agree;
    }
  }

  ScoreReport rep;
  rep.attribute = attr;
  rep.kind = scorer_kind_name(ScorerKind::PathDisagreement);
  bool no_signal = z == 0;
  double rate = no_signal ? 0.0 : static_cast<double>(disagree) / static_cast<double>(z);
  rep.score = no_signal ? 0.0 : 1.0 - rate;
  rep.details = {{"connected_pairs", z},
                 {"disagreeing_pairs", disagree},
                 {"rate", rate},
                 {"no_signal", no_signal},
                 {"groups", keys.size()},
                 {"train_rows", pg.train_rows}};
  return rep;
}

// Validation-metric change from promoting the attribute under a frozen
// model. This variant skips the fingerprint check so the single-model loop
// flavor can score graphs the model never saw; base_eval caches the frozen
// model's score on the unpromoted graph across candidates.
inline ScoreReport score_gnn_gain_frozen(const HeteroGraph& g, const Database& db,
                                         const TaskSpec& task, const AttributeRef& attr,
                                         const GnnModel& model,
                                         const std::string& metric = "accuracy",
                                         const BinPolicy& bins = {},
                                         std::optional<double>* base_eval = nullptr) {
  ScoreReport rep;
  rep.attribute = attr;
  rep.kind = scorer_kind_name(ScorerKind::GnnGain);

  BinnedColumn col = binned_column(db, attr, bins);
  if (col.non_missing == 0) {
    rep.score = 0.0;
    rep.details = {{"unchanged", true}, {"reason", "attribute has no non-missing values"}};
    return rep;
  }

  double base;
  if (base_eval && base_eval->has_value()) {
    base = **base_eval;
  } else {
    base = metric_value(evaluate(model, g, db, task, Split::Val), metric);
    if (base_eval) *base_eval = base;
  }
  HeteroGraph aug = promote(g, db, attr, bins);
  double after = metric_value(evaluate(model, aug, db, task, Split::Val), metric);
  rep.score = after - base;
  rep.details = {{"metric", metric}, {"base", base}, {"augmented", after}};
  return rep;
}

// Strict flavor: the model must have been trained on exactly this graph.
inline ScoreReport score_gnn_gain(const HeteroGraph& g, const Database& db, const TaskSpec& task,
                                  const AttributeRef& attr, const GnnModel& model,
                                  const std::string& metric = "accuracy",
                                  const BinPolicy& bins = {},
                                  std::optional<double>* base_eval = nullptr) {
  if (model.train_fingerprint != g.fingerprint())
    fail_validation("gnn gain: model was trained on a different graph (fingerprint mismatch)",
                    {{"model_fingerprint", model.train_fingerprint},
                     {"graph_fingerprint", g.fingerprint()}});
  return score_gnn_gain_frozen(g, db, task, attr, model, metric, bins, base_eval);
}

// One report per candidate, input order preserved. Shared work (the frozen
// model for gnn gain, base-side entropies for entropy gain) is computed once.
inline std::vector<ScoreReport> score_all(const HeteroGraph& g, const Database& db,
                                          const TaskSpec& task,
                                          const std::vector<AttributeRef>& candidates,
                                          const Scorer& scorer) {
  using namespace scoring_detail;
  scorer.validate();
  if (candidates.empty()) fail_validation("score_all: empty candidate list");

  std::optional<GnnModel> frozen;
  std::optional<double> base_eval;
  if (scorer.kind == ScorerKind::GnnGain) frozen = train(g, db, task, scorer.train);

  std::vector<ScoreReport> out;
  out.reserve(candidates.size());
  for (const auto& attr : candidates) {
    try {
      switch (scorer.kind) {
        case ScorerKind::MI:
          out.push_back(score_mi(db, task, attr, scorer.bins));
          break;
        case ScorerKind::EntropyGain:
          out.push_back(score_entropy_gain(g, db, task, attr, scorer.d, scorer.bins,
                                           scorer.include_center));
          break;
        case ScorerKind::PathDisagreement:
          out.push_back(score_path_disagreement(g, db, task, attr, scorer.bins));
          break;
        case ScorerKind::GnnGain:
          out.push_back(score_gnn_gain(g, db, task, attr, *frozen, scorer.metric, scorer.bins,
                                       &base_eval));
          break;
      }
    } catch (Error& e) {
      e.detail["attribute"] = attr.to_json(db.schema);
      throw Error(e.kind, "candidate " + attr.display(db.schema) + ": " + e.what(), e.detail);
    }
  }
  return out;
}

}  // namespace augraph
