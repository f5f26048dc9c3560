#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "augraph/database.hpp"

namespace augraph {

// A candidate attribute for promotion: (relation, 1-based position), never
// position 1, never a key or foreign key.
struct AttributeRef {
  std::string relation;
  int position = 0;

  bool operator==(const AttributeRef& o) const {
    return relation == o.relation && position == o.position;
  }
  bool operator<(const AttributeRef& o) const {
    return std::tie(relation, position) < std::tie(o.relation, o.position);
  }

  json to_json(const Schema& schema) const {
    const RelationDecl* rel = schema.find(relation);
    std::string name =
        rel && position >= 1 && position <= rel->arity() ? rel->attr_names[position - 1] : "";
    return {{"relation", relation}, {"position", position}, {"name", name}};
  }

  std::string display(const Schema& schema) const {
    const RelationDecl* rel = schema.find(relation);
    if (rel && position >= 1 && position <= rel->arity())
      return relation + "." + rel->attr_names[static_cast<size_t>(position - 1)];
    return relation + "[" + std::to_string(position) + "]";
  }
};

struct BinPolicy {
  int float_bins = 8;           // equal-frequency bins for float attributes
  int int_cardinality_cap = 64; // integers above this distinct count get binned too
};

// Per-row grouping tokens for one attribute. Continuous domains are reduced
// to equal-frequency bins so a promotion cannot create one vertex per row;
// small-cardinality integers and categoricals keep their literal values.
struct BinnedColumn {
  AttributeRef attribute;
  std::vector<std::optional<std::string>> tokens;  // one per table row
  std::vector<std::string> distinct;               // sorted, deterministic
  size_t non_missing = 0;

  int token_id(const std::string& tok) const {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), tok);
    if (it == distinct.end() || *it != tok) return -1;
    return static_cast<int>(it - distinct.begin());
  }
};

namespace detail {

// Equal-frequency cut points over sorted non-missing values. Duplicate
// boundaries collapse, so fewer than `bins` bins can result.
template <typename T>
std::vector<T> equal_frequency_edges(std::vector<T> sorted_values, int bins) {
  std::vector<T> edges;  // upper-exclusive internal edges
  size_t n = sorted_values.size();
  if (n == 0 || bins <= 1) return edges;
  for (int b = 1; b < bins; ++b) {
    size_t idx = (n * static_cast<size_t>(b)) / static_cast<size_t>(bins);
    if (idx >= n) break;
    T edge = sorted_values[idx];
    if (edges.empty() || edges.back() < edge) edges.push_back(edge);
  }
  return edges;
}

template <typename T>
int bin_of(const std::vector<T>& edges, T value) {
  // values below edges[k] and >= edges[k-1] fall in bin k
  return static_cast<int>(std::lower_bound(edges.begin(), edges.end(),
                                           value,
                                           [](const T& e, const T& v) { return e <= v; }) -
                          edges.begin());
}

}  // namespace detail

inline BinnedColumn binned_column(const Database& db, const AttributeRef& attr,
                                  const BinPolicy& policy = {}) {
  if (attr.relation == kTrainRelation)
    fail_validation("the task-marker relation carries labels and cannot be promoted or scored");
  const RelationDecl* rel = db.schema.find(attr.relation);
  if (!rel) fail_validation("unknown relation '" + attr.relation + "'");
  if (attr.position < 2 || attr.position > rel->arity())
    fail_validation("attribute position " + std::to_string(attr.position) +
                    " out of range for relation '" + attr.relation + "'");
  const AttrType& type = rel->attr_types[static_cast<size_t>(attr.position - 1)];
  if (type.is_key() || type.is_fk())
    fail_validation("attribute " + attr.display(db.schema) +
                    " is a key or foreign key and cannot be promoted or scored");
  const Table& tab = db.table(attr.relation);
  size_t col = static_cast<size_t>(attr.position - 1);

  BinnedColumn out;
  out.attribute = attr;
  out.tokens.resize(tab.size());

  if (type.kind == AttrType::Kind::Categorical) {
    for (size_t r = 0; r < tab.size(); ++r)
      if (!tab[r][col].is_missing()) out.tokens[r] = tab[r][col].s;
  } else if (type.kind == AttrType::Kind::Integer) {
    std::vector<int64_t> present;
    for (const auto& tup : tab)
      if (!tup[col].is_missing()) present.push_back(tup[col].i);
    std::vector<int64_t> sorted = present;
    std::sort(sorted.begin(), sorted.end());
    size_t distinct_count =
        static_cast<size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    if (distinct_count > static_cast<size_t>(policy.int_cardinality_cap)) {
      std::vector<int64_t> all_sorted;
      for (const auto& tup : tab)
        if (!tup[col].is_missing()) all_sorted.push_back(tup[col].i);
      std::sort(all_sorted.begin(), all_sorted.end());
      auto edges = detail::equal_frequency_edges(all_sorted, policy.float_bins);
      for (size_t r = 0; r < tab.size(); ++r)
        if (!tab[r][col].is_missing())
          out.tokens[r] = "b" + std::to_string(detail::bin_of(edges, tab[r][col].i));
    } else {
      for (size_t r = 0; r < tab.size(); ++r)
        if (!tab[r][col].is_missing()) out.tokens[r] = std::to_string(tab[r][col].i);
    }
  } else {  // Float
    std::vector<double> all_sorted;
    for (const auto& tup : tab)
      if (!tup[col].is_missing()) all_sorted.push_back(tup[col].d);
    std::sort(all_sorted.begin(), all_sorted.end());
    auto edges = detail::equal_frequency_edges(all_sorted, policy.float_bins);
    for (size_t r = 0; r < tab.size(); ++r)
      if (!tab[r][col].is_missing())
        out.tokens[r] = "b" + std::to_string(detail::bin_of(edges, tab[r][col].d));
  }

  std::set<std::string> distinct_set;
  for (const auto& t : out.tokens)
    if (t) {
      ++out.non_missing;
      distinct_set.insert(*t);
    }
  out.distinct.assign(distinct_set.begin(), distinct_set.end());
  return out;
}

struct CandidateOptions {
  BinPolicy bins;
  // Near-key guard: attributes whose distinct-value count exceeds half the
  // table are structure without pooling benefit; excluded by default.
  double near_key_ratio = 0.5;
  bool include_near_key = false;
};

inline bool attribute_eligible(const Database& db, const AttributeRef& attr) {
  const RelationDecl* rel = db.schema.find(attr.relation);
  if (!rel || attr.relation == kTrainRelation) return false;
  if (attr.position < 2 || attr.position > rel->arity()) return false;
  const AttrType& t = rel->attr_types[static_cast<size_t>(attr.position - 1)];
  return !t.is_key() && !t.is_fk();
}

// Enumerates the default candidate pool in lexicographic (relation name,
// position) order. Attributes with zero non-missing values are skipped;
// near-key attributes are skipped unless overridden, and reported.
inline std::vector<AttributeRef> candidate_pool(const Database& db,
                                                const CandidateOptions& opts = {},
                                                std::vector<std::string>* warnings = nullptr) {
  std::vector<const RelationDecl*> rels;
  for (const auto& r : db.schema.relations)
    if (r.name != kTrainRelation) rels.push_back(&r);
  std::sort(rels.begin(), rels.end(),
            [](const RelationDecl* a, const RelationDecl* b) { return a->name < b->name; });

  std::vector<AttributeRef> pool;
  for (const RelationDecl* rel : rels) {
    size_t rows = db.table(rel->name).size();
    for (int p = 2; p <= rel->arity(); ++p) {
      const AttrType& t = rel->attr_types[static_cast<size_t>(p - 1)];
      if (t.is_key() || t.is_fk()) continue;
      AttributeRef attr{rel->name, p};
      BinnedColumn col = binned_column(db, attr, opts.bins);
      if (col.non_missing == 0) {
        if (warnings)
          warnings->push_back("attribute " + attr.display(db.schema) +
                              " has no non-missing values; excluded");
        continue;
      }
      if (rows > 0 &&
          static_cast<double>(col.distinct.size()) > opts.near_key_ratio * static_cast<double>(rows)) {
        if (warnings)
          warnings->push_back("attribute " + attr.display(db.schema) + " is near-key (" +
                              std::to_string(col.distinct.size()) + " distinct over " +
                              std::to_string(rows) + " rows); excluded");
        if (!opts.include_near_key) continue;
      }
      pool.push_back(attr);
    }
  }
  return pool;
}

}  // namespace augraph
