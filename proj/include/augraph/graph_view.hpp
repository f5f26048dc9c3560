#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "augraph/hetero_graph.hpp"

namespace augraph {

struct VertexRef {
  int type = -1;
  int index = -1;

  bool operator==(const VertexRef& o) const { return type == o.type && index == o.index; }
  bool operator<(const VertexRef& o) const {
    return std::tie(type, index) < std::tie(o.type, o.index);
  }
};

// Read-only overlay of one promotion on top of a base graph. Scoring k
// candidates walks k views over shared storage instead of materializing k
// copies; traversals must match the materialized graph exactly.
class GraphView {
 public:
  explicit GraphView(const HeteroGraph& base) : base_(&base) {}

  GraphView(const HeteroGraph& base, const Database& db, const AttributeRef& attr,
            const BinPolicy& bins = {})
      : base_(&base), has_overlay_(true), attr_(attr) {
    if (base.has_promotion(attr))
      fail_validation("attribute " + attr.display(db.schema) + " is already promoted");
    BinnedColumn col = binned_column(db, attr, bins);
    if (col.non_missing == 0)
      fail_validation("attribute " + attr.display(db.schema) +
                      " has no non-missing values; nothing to promote");
    const RelationDecl* rel = db.schema.find(attr.relation);
    overlay_type_name_ =
        attr.relation + "." + rel->attr_names[static_cast<size_t>(attr.position - 1)];
    if (base.vtype_index(overlay_type_name_) >= 0)
      fail_validation("vertex type '" + overlay_type_name_ + "' already exists");
    overlay_base_type_ = base.vtype_index(attr.relation);
    if (overlay_base_type_ < 0) fail_runtime("relation '" + attr.relation + "' has no vertex type");
    tokens_ = std::move(col.distinct);
    row_value_.assign(col.tokens.size(), -1);
    value_rows_.resize(tokens_.size());
    for (size_t r = 0; r < col.tokens.size(); ++r) {
      if (!col.tokens[r]) continue;
      int vi = static_cast<int>(std::lower_bound(tokens_.begin(), tokens_.end(), *col.tokens[r]) -
                                tokens_.begin());
      row_value_[r] = vi;
      value_rows_[static_cast<size_t>(vi)].push_back(static_cast<int>(r));
    }
  }

  const HeteroGraph& base() const { return *base_; }
  bool has_overlay() const { return has_overlay_; }
  const AttributeRef& overlay_attribute() const { return attr_; }

  // The overlay value type takes the next type index after the base types.
  int overlay_type() const { return static_cast<int>(base_->vtypes.size()); }
  int overlay_base_type() const { return overlay_base_type_; }
  int type_count() const {
    return static_cast<int>(base_->vtypes.size()) + (has_overlay_ ? 1 : 0);
  }

  int vertex_count(int type) const {
    if (has_overlay_ && type == overlay_type()) return static_cast<int>(tokens_.size());
    return base_->vtypes[static_cast<size_t>(type)].size();
  }

  std::string type_name(int type) const {
    if (has_overlay_ && type == overlay_type()) return overlay_type_name_;
    return base_->vtypes[static_cast<size_t>(type)].name;
  }

  std::string vertex_id(VertexRef v) const {
    if (has_overlay_ && v.type == overlay_type()) return tokens_[static_cast<size_t>(v.index)];
    return base_->vtypes[static_cast<size_t>(v.type)].ids[static_cast<size_t>(v.index)];
  }

  // Row index -> overlay value index, -1 when the attribute is missing.
  int overlay_value_of_row(int row) const {
    if (row < 0 || row >= static_cast<int>(row_value_.size())) return -1;
    return row_value_[static_cast<size_t>(row)];
  }
  const std::vector<int>& overlay_rows_of_value(int value_index) const {
    return value_rows_[static_cast<size_t>(value_index)];
  }
  const std::vector<std::string>& overlay_tokens() const { return tokens_; }

  template <typename Fn>
  void for_each_neighbor(VertexRef u, Fn&& fn) const {
    if (has_overlay_ && u.type == overlay_type()) {
      for (int row : value_rows_[static_cast<size_t>(u.index)])
        fn(VertexRef{overlay_base_type_, row});
      return;
    }
    for (const auto& e : base_->etypes) {
      if (e.src_type == u.type)
        for (int dst : e.out_of(u.index)) fn(VertexRef{e.dst_type, dst});
      if (e.dst_type == u.type)
        for (int src : e.into(u.index)) fn(VertexRef{e.src_type, src});
    }
    if (has_overlay_ && u.type == overlay_base_type_) {
      int vi = overlay_value_of_row(u.index);
      if (vi >= 0) fn(VertexRef{overlay_type(), vi});
    }
  }

  // Sorted (type name, id) pairs of all neighbors, duplicates kept. Matches
  // the materialized graph's multiset for equal promotions.
  std::vector<std::pair<std::string, std::string>> neighbor_keys(VertexRef u) const {
    std::vector<std::pair<std::string, std::string>> out;
    for_each_neighbor(u, [&](VertexRef v) { out.emplace_back(type_name(v.type), vertex_id(v)); });
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  const HeteroGraph* base_;
  bool has_overlay_ = false;
  AttributeRef attr_;
  std::string overlay_type_name_;
  int overlay_base_type_ = -1;
  std::vector<std::string> tokens_;
  std::vector<int> row_value_;
  std::vector<std::vector<int>> value_rows_;
};

inline GraphView promote_overlay(const HeteroGraph& g, const Database& db,
                                 const AttributeRef& attr, const BinPolicy& bins = {}) {
  return GraphView(g, db, attr, bins);
}

// Reusable visited-stamps for repeated traversals over views of the same
// shape; avoids an allocation per source vertex.
class KhopWorkspace {
 public:
  void prepare(const GraphView& view) {
    size_t types = static_cast<size_t>(view.type_count());
    if (stamps_.size() < types) stamps_.resize(types);
    for (size_t t = 0; t < types; ++t) {
      size_t n = static_cast<size_t>(view.vertex_count(static_cast<int>(t)));
      if (stamps_[t].size() < n) stamps_[t].assign(n, 0);
    }
  }

  bool mark(VertexRef v) {
    uint32_t& s = stamps_[static_cast<size_t>(v.type)][static_cast<size_t>(v.index)];
    if (s == cur_) return false;
    s = cur_;
    return true;
  }

  void next_round() { ++cur_; }

 private:
  std::vector<std::vector<uint32_t>> stamps_;
  uint32_t cur_ = 0;
};

// Breadth-first collection of every vertex within `depth` hops of `src`
// (edges traversed both ways), src itself included. Calls fn(v, dist).
template <typename Fn>
void visit_khop(const GraphView& view, KhopWorkspace& ws, VertexRef src, int depth, Fn&& fn) {
  ws.prepare(view);
  ws.next_round();
  std::vector<VertexRef> frontier{src};
  ws.mark(src);
  fn(src, 0);
  std::vector<VertexRef> next;
  for (int d = 1; d <= depth && !frontier.empty(); ++d) {
    next.clear();
    for (VertexRef u : frontier)
      view.for_each_neighbor(u, [&](VertexRef v) {
        if (ws.mark(v)) {
          next.push_back(v);
          fn(v, d);
        }
      });
    std::swap(frontier, next);
  }
}

inline std::vector<VertexRef> khop(const GraphView& view, KhopWorkspace& ws, VertexRef src,
                                   int depth) {
  std::vector<VertexRef> out;
  visit_khop(view, ws, src, depth, [&](VertexRef v, int) { out.push_back(v); });
  return out;
}

}  // namespace augraph
