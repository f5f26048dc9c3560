#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "augraph/binning.hpp"
#include "augraph/database.hpp"
#include "augraph/hash.hpp"

namespace augraph {

// Vertex types are either tuple types (one per relation, vertex per row, id =
// primary key) or value types added by a promotion (vertex per distinct
// binned value, id = the value token). Indices are dense and stable: row
// order for tuples, sorted token order for values.
struct VertexType {
  std::string name;
  bool is_value = false;
  AttributeRef source;  // which attribute produced this type (value types only)
  std::vector<std::string> ids;
  std::vector<json> payloads;
  std::map<std::string, int> by_id;

  int size() const { return static_cast<int>(ids.size()); }

  int add(std::string id, json payload) {
    int idx = static_cast<int>(ids.size());
    by_id.emplace(id, idx);
    ids.push_back(std::move(id));
    payloads.push_back(std::move(payload));
    return idx;
  }

  int index_of(const std::string& id) const {
    auto it = by_id.find(id);
    return it == by_id.end() ? -1 : it->second;
  }
};

struct EdgeType {
  std::string name;
  int src_type = -1;
  int dst_type = -1;
  std::vector<std::pair<int, int>> edges;  // (src index, dst index)
  std::vector<std::vector<int>> out_adj;   // src index -> dst indices
  std::vector<std::vector<int>> in_adj;    // dst index -> src indices

  void add_edge(int src, int dst) {
    edges.emplace_back(src, dst);
    if (src >= static_cast<int>(out_adj.size())) out_adj.resize(static_cast<size_t>(src) + 1);
    if (dst >= static_cast<int>(in_adj.size())) in_adj.resize(static_cast<size_t>(dst) + 1);
    out_adj[static_cast<size_t>(src)].push_back(dst);
    in_adj[static_cast<size_t>(dst)].push_back(src);
  }

  const std::vector<int>& out_of(int src) const {
    static const std::vector<int> empty;
    if (src < 0 || src >= static_cast<int>(out_adj.size())) return empty;
    return out_adj[static_cast<size_t>(src)];
  }

  const std::vector<int>& into(int dst) const {
    static const std::vector<int> empty;
    if (dst < 0 || dst >= static_cast<int>(in_adj.size())) return empty;
    return in_adj[static_cast<size_t>(dst)];
  }
};

struct PromotionRecord {
  AttributeRef attribute;
  int value_vertex_count = 0;
  int edge_count = 0;
  int order_index = 0;

  json to_json(const Schema& schema) const {
    return {{"attribute", attribute.to_json(schema)},
            {"value_vertex_count", value_vertex_count},
            {"edge_count", edge_count},
            {"order_index", order_index}};
  }
};

class HeteroGraph {
 public:
  std::vector<VertexType> vtypes;
  std::vector<EdgeType> etypes;
  std::vector<PromotionRecord> promotions;

  int vtype_index(const std::string& name) const {
    for (size_t i = 0; i < vtypes.size(); ++i)
      if (vtypes[i].name == name) return static_cast<int>(i);
    return -1;
  }

  int etype_index(const std::string& name) const {
    for (size_t i = 0; i < etypes.size(); ++i)
      if (etypes[i].name == name) return static_cast<int>(i);
    return -1;
  }

  size_t vertex_count() const {
    size_t n = 0;
    for (const auto& t : vtypes) n += t.ids.size();
    return n;
  }

  size_t edge_count() const {
    size_t n = 0;
    for (const auto& e : etypes) n += e.edges.size();
    return n;
  }

  bool has_promotion(const AttributeRef& attr) const {
    for (const auto& p : promotions)
      if (p.attribute == attr) return true;
    return false;
  }

  // Canonical line-oriented export: every vertex as `V <type> <id> <payload>`
  // sorted by (type, payload), then every edge as
  // `E <etype> <srctype>:<srcid> <dsttype>:<dstid>` sorted lexicographically.
  // Byte-identical for equal graphs regardless of construction order.
  std::string export_text() const {
    std::vector<std::string> vlines;
    vlines.reserve(vertex_count());
    for (const auto& t : vtypes) {
      std::vector<std::pair<std::string, size_t>> order;
      order.reserve(t.ids.size());
      for (size_t i = 0; i < t.ids.size(); ++i) order.emplace_back(t.payloads[i].dump(), i);
      std::sort(order.begin(), order.end());
      for (const auto& [payload, i] : order)
        vlines.push_back("V " + t.name + " " + t.ids[i] + " " + payload);
    }
    std::sort(vlines.begin(), vlines.end(),
              [&](const std::string& a, const std::string& b) { return a < b; });

    std::vector<std::string> elines;
    elines.reserve(edge_count());
    for (const auto& e : etypes) {
      const VertexType& st = vtypes[static_cast<size_t>(e.src_type)];
      const VertexType& dt = vtypes[static_cast<size_t>(e.dst_type)];
      for (const auto& [s, d] : e.edges)
        elines.push_back("E " + e.name + " " + st.name + ":" + st.ids[static_cast<size_t>(s)] +
                         " " + dt.name + ":" + dt.ids[static_cast<size_t>(d)]);
    }
    std::sort(elines.begin(), elines.end());

    std::string out;
    for (const auto& l : vlines) {
      out += l;
      out += '\n';
    }
    for (const auto& l : elines) {
      out += l;
      out += '\n';
    }
    return out;
  }

  std::string fingerprint() const { return hex64(fnv1a64(export_text())); }

  json manifest(const Schema& schema) const {
    json vt = json::array();
    for (const auto& t : vtypes) {
      json entry = {{"name", t.name}, {"count", t.size()}, {"value_type", t.is_value}};
      if (t.is_value) entry["attribute"] = t.source.to_json(schema);
      vt.push_back(entry);
    }
    json et = json::array();
    for (const auto& e : etypes)
      et.push_back({{"name", e.name},
                    {"src", vtypes[static_cast<size_t>(e.src_type)].name},
                    {"dst", vtypes[static_cast<size_t>(e.dst_type)].name},
                    {"count", e.edges.size()}});
    json pr = json::array();
    for (const auto& p : promotions) pr.push_back(p.to_json(schema));
    return {{"vertex_types", vt},
            {"edge_types", et},
            {"promotions", pr},
            {"vertex_count", vertex_count()},
            {"edge_count", edge_count()},
            {"fingerprint", fingerprint()}};
  }
};

namespace detail {

inline json tuple_payload(const RelationDecl& rel, const Tuple& tup) {
  json obj = json::object();
  for (size_t i = 0; i < tup.size(); ++i) obj[rel.attr_names[i]] = tup[i].to_json();
  return obj;
}

}  // namespace detail

// One vertex per tuple per relation; one typed directed edge per satisfied
// foreign-key reference, child row to referenced row.
inline HeteroGraph build_reg(const Database& db) {
  HeteroGraph g;
  g.vtypes.reserve(db.schema.relations.size());
  for (size_t ri = 0; ri < db.schema.relations.size(); ++ri) {
    const RelationDecl& rel = db.schema.relations[ri];
    VertexType vt;
    vt.name = rel.name;
    const Table& tab = db.tables[ri];
    for (const auto& tup : tab) vt.add(tup[0].s, detail::tuple_payload(rel, tup));
    g.vtypes.push_back(std::move(vt));
  }

  for (const auto& link : db.schema.links) {
    const RelationDecl* rel = db.schema.find(link.relation);
    int src_t = g.vtype_index(link.relation);
    int dst_t = g.vtype_index(link.target);
    EdgeType et;
    et.name = link.relation + "." + rel->attr_names[static_cast<size_t>(link.position - 1)];
    et.src_type = src_t;
    et.dst_type = dst_t;
    const Table& tab = db.table(link.relation);
    const VertexType& dst_vt = g.vtypes[static_cast<size_t>(dst_t)];
    for (size_t r = 0; r < tab.size(); ++r) {
      const Value& fk = tab[r][static_cast<size_t>(link.position - 1)];
      if (fk.is_missing()) continue;
      int parent = dst_vt.index_of(fk.s);
      if (parent < 0)
        fail_runtime("dangling reference escaped load validation: " + link.relation + " row " +
                     std::to_string(r));
      et.add_edge(static_cast<int>(r), parent);
    }
    g.etypes.push_back(std::move(et));
  }
  return g;
}

// Adds a value-vertex type for one attribute: a vertex per distinct binned
// value, an edge from each value vertex to every base row carrying it. The
// input graph is left untouched.
inline HeteroGraph promote(const HeteroGraph& g, const Database& db, const AttributeRef& attr,
                           const BinPolicy& bins = {},
                           std::vector<std::string>* warnings = nullptr) {
  if (g.has_promotion(attr))
    fail_validation("attribute " + attr.display(db.schema) + " is already promoted");
  BinnedColumn col = binned_column(db, attr, bins);
  if (col.non_missing == 0)
    fail_validation("attribute " + attr.display(db.schema) +
                    " has no non-missing values; nothing to promote");
  const RelationDecl* rel = db.schema.find(attr.relation);
  std::string type_name =
      attr.relation + "." + rel->attr_names[static_cast<size_t>(attr.position - 1)];
  if (g.vtype_index(type_name) >= 0)
    fail_validation("vertex type '" + type_name + "' already exists");
  if (warnings && col.distinct.size() * 2 > col.non_missing)
    warnings->push_back("attribute " + attr.display(db.schema) + " is near-key: " +
                        std::to_string(col.distinct.size()) + " distinct values over " +
                        std::to_string(col.non_missing) + " rows");

  HeteroGraph out = g;
  VertexType vt;
  vt.name = type_name;
  vt.is_value = true;
  vt.source = attr;
  for (const auto& tok : col.distinct) vt.add(tok, json{{"value", tok}});
  int value_t = static_cast<int>(out.vtypes.size());
  out.vtypes.push_back(std::move(vt));

  int base_t = out.vtype_index(attr.relation);
  if (base_t < 0) fail_runtime("relation '" + attr.relation + "' has no vertex type");

  EdgeType et;
  et.name = type_name;
  et.src_type = value_t;
  et.dst_type = base_t;
  for (size_t r = 0; r < col.tokens.size(); ++r) {
    if (!col.tokens[r]) continue;
    int vi = col.token_id(*col.tokens[r]);
    et.add_edge(vi, static_cast<int>(r));
  }
  int edge_count = static_cast<int>(et.edges.size());
  out.etypes.push_back(std::move(et));

  PromotionRecord rec;
  rec.attribute = attr;
  rec.value_vertex_count = static_cast<int>(col.distinct.size());
  rec.edge_count = edge_count;
  rec.order_index = static_cast<int>(out.promotions.size()) + 1;
  out.promotions.push_back(rec);
  return out;
}

inline HeteroGraph promote_all(const HeteroGraph& g, const Database& db,
                               const std::vector<AttributeRef>& attrs, const BinPolicy& bins = {},
                               std::vector<std::string>* warnings = nullptr) {
  HeteroGraph out = g;
  for (const auto& a : attrs) out = promote(out, db, a, bins, warnings);
  return out;
}

}  // namespace augraph
