#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "augraph/database.hpp"
#include "augraph/hash.hpp"
#include "augraph/hetero_graph.hpp"

namespace augraph {

inline constexpr uint64_t kEmbeddingBuckets = 1ULL << 16;

// Hash bucket for one categorical (attribute, value) pair. Qualified by
// relation and attribute name so equal tokens in different columns land in
// independent buckets (up to hash collisions).
inline uint64_t embedding_bucket(const std::string& relation, const std::string& attr,
                                 const std::string& value) {
  return fnv1a64(relation + "." + attr + "=" + value) % kEmbeddingBuckets;
}

struct NumericStat {
  double mean = 0.0;
  double stddev = 0.0;
};

// What the encoder learns about a database: which embedding buckets exist
// and how numeric columns are standardized. Derived deterministically from
// the database, independent of any particular graph over it.
struct EncoderSpec {
  int width = 32;
  std::vector<uint64_t> buckets;                 // sorted, distinct
  std::map<std::string, NumericStat> numeric;    // "<relation>.<attr>" -> stats
  std::map<std::string, int> numeric_channel;    // "<relation>.<attr>" -> fixed channel

  int bucket_row(uint64_t bucket) const {
    auto it = std::lower_bound(buckets.begin(), buckets.end(), bucket);
    if (it == buckets.end() || *it != bucket) return -1;
    return static_cast<int>(it - buckets.begin());
  }
};

inline EncoderSpec build_encoder_spec(const Database& db, int width) {
  if (width < 2) fail_validation("encoder width must be at least 2");
  EncoderSpec spec;
  spec.width = width;
  std::set<uint64_t> buckets;
  for (size_t ri = 0; ri < db.schema.relations.size(); ++ri) {
    const RelationDecl& rel = db.schema.relations[ri];
    if (rel.name == kTrainRelation) continue;  // label carrier, never encoded
    const Table& tab = db.tables[ri];
    int numeric_count = 0;
    for (int p = 2; p <= rel.arity(); ++p) {
      const AttrType& t = rel.attr_types[static_cast<size_t>(p - 1)];
      if (t.is_key() || t.is_fk()) continue;
      size_t col = static_cast<size_t>(p - 1);
      std::string qual = rel.name + "." + rel.attr_names[col];
      if (t.kind == AttrType::Kind::Categorical) {
        for (const auto& tup : tab)
          if (!tup[col].is_missing())
            buckets.insert(embedding_bucket(rel.name, rel.attr_names[col], tup[col].s));
      } else {
        double sum = 0.0, sq = 0.0;
        size_t n = 0;
        for (const auto& tup : tab) {
          if (tup[col].is_missing()) continue;
          double x = t.kind == AttrType::Kind::Integer ? static_cast<double>(tup[col].i)
                                                       : tup[col].d;
          sum += x;
          sq += x * x;
          ++n;
        }
        NumericStat st;
        if (n > 0) {
          st.mean = sum / static_cast<double>(n);
          double var = sq / static_cast<double>(n) - st.mean * st.mean;
          st.stddev = var > 0.0 ? std::sqrt(var) : 0.0;
        }
        spec.numeric[qual] = st;
        // channel width - 1 is reserved for the degree channel
        spec.numeric_channel[qual] = numeric_count % (width - 1);
        ++numeric_count;
      }
    }
  }
  spec.buckets.assign(buckets.begin(), buckets.end());
  return spec;
}

// Per-graph encoding: the fixed (non-learned) feature part of every vertex,
// plus hooks for the learned parts (which embedding rows and type constant
// each vertex picks up). Layer-0 activations are assembled at forward time
// as fixed + type constant + sum of embedding rows.
struct GraphEncoding {
  int width = 32;
  std::vector<std::vector<double>> fixed;             // [type] n*width, row-major
  std::vector<std::vector<std::vector<int>>> emb_rows;  // [type][vertex] -> spec bucket rows
};

inline GraphEncoding encode_graph(const HeteroGraph& g, const Database& db,
                                  const EncoderSpec& spec) {
  GraphEncoding enc;
  enc.width = spec.width;
  size_t F = static_cast<size_t>(spec.width);
  enc.fixed.resize(g.vtypes.size());
  enc.emb_rows.resize(g.vtypes.size());

  // total degree per vertex, both directions over every edge type
  std::vector<std::vector<double>> degree(g.vtypes.size());
  for (size_t t = 0; t < g.vtypes.size(); ++t)
    degree[t].assign(g.vtypes[t].ids.size(), 0.0);
  for (const auto& e : g.etypes)
    for (const auto& [s, d] : e.edges) {
      degree[static_cast<size_t>(e.src_type)][static_cast<size_t>(s)] += 1.0;
      degree[static_cast<size_t>(e.dst_type)][static_cast<size_t>(d)] += 1.0;
    }

  for (size_t t = 0; t < g.vtypes.size(); ++t) {
    const VertexType& vt = g.vtypes[t];
    size_t n = vt.ids.size();
    enc.fixed[t].assign(n * F, 0.0);
    enc.emb_rows[t].resize(n);

    // degree channel, standardized within the type
    double mean = 0.0, sq = 0.0;
    for (double dv : degree[t]) {
      mean += dv;
      sq += dv * dv;
    }
    if (n > 0) {
      mean /= static_cast<double>(n);
      double var = sq / static_cast<double>(n) - mean * mean;
      double sd = var > 0.0 ? std::sqrt(var) : 0.0;
      for (size_t v = 0; v < n; ++v)
        enc.fixed[t][v * F + (F - 1)] = sd > 1e-12 ? (degree[t][v] - mean) / sd : 0.0;
    }

    if (vt.is_value || vt.name == kTrainRelation) continue;  // key-only types

    int ri = db.schema.index_of(vt.name);
    if (ri < 0) fail_runtime("vertex type '" + vt.name + "' has no backing relation");
    const RelationDecl& rel = db.schema.relations[static_cast<size_t>(ri)];
    const Table& tab = db.tables[static_cast<size_t>(ri)];
    if (tab.size() != n) fail_runtime("vertex count mismatch for relation '" + vt.name + "'");

    for (int p = 2; p <= rel.arity(); ++p) {
      const AttrType& ty = rel.attr_types[static_cast<size_t>(p - 1)];
      if (ty.is_key() || ty.is_fk()) continue;
      size_t col = static_cast<size_t>(p - 1);
      std::string qual = rel.name + "." + rel.attr_names[col];
      if (ty.kind == AttrType::Kind::Categorical) {
        for (size_t v = 0; v < n; ++v) {
          if (tab[v][col].is_missing()) continue;
          int row = spec.bucket_row(embedding_bucket(rel.name, rel.attr_names[col], tab[v][col].s));
          if (row >= 0) enc.emb_rows[t][v].push_back(row);
        }
      } else {
        const NumericStat& st = spec.numeric.at(qual);
        size_t ch = static_cast<size_t>(spec.numeric_channel.at(qual));
        for (size_t v = 0; v < n; ++v) {
          if (tab[v][col].is_missing()) continue;
          double x = ty.kind == AttrType::Kind::Integer ? static_cast<double>(tab[v][col].i)
                                                        : tab[v][col].d;
          enc.fixed[t][v * F + ch] += st.stddev > 1e-12 ? (x - st.mean) / st.stddev : 0.0;
        }
      }
    }
  }
  return enc;
}

}  // namespace augraph
