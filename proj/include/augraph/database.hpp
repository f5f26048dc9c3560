#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "augraph/csv.hpp"
#include "augraph/schema.hpp"

namespace augraph {

using Tuple = std::vector<Value>;
using Table = std::vector<Tuple>;

// Name of the task-encoding relation added by attach_task. Reserved: user
// schemas may not declare it.
inline constexpr const char* kTrainRelation = "_train";

enum class Split : uint8_t { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail_validation("task file: split must be one of train/val/test, got '" + s + "'");
}

struct TaskSpec {
  std::string target_relation;
  std::vector<std::string> classes;              // sorted, distinct
  std::map<std::string, std::string> labels;     // primary key -> label
  std::map<std::string, Split> split;            // primary key -> split

  bool binary() const { return classes.size() == 2; }

  int class_index(const std::string& label) const {
    for (size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == label) return static_cast<int>(i);
    return -1;
  }

  size_t split_size(Split s) const {
    size_t n = 0;
    for (const auto& [k, v] : split)
      if (v == s) ++n;
    return n;
  }
};

struct LoadOptions {
  // Strict mode rejects missing foreign-key values, matching the textbook
  // constraint; lenient mode admits them with no resulting graph edge.
  bool strict_fk = false;
};

struct Database {
  Schema schema;
  std::vector<Table> tables;  // aligned with schema.relations
  bool task_attached = false;

  const Table& table(const std::string& relation) const {
    int idx = schema.index_of(relation);
    if (idx < 0) fail_validation("unknown relation '" + relation + "'");
    return tables[static_cast<size_t>(idx)];
  }

  Table& table(const std::string& relation) {
    int idx = schema.index_of(relation);
    if (idx < 0) fail_validation("unknown relation '" + relation + "'");
    return tables[static_cast<size_t>(idx)];
  }

  // key string -> row index, for one relation
  std::unordered_map<std::string, int> key_index(const std::string& relation) const {
    const Table& t = table(relation);
    std::unordered_map<std::string, int> idx;
    idx.reserve(t.size());
    for (size_t i = 0; i < t.size(); ++i) idx.emplace(t[i][0].s, static_cast<int>(i));
    return idx;
  }
};

// Loads one CSV per relation and validates both key constraints. CSVs must
// carry a header row whose names match the declared attr_names in order.
inline Database load_database(const Schema& schema,
                              const std::map<std::string, std::string>& table_sources,
                              const LoadOptions& opts = {}) {
  Database db;
  db.schema = schema;
  db.tables.resize(schema.relations.size());

  for (size_t ri = 0; ri < schema.relations.size(); ++ri) {
    const RelationDecl& rel = schema.relations[ri];
    auto it = table_sources.find(rel.name);
    if (it == table_sources.end())
      fail_validation("no table source for relation '" + rel.name + "'",
                      {{"relation", rel.name}});
    auto records = csv::parse(it->second);
    if (records.empty())
      fail_validation("table for relation '" + rel.name + "' is missing its header row",
                      {{"relation", rel.name}});
    const auto& header = records[0];
    if (static_cast<int>(header.size()) != rel.arity())
      fail_validation("table '" + rel.name + "': header has " + std::to_string(header.size()) +
                          " columns, schema declares " + std::to_string(rel.arity()),
                      {{"relation", rel.name}});
    for (int c = 0; c < rel.arity(); ++c) {
      if (trim(header[static_cast<size_t>(c)]) != rel.attr_names[static_cast<size_t>(c)])
        fail_validation("table '" + rel.name + "': header column " + std::to_string(c + 1) +
                            " is '" + header[static_cast<size_t>(c)] + "', expected '" +
                            rel.attr_names[static_cast<size_t>(c)] + "'",
                        {{"relation", rel.name}, {"column", c + 1}});
    }
    Table& tab = db.tables[ri];
    tab.reserve(records.size() - 1);
    for (size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      if (static_cast<int>(rec.size()) != rel.arity())
        fail_validation("table '" + rel.name + "': row " + std::to_string(r) + " has " +
                            std::to_string(rec.size()) + " fields, expected " +
                            std::to_string(rel.arity()),
                        {{"relation", rel.name}, {"row", r}});
      Tuple tup(static_cast<size_t>(rel.arity()));
      for (int c = 0; c < rel.arity(); ++c) {
        const AttrType& type = rel.attr_types[static_cast<size_t>(c)];
        bool was_empty = false;
        Value v;
        try {
          v = parse_cell(rec[static_cast<size_t>(c)], type, was_empty);
        } catch (const Error& e) {
          fail_validation("table '" + rel.name + "', row " + std::to_string(r) + ", column " +
                              std::to_string(c + 1) + ": " + e.what(),
                          {{"relation", rel.name}, {"row", r}, {"column", c + 1}});
        }
        if (was_empty && !type.nullable)
          fail_validation("table '" + rel.name + "', row " + std::to_string(r) + ", column " +
                              std::to_string(c + 1) + ": empty cell for non-missing-allowed type",
                          {{"relation", rel.name}, {"row", r}, {"column", c + 1}});
        tup[static_cast<size_t>(c)] = std::move(v);
      }
      tab.push_back(std::move(tup));
    }
  }

  // Primary-key constraint: position-1 values pairwise distinct.
  for (size_t ri = 0; ri < schema.relations.size(); ++ri) {
    std::unordered_set<std::string> keys;
    keys.reserve(db.tables[ri].size());
    for (const auto& tup : db.tables[ri]) {
      if (!keys.insert(tup[0].s).second)
        fail_validation("duplicate primary key '" + tup[0].s + "' in relation '" +
                            schema.relations[ri].name + "'",
                        {{"relation", schema.relations[ri].name}, {"key", tup[0].s}});
    }
  }

  // Referential integrity: non-missing FK values must resolve; missing FK
  // values are rejected only under strict_fk.
  for (const auto& link : schema.links) {
    auto target_keys = db.key_index(link.target);
    const Table& src = db.table(link.relation);
    for (size_t r = 0; r < src.size(); ++r) {
      const Value& v = src[r][static_cast<size_t>(link.position - 1)];
      if (v.is_missing()) {
        if (opts.strict_fk)
          fail_validation("referential-integrity violation: missing foreign key under strict "
                          "mode, link (" +
                              link.relation + ", " + std::to_string(link.position) + ", " +
                              link.target + "), row " + std::to_string(r + 1),
                          {{"relation", link.relation},
                           {"position", link.position},
                           {"target", link.target},
                           {"row", r + 1}});
        continue;
      }
      if (!target_keys.count(v.s))
        fail_validation("referential-integrity violation: link (" + link.relation + ", " +
                            std::to_string(link.position) + ", " + link.target + "), tuple with key '" +
                            src[r][0].s + "' references absent key '" + v.s + "'",
                        {{"relation", link.relation},
                         {"position", link.position},
                         {"target", link.target},
                         {"key", src[r][0].s},
                         {"value", v.s}});
    }
  }
  return db;
}

// Task file: CSV with columns key,label,split.
inline TaskSpec parse_task_csv(const std::string& target_relation, std::string_view text) {
  TaskSpec task;
  task.target_relation = target_relation;
  auto records = csv::parse(text);
  if (records.empty()) fail_validation("task file: empty");
  const auto& header = records[0];
  if (header.size() != 3 || trim(header[0]) != "key" || trim(header[1]) != "label" ||
      trim(header[2]) != "split")
    fail_validation("task file: header must be key,label,split");
  std::set<std::string> class_set;
  for (size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != 3)
      fail_validation("task file: row " + std::to_string(r) + " has " +
                      std::to_string(records[r].size()) + " fields, expected 3");
    std::string key = trim(records[r][0]);
    std::string label = trim(records[r][1]);
    Split sp = parse_split(trim(records[r][2]));
    if (task.labels.count(key))
      fail_validation("task file: key '" + key + "' labeled twice", {{"key", key}});
    task.labels[key] = label;
    task.split[key] = sp;
    class_set.insert(label);
  }
  task.classes.assign(class_set.begin(), class_set.end());
  if (task.classes.size() < 2) fail_validation("task file: needs at least two distinct labels");
  return task;
}

// Encodes the prediction task relationally: adds relation _train of arity 2
// holding (key, label) pairs for the train split, linked to the target's
// primary key. The link sits at position 1 by construction; that position
// doubles as _train's own primary key. Val/test memberships stay in the
// TaskSpec and never enter the table.
inline Database attach_task(const Database& db, const TaskSpec& task) {
  if (db.schema.find(kTrainRelation))
    fail_validation(std::string("task already attached: relation '") + kTrainRelation +
                    "' exists");
  const RelationDecl* target = db.schema.find(task.target_relation);
  if (!target) fail_validation("task target relation '" + task.target_relation + "' not found");

  auto target_keys = db.key_index(task.target_relation);
  for (const auto& [key, label] : task.labels) {
    (void)label;
    if (!target_keys.count(key))
      fail_validation("labeled key '" + key + "' absent from target table '" +
                          task.target_relation + "'",
                      {{"key", key}, {"relation", task.target_relation}});
  }

  Database out = db;
  RelationDecl train_rel;
  train_rel.name = kTrainRelation;
  train_rel.attr_names = {"key", "label"};
  AttrType key_type;
  key_type.kind = AttrType::Kind::Key;
  AttrType label_type;
  label_type.kind = AttrType::Kind::Categorical;
  train_rel.attr_types = {key_type, label_type};
  out.schema.relations.push_back(train_rel);
  out.schema.links.push_back({kTrainRelation, 1, task.target_relation});

  Table train_table;
  // Iterate the target table so _train row order is deterministic.
  for (const auto& tup : db.table(task.target_relation)) {
    auto it = task.split.find(tup[0].s);
    if (it == task.split.end() || it->second != Split::Train) continue;
    train_table.push_back({Value::str(tup[0].s), Value::str(task.labels.at(tup[0].s))});
  }
  if (train_table.empty()) fail_validation("empty training set");
  out.tables.push_back(std::move(train_table));
  out.task_attached = true;
  return out;
}

}  // namespace augraph
