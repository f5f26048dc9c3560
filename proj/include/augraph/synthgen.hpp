#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "augraph/binning.hpp"
#include "augraph/database.hpp"
#include "augraph/rng.hpp"

namespace augraph {

// Synthetic benchmark generator. Relational mode emits a three-table star
// (customer and product dimensions referenced by an order fact table) whose
// binary label is a noisy majority vote over three designated categorical
// attributes; tabular mode collapses everything onto one table. Ground truth
// names the three label-generating attributes so recovery can be checked.
struct SynthConfig {
  int n_target = 2000;
  int n_parent = 100;
  int n_noise = 5;
  int cardinality = 6;
  double epsilon = 0.05;
  double train_frac = 0.7;
  double val_frac = 0.15;
  double test_frac = 0.15;
  uint64_t seed = 42;
  bool tabular = false;
  bool redundant_third = false;  // third signal column duplicates the first

  void validate() const {
    if (n_target < 3) fail_validation("synth: n_target must be >= 3");
    if (n_parent < 1) fail_validation("synth: n_parent must be >= 1");
    if (n_noise < 0) fail_validation("synth: n_noise must be >= 0");
    if (cardinality < 2) fail_validation("synth: cardinality must be >= 2");
    if (epsilon < 0.0 || epsilon >= 1.0) fail_validation("synth: epsilon must be in [0, 1)");
    if (train_frac <= 0.0 || val_frac <= 0.0 || test_frac <= 0.0)
      fail_validation("synth: split fractions must be positive");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
      fail_validation("synth: split fractions must sum to 1");
    if (redundant_third && !tabular)
      fail_validation("synth: redundant_third requires tabular mode "
                      "(the relational signals live in tables of different sizes)");
  }

  json to_json() const {
    return {{"n_target", n_target},   {"n_parent", n_parent},
            {"n_noise", n_noise},     {"cardinality", cardinality},
            {"epsilon", epsilon},     {"train_frac", train_frac},
            {"val_frac", val_frac},   {"test_frac", test_frac},
            {"seed", seed},           {"tabular", tabular},
            {"redundant_third", redundant_third}};
  }

  static SynthConfig from_json(const json& j) {
    SynthConfig cfg;
    if (j.contains("n_target")) cfg.n_target = j.at("n_target").get<int>();
    if (j.contains("n_parent")) cfg.n_parent = j.at("n_parent").get<int>();
    if (j.contains("n_noise")) cfg.n_noise = j.at("n_noise").get<int>();
    if (j.contains("cardinality")) cfg.cardinality = j.at("cardinality").get<int>();
    if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
    if (j.contains("train_frac")) cfg.train_frac = j.at("train_frac").get<double>();
    if (j.contains("val_frac")) cfg.val_frac = j.at("val_frac").get<double>();
    if (j.contains("test_frac")) cfg.test_frac = j.at("test_frac").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("tabular")) cfg.tabular = j.at("tabular").get<bool>();
    if (j.contains("redundant_third"))
      cfg.redundant_third = j.at("redundant_third").get<bool>();
    cfg.validate();
    return cfg;
  }
};

struct SynthOutput {
  std::string schema_text;
  std::map<std::string, std::string> tables;  // relation name -> CSV text
  std::string task_csv;
  std::string target_relation;
  std::vector<AttributeRef> ground_truth;
};

namespace synth_detail {

inline bool in_designated_half(int value_index, int cardinality) {
  return 2 * value_index < cardinality;
}

// One value column: uniform draws from its own named stream, so adding or
// removing a column never shifts any other column's values.
inline std::vector<int> draw_column(uint64_t seed, const std::string& relation,
                                    const std::string& attr, int rows, int cardinality) {
  Rng rng = substream(seed, "attr:" + relation + "." + attr);
  std::vector<int> vals(static_cast<size_t>(rows));
  for (auto& v : vals) v = static_cast<int>(rng.next_below(static_cast<uint64_t>(cardinality)));
  return vals;
}

}  // namespace synth_detail

inline SynthOutput generate(const SynthConfig& cfg) {
  using namespace synth_detail;
  cfg.validate();
  SynthOutput out;

  auto vtok = [](int idx) { return "v" + std::to_string(idx); };

  struct Column {
    std::string name;
    std::vector<int> values;
  };
  // relation -> (key prefix, columns); insertion order fixed below
  std::vector<std::string> rel_order;
  std::map<std::string, std::vector<Column>> columns;
  std::map<std::string, int> rel_rows;

  std::vector<int> order_customer, order_product;  // fk row indices
  std::array<std::pair<std::string, std::string>, 3> signal;  // (relation, attr) per indicator

  if (cfg.tabular) {
    out.target_relation = "record";
    rel_order = {"record"};
    rel_rows["record"] = cfg.n_target;
    auto& cols = columns["record"];
    cols.push_back({"sig0", draw_column(cfg.seed, "record", "sig0", cfg.n_target, cfg.cardinality)});
    cols.push_back({"sig1", draw_column(cfg.seed, "record", "sig1", cfg.n_target, cfg.cardinality)});
    cols.push_back({"sig2", cfg.redundant_third
                                ? cols[0].values
                                : draw_column(cfg.seed, "record", "sig2", cfg.n_target,
                                              cfg.cardinality)});
    for (int j = 0; j < cfg.n_noise; ++j) {
      std::string name = "noise" + std::to_string(j);
      cols.push_back({name, draw_column(cfg.seed, "record", name, cfg.n_target, cfg.cardinality)});
    }
    signal = {{{"record", "sig0"}, {"record", "sig1"}, {"record", "sig2"}}};
  } else {
    out.target_relation = "order";
    rel_order = {"customer", "product", "order"};
    rel_rows["customer"] = cfg.n_parent;
    rel_rows["product"] = cfg.n_parent;
    rel_rows["order"] = cfg.n_target;
    columns["customer"].push_back(
        {"sig0", draw_column(cfg.seed, "customer", "sig0", cfg.n_parent, cfg.cardinality)});
    columns["customer"].push_back(
        {"sig1", draw_column(cfg.seed, "customer", "sig1", cfg.n_parent, cfg.cardinality)});
    columns["product"].push_back(
        {"sig2", draw_column(cfg.seed, "product", "sig2", cfg.n_parent, cfg.cardinality)});
    const char* cycle[3] = {"order", "customer", "product"};
    for (int j = 0; j < cfg.n_noise; ++j) {
      std::string rel = cycle[j % 3];
      std::string name = "noise" + std::to_string(j);
      columns[rel].push_back(
          {name, draw_column(cfg.seed, rel, name, rel_rows[rel], cfg.cardinality)});
    }
    signal = {{{"customer", "sig0"}, {"customer", "sig1"}, {"product", "sig2"}}};

    Rng fk_c = substream(cfg.seed, "fk:order.customer_id");
    Rng fk_p = substream(cfg.seed, "fk:order.product_id");
    order_customer.resize(static_cast<size_t>(cfg.n_target));
    order_product.resize(static_cast<size_t>(cfg.n_target));
    for (int i = 0; i < cfg.n_target; ++i) {
      order_customer[static_cast<size_t>(i)] =
          static_cast<int>(fk_c.next_below(static_cast<uint64_t>(cfg.n_parent)));
      order_product[static_cast<size_t>(i)] =
          static_cast<int>(fk_p.next_below(static_cast<uint64_t>(cfg.n_parent)));
    }
  }

  // labels: majority over the three indicators, flipped with probability eps
  auto signal_value = [&](int target_row, int s) {
    const auto& [rel, attr] = signal[static_cast<size_t>(s)];
    int row = target_row;
    if (!cfg.tabular && rel == "customer") row = order_customer[static_cast<size_t>(target_row)];
    if (!cfg.tabular && rel == "product") row = order_product[static_cast<size_t>(target_row)];
    for (const auto& c : columns[rel])
      if (c.name == attr) return c.values[static_cast<size_t>(row)];
    fail_runtime("synth: signal column lookup failed");
  };
  Rng flip = substream(cfg.seed, "label-noise");
  Rng split_rng = substream(cfg.seed, "split");
  std::vector<int> labels(static_cast<size_t>(cfg.n_target));
  std::vector<const char*> splits(static_cast<size_t>(cfg.n_target));
  for (int i = 0; i < cfg.n_target; ++i) {
    int votes = 0;
    for (int s = 0; s < 3; ++s)
      if (in_designated_half(signal_value(i, s), cfg.cardinality)) ++votes;
    int y = votes >= 2 ? 1 : 0;
    if (flip.next_double() < cfg.epsilon) y = 1 - y;
    labels[static_cast<size_t>(i)] = y;
    double u = split_rng.next_double();
    splits[static_cast<size_t>(i)] =
        u < cfg.train_frac ? "train" : (u < cfg.train_frac + cfg.val_frac ? "val" : "test");
  }

  // schema + CSVs
  auto key_of = [](const std::string& rel, int row) {
    return std::string(1, rel[0]) + std::to_string(row + 1);
  };
  std::string schema;
  for (const auto& rel : rel_order) {
    schema += "relation " + rel + "(" + rel + "_id:key";
    if (rel == "order")
      schema += ", customer_id:fk(customer), product_id:fk(product)";
    for (const auto& c : columns[rel]) schema += ", " + c.name + ":cat";
    schema += ")\n";

    std::string csv = rel + "_id";
    if (rel == "order") csv += ",customer_id,product_id";
    for (const auto& c : columns[rel]) csv += "," + c.name;
    csv += "\n";
    for (int r = 0; r < rel_rows[rel]; ++r) {
      csv += key_of(rel, r);
      if (rel == "order") {
        csv += "," + key_of("customer", order_customer[static_cast<size_t>(r)]);
        csv += "," + key_of("product", order_product[static_cast<size_t>(r)]);
      }
      for (const auto& c : columns[rel]) csv += "," + vtok(c.values[static_cast<size_t>(r)]);
      csv += "\n";
    }
    out.tables[rel] = std::move(csv);
  }
  out.schema_text = std::move(schema);

  std::string task = "key,label,split\n";
  for (int i = 0; i < cfg.n_target; ++i)
    task += key_of(out.target_relation, i) + "," + std::to_string(labels[static_cast<size_t>(i)]) +
            "," + splits[static_cast<size_t>(i)] + "\n";
  out.task_csv = std::move(task);

  Schema parsed = parse_schema(out.schema_text);
  for (const auto& [rel, attr] : signal) {
    int pos = parsed.find(rel)->position_of(attr);
    out.ground_truth.push_back(AttributeRef{rel, pos});
  }
  return out;
}

// Convenience: generate, load, and attach in one step.
inline std::pair<Database, TaskSpec> generate_database(const SynthConfig& cfg,
                                                       SynthOutput* files = nullptr) {
  SynthOutput out = generate(cfg);
  Schema schema = parse_schema(out.schema_text);
  Database db = load_database(schema, out.tables);
  TaskSpec task = parse_task_csv(out.target_relation, out.task_csv);
  Database attached = attach_task(db, task);
  if (files) *files = std::move(out);
  return {std::move(attached), std::move(task)};
}

}  // namespace augraph
