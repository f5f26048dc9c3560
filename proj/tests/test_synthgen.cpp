#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>

#include "augraph/scoring.hpp"
#include "augraph/synthgen.hpp"

using namespace augraph;

namespace {

// "v3" -> 3, "c12" -> 12
int suffix_of(const std::string& token) { return std::stoi(token.substr(1)); }

SynthConfig small_relational(uint64_t seed) {
  SynthConfig cfg;
  cfg.n_target = 200;
  cfg.n_parent = 20;
  cfg.n_noise = 5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("same seed reproduces every output byte") {
  SynthConfig cfg = small_relational(9);
  SynthOutput a = generate(cfg);
  SynthOutput b = generate(cfg);
  CHECK(a.schema_text == b.schema_text);
  CHECK(a.tables == b.tables);
  CHECK(a.task_csv == b.task_csv);
  CHECK(a.target_relation == b.target_relation);
  CHECK(a.ground_truth == b.ground_truth);

  SynthOutput c = generate(small_relational(10));
  CHECK(a.schema_text == c.schema_text);
  CHECK(a.tables != c.tables);
}

TEST_CASE("relational output is a three-table star with named ground truth") {
  SynthConfig cfg = small_relational(3);
  SynthOutput out = generate(cfg);
  CHECK(out.target_relation == "order");

  Schema s = parse_schema(out.schema_text);
  REQUIRE(s.relations.size() == 3);
  REQUIRE(s.links.size() == 2);
  CHECK(std::count(s.links.begin(), s.links.end(), ForeignKeyLink{"order", 2, "customer"}) == 1);
  CHECK(std::count(s.links.begin(), s.links.end(), ForeignKeyLink{"order", 3, "product"}) == 1);

  // noise columns round-robin over order, customer, product
  CHECK(s.find("order")->attr_names ==
        std::vector<std::string>{"order_id", "customer_id", "product_id", "noise0", "noise3"});
  CHECK(s.find("customer")->attr_names ==
        std::vector<std::string>{"customer_id", "sig0", "sig1", "noise1", "noise4"});
  CHECK(s.find("product")->attr_names ==
        std::vector<std::string>{"product_id", "sig2", "noise2"});

  REQUIRE(out.ground_truth.size() == 3);
  CHECK(out.ground_truth[0] == AttributeRef{"customer", 2});
  CHECK(out.ground_truth[1] == AttributeRef{"customer", 3});
  CHECK(out.ground_truth[2] == AttributeRef{"product", 2});

  // keys are <initial><row+1>; row counts match the config
  CHECK(out.tables.at("customer").substr(0, 32).find("customer_id") == 0);
  CHECK(std::count(out.tables.at("order").begin(), out.tables.at("order").end(), '\n') ==
        cfg.n_target + 1);
  CHECK(std::count(out.tables.at("customer").begin(), out.tables.at("customer").end(), '\n') ==
        cfg.n_parent + 1);
  CHECK(out.tables.at("customer").find("\nc1,") != std::string::npos);
  CHECK(out.tables.at("product").find("\np1,") != std::string::npos);
  CHECK(out.tables.at("order").find("\no1,") != std::string::npos);
}

TEST_CASE("tabular mode collapses to one relation with no links") {
  SynthConfig cfg;
  cfg.n_target = 60;
  cfg.n_noise = 2;
  cfg.tabular = true;
  cfg.seed = 5;
  SynthOutput out = generate(cfg);
  CHECK(out.target_relation == "record");
  Schema s = parse_schema(out.schema_text);
  REQUIRE(s.relations.size() == 1);
  CHECK(s.links.empty());
  CHECK(s.find("record")->attr_names ==
        std::vector<std::string>{"record_id", "sig0", "sig1", "sig2", "noise0", "noise1"});
  CHECK(out.ground_truth ==
        std::vector<AttributeRef>{{"record", 2}, {"record", 3}, {"record", 4}});
}

TEST_CASE("class balance and split fractions land near their targets") {
  SynthConfig cfg;  // defaults: n_target 2000, 0.7/0.15/0.15
  SynthOutput out = generate(cfg);
  TaskSpec task = parse_task_csv("order", out.task_csv);

  size_t n = task.labels.size();
  REQUIRE(n == 2000);
  size_t ones = 0;
  for (const auto& [k, v] : task.labels) ones += v == "1";
  double balance = static_cast<double>(ones) / static_cast<double>(n);
  CHECK(balance > 0.35);
  CHECK(balance < 0.65);

  double train = static_cast<double>(task.split_size(Split::Train)) / static_cast<double>(n);
  double val = static_cast<double>(task.split_size(Split::Val)) / static_cast<double>(n);
  double test = static_cast<double>(task.split_size(Split::Test)) / static_cast<double>(n);
  CHECK(train == doctest::Approx(0.70).epsilon(0.08));
  CHECK(val == doctest::Approx(0.15).epsilon(0.35));
  CHECK(test == doctest::Approx(0.15).epsilon(0.35));
  CHECK(task.split_size(Split::Train) + task.split_size(Split::Val) +
            task.split_size(Split::Test) ==
        n);
}

TEST_CASE("noise-free labels recompute from the designated halves") {
  SynthConfig cfg = small_relational(4);
  cfg.n_target = 300;
  cfg.n_parent = 30;
  cfg.epsilon = 0.0;
  auto [db, task] = generate_database(cfg);

  const Table& orders = db.table("order");
  const Table& customers = db.table("customer");
  const Table& products = db.table("product");
  for (size_t i = 0; i < orders.size(); ++i) {
    size_t c = static_cast<size_t>(suffix_of(orders[i][1].s)) - 1;
    size_t p = static_cast<size_t>(suffix_of(orders[i][2].s)) - 1;
    int votes = 0;
    votes += 2 * suffix_of(customers[c][1].s) < cfg.cardinality;  // sig0
    votes += 2 * suffix_of(customers[c][2].s) < cfg.cardinality;  // sig1
    votes += 2 * suffix_of(products[p][1].s) < cfg.cardinality;   // sig2
    std::string want = votes >= 2 ? "1" : "0";
    REQUIRE(task.labels.at(orders[i][0].s) == want);
  }
}

TEST_CASE("label noise flips the requested fraction and nothing else") {
  SynthConfig cfg;
  cfg.n_target = 2000;
  cfg.n_noise = 1;
  cfg.tabular = true;
  cfg.seed = 11;
  cfg.epsilon = 0.0;
  SynthOutput clean = generate(cfg);
  cfg.epsilon = 0.3;
  SynthOutput noisy = generate(cfg);

  CHECK(clean.tables == noisy.tables);

  TaskSpec t0 = parse_task_csv("record", clean.task_csv);
  TaskSpec t1 = parse_task_csv("record", noisy.task_csv);
  CHECK(t0.split == t1.split);
  size_t flipped = 0;
  for (const auto& [key, label] : t0.labels) flipped += t1.labels.at(key) != label;
  double rate = static_cast<double>(flipped) / static_cast<double>(t0.labels.size());
  CHECK(rate > 0.24);
  CHECK(rate < 0.36);
}

TEST_CASE("redundant third signal duplicates the first column") {
  SynthConfig cfg;
  cfg.n_target = 100;
  cfg.tabular = true;
  cfg.redundant_third = true;
  cfg.seed = 8;
  auto [db, task] = generate_database(cfg);
  const Table& rec = db.table("record");
  for (const auto& row : rec) REQUIRE(row[1].s == row[3].s);

  SynthConfig relational = cfg;
  relational.tabular = false;
  CHECK_THROWS_WITH_AS(generate(relational), doctest::Contains("requires tabular mode"), Error);
}

TEST_CASE("generated output loads strictly and matches the attached database") {
  SynthConfig cfg = small_relational(6);
  cfg.n_target = 120;
  SynthOutput files;
  auto [db, task] = generate_database(cfg, &files);
  CHECK(db.task_attached);
  CHECK(db.table("order").size() == 120);
  CHECK(db.table("customer").size() == 20);
  CHECK(db.table(std::string(kTrainRelation)).size() == task.split_size(Split::Train));

  Schema s = parse_schema(files.schema_text);
  LoadOptions strict;
  strict.strict_fk = true;
  Database reload = load_database(s, files.tables, strict);
  CHECK(reload.table("order").size() == 120);
}

TEST_CASE("config validation rejects bad shapes") {
  auto expect = [](SynthConfig cfg, const char* what) {
    CHECK_THROWS_WITH_AS(generate(cfg), doctest::Contains(what), Error);
  };
  SynthConfig cfg;
  cfg.n_target = 2;
  expect(cfg, "n_target must be >= 3");
  cfg = SynthConfig{};
  cfg.n_parent = 0;
  expect(cfg, "n_parent must be >= 1");
  cfg = SynthConfig{};
  cfg.n_noise = -1;
  expect(cfg, "n_noise must be >= 0");
  cfg = SynthConfig{};
  cfg.cardinality = 1;
  expect(cfg, "cardinality must be >= 2");
  cfg = SynthConfig{};
  cfg.epsilon = 1.0;
  expect(cfg, "epsilon must be in [0, 1)");
  cfg = SynthConfig{};
  cfg.val_frac = 0.0;
  cfg.train_frac = 0.85;
  expect(cfg, "split fractions must be positive");
  cfg = SynthConfig{};
  cfg.train_frac = 0.5;
  expect(cfg, "split fractions must sum to 1");
}

TEST_CASE("config json round trips and validates on the way in") {
  SynthConfig cfg;
  cfg.n_target = 77;
  cfg.cardinality = 4;
  cfg.epsilon = 0.1;
  cfg.tabular = true;
  cfg.redundant_third = true;
  cfg.seed = 123;
  SynthConfig back = SynthConfig::from_json(cfg.to_json());
  CHECK(back.n_target == 77);
  CHECK(back.cardinality == 4);
  CHECK(back.epsilon == 0.1);
  CHECK(back.tabular);
  CHECK(back.redundant_third);
  CHECK(back.seed == 123);

  json bad = cfg.to_json();
  bad["epsilon"] = 2.0;
  CHECK_THROWS_WITH_AS(SynthConfig::from_json(bad), doctest::Contains("epsilon"), Error);
}

TEST_CASE("signal columns carry more label information than noise") {
  SynthConfig tab;
  tab.n_target = 600;
  tab.n_noise = 2;
  tab.epsilon = 0.0;
  tab.tabular = true;
  tab.seed = 13;
  {
    auto [db, task] = generate_database(tab);
    double weakest_signal = 1e9, strongest_noise = -1e9;
    for (int pos = 2; pos <= 4; ++pos)
      weakest_signal = std::min(weakest_signal, score_mi(db, task, {"record", pos}).score);
    for (int pos = 5; pos <= 6; ++pos)
      strongest_noise = std::max(strongest_noise, score_mi(db, task, {"record", pos}).score);
    CHECK(weakest_signal > strongest_noise);
  }

  SynthConfig rel;
  rel.n_target = 600;
  rel.n_parent = 40;
  rel.n_noise = 3;
  rel.epsilon = 0.0;
  rel.seed = 14;
  {
    auto [db, task] = generate_database(rel);
    double sig = score_mi(db, task, {"customer", 2}).score;
    double noise = score_mi(db, task, {"order", 4}).score;
    CHECK(sig > noise);
  }
}
