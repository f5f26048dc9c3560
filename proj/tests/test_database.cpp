#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "augraph/database.hpp"
#include "augraph/synthgen.hpp"

using namespace augraph;

namespace {

Schema star_schema() {
  return parse_schema(
      "relation customer(customer_id:key, region:cat)\n"
      "relation order(order_id:key, customer_id:fk(customer), qty:int)\n");
}

std::map<std::string, std::string> star_tables() {
  return {{"customer", "customer_id,region\nc1,north\nc2,south\n"},
          {"order",
           "order_id,customer_id,qty\no1,c1,3\no2,c1,5\no3,c2,1\n"}};
}

}  // namespace

TEST_CASE("well-formed tables load") {
  Database db = load_database(star_schema(), star_tables());
  CHECK(db.table("customer").size() == 2);
  CHECK(db.table("order").size() == 3);
  CHECK(db.table("order")[0][2].i == 3);
  CHECK(db.table("order")[2][1].s == "c2");
  CHECK_FALSE(db.task_attached);
}

TEST_CASE("dangling foreign key names the link") {
  auto tables = star_tables();
  tables["order"] = "order_id,customer_id,qty\no1,c9,3\n";
  try {
    load_database(star_schema(), tables);
    FAIL("expected a referential-integrity error");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("referential-integrity") != std::string::npos);
    CHECK(msg.find("(order, 2, customer)") != std::string::npos);
    CHECK(msg.find("c9") != std::string::npos);
    CHECK(e.kind == Error::Kind::Validation);
  }
}

TEST_CASE("duplicate primary key names relation and key") {
  auto tables = star_tables();
  tables["customer"] = "customer_id,region\nc1,north\nc1,south\n";
  CHECK_THROWS_WITH_AS(load_database(star_schema(), tables),
                       doctest::Contains("duplicate primary key 'c1'"), Error);
}

TEST_CASE("row arity and header mismatches are rejected") {
  auto tables = star_tables();
  tables["order"] = "order_id,customer_id,qty\no1,c1\n";
  CHECK_THROWS_WITH_AS(load_database(star_schema(), tables), doctest::Contains("row 1"), Error);

  tables = star_tables();
  tables["order"] = "order_id,cust,qty\no1,c1,3\n";
  CHECK_THROWS_WITH_AS(load_database(star_schema(), tables), doctest::Contains("expected 'customer_id'"),
                       Error);

  tables = star_tables();
  tables.erase("order");
  CHECK_THROWS_WITH_AS(load_database(star_schema(), tables), doctest::Contains("no table source"),
                       Error);
}

TEST_CASE("unparseable numerics report position") {
  auto tables = star_tables();
  tables["order"] = "order_id,customer_id,qty\no1,c1,many\n";
  try {
    load_database(star_schema(), tables);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("'many'") != std::string::npos);
    CHECK(msg.find("column 3") != std::string::npos);
  }
}

TEST_CASE("empty cells are missing only when the type allows it") {
  Schema s = parse_schema("relation t(t_id:key, a:cat, b:cat?)\n");
  CHECK_THROWS_WITH_AS(load_database(s, {{"t", "t_id,a,b\nr1,,x\n"}}),
                       doctest::Contains("empty cell"), Error);
  Database db = load_database(s, {{"t", "t_id,a,b\nr1,x,\n"}});
  CHECK(db.table("t")[0][2].is_missing());
}

TEST_CASE("missing foreign keys load leniently and fail under strict mode") {
  Schema s = parse_schema(
      "relation customer(customer_id:key)\n"
      "relation order(order_id:key, customer_id:fk(customer)?)\n");
  std::map<std::string, std::string> tables = {
      {"customer", "customer_id\nc1\n"}, {"order", "order_id,customer_id\no1,c1\no2,\n"}};
  Database db = load_database(s, tables);
  CHECK(db.table("order")[1][1].is_missing());
  CHECK_THROWS_WITH_AS(load_database(s, tables, LoadOptions{true}),
                       doctest::Contains("strict"), Error);
}

TEST_CASE("whitespace around cells is trimmed") {
  Database db = load_database(star_schema(),
                              {{"customer", "customer_id,region\n c1 , north \nc2,south\n"},
                               {"order", "order_id,customer_id,qty\no1, c1 , 3 \no2,c1,5\no3,c2,1\n"}});
  CHECK(db.table("customer")[0][0].s == "c1");
  CHECK(db.table("customer")[0][1].s == "north");
  CHECK(db.table("order")[0][2].i == 3);
}

TEST_CASE("single-relation schema with no links loads") {
  Schema s = parse_schema("relation t(t_id:key, x:cat)\n");
  Database db = load_database(s, {{"t", "t_id,x\nr1,a\nr2,b\n"}});
  CHECK(db.schema.links.empty());
  CHECK(db.table("t").size() == 2);
}

TEST_CASE("task files parse and validate") {
  TaskSpec task = parse_task_csv("order", "key,label,split\no1,1,train\no2,0,val\no3,1,test\n");
  CHECK(task.classes == std::vector<std::string>{"0", "1"});
  CHECK(task.binary());
  CHECK(task.labels.at("o1") == "1");
  CHECK(task.split.at("o2") == Split::Val);
  CHECK(task.split_size(Split::Train) == 1);
  CHECK(task.class_index("1") == 1);

  CHECK_THROWS_WITH_AS(parse_task_csv("order", "key,label\no1,1\n"),
                       doctest::Contains("key,label,split"), Error);
  CHECK_THROWS_WITH_AS(parse_task_csv("order", "key,label,split\no1,1,half\n"),
                       doctest::Contains("train/val/test"), Error);
  CHECK_THROWS_WITH_AS(parse_task_csv("order", "key,label,split\no1,1,train\no1,0,val\n"),
                       doctest::Contains("labeled twice"), Error);
  CHECK_THROWS_WITH_AS(parse_task_csv("order", "key,label,split\no1,1,train\no2,1,val\n"),
                       doctest::Contains("two distinct labels"), Error);
  CHECK_THROWS_WITH_AS(parse_task_csv("order", ""), doctest::Contains("empty"), Error);
}

TEST_CASE("attach_task adds the marker relation with one tuple per train key") {
  Database db = load_database(star_schema(), star_tables());
  TaskSpec task = parse_task_csv(
      "order", "key,label,split\no1,1,train\no2,0,train\no3,1,val\n");
  Database at = attach_task(db, task);
  CHECK(at.task_attached);
  REQUIRE(at.schema.find(kTrainRelation) != nullptr);
  CHECK(at.schema.links.back() == ForeignKeyLink{kTrainRelation, 1, "order"});
  CHECK(at.table(kTrainRelation).size() == 2);
  CHECK(at.table(kTrainRelation)[0][0].s == "o1");
  CHECK(at.table(kTrainRelation)[0][1].s == "1");
  CHECK(at.table(kTrainRelation)[1][0].s == "o2");
  // input left untouched
  CHECK(db.schema.relations.size() == 2);
  CHECK_FALSE(db.task_attached);
}

TEST_CASE("attach_task twice errors instead of duplicating the marker") {
  Database db = load_database(star_schema(), star_tables());
  TaskSpec task =
      parse_task_csv("order", "key,label,split\no1,1,train\no2,0,train\n");
  Database at = attach_task(db, task);
  CHECK_THROWS_WITH_AS(attach_task(at, task), doctest::Contains("already attached"), Error);
}

TEST_CASE("attach_task rejects unknown keys and empty train splits") {
  Database db = load_database(star_schema(), star_tables());
  TaskSpec bad_key =
      parse_task_csv("order", "key,label,split\no9,1,train\no1,0,train\n");
  CHECK_THROWS_WITH_AS(attach_task(db, bad_key), doctest::Contains("o9"), Error);

  TaskSpec no_train = parse_task_csv("order", "key,label,split\no1,1,val\no2,0,test\n");
  CHECK_THROWS_WITH_AS(attach_task(db, no_train), doctest::Contains("empty training set"), Error);

  TaskSpec bad_rel = parse_task_csv("widget", "key,label,split\no1,1,train\no2,0,train\n");
  CHECK_THROWS_WITH_AS(attach_task(db, bad_rel), doctest::Contains("widget"), Error);
}

TEST_CASE("loading generated output reproduces the requested row counts") {
  SynthConfig cfg;
  cfg.n_target = 1000;
  cfg.n_parent = 40;
  cfg.seed = 5;
  SynthOutput out = generate(cfg);
  Schema schema = parse_schema(out.schema_text);
  Database db = load_database(schema, out.tables, LoadOptions{true});
  CHECK(db.table("order").size() == 1000);
  CHECK(db.table("customer").size() == 40);
  TaskSpec task = parse_task_csv(out.target_relation, out.task_csv);
  Database at = attach_task(db, task);
  CHECK(at.table(kTrainRelation).size() == task.split_size(Split::Train));
}
