#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "augraph/augment.hpp"
#include "augraph/synthgen.hpp"
#include "oracles.hpp"

using namespace augraph;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Single all-train table with three promotable columns of descending signal:
// a mirrors the label, c agrees on six of eight rows, b is constant.
oracles::RandomInstance graded_table() {
  oracles::RandomInstance inst;
  inst.target = "t";
  inst.schema_text = "relation t(t_id:key, a:cat, b:cat, c:cat)\n";
  inst.tables["t"] =
      "t_id,a,b,c\n"
      "r0,x,m,x\nr1,x,m,x\nr2,x,m,x\nr3,x,m,y\n"
      "r4,y,m,y\nr5,y,m,y\nr6,y,m,y\nr7,y,m,x\n";
  inst.task_csv =
      "key,label,split\n"
      "r0,1,train\nr1,1,train\nr2,1,train\nr3,1,train\n"
      "r4,0,train\nr5,0,train\nr6,0,train\nr7,0,train\n";
  Schema schema = parse_schema(inst.schema_text);
  inst.task = parse_task_csv("t", inst.task_csv);
  inst.db = attach_task(load_database(schema, inst.tables), inst.task);
  return inst;
}

LoopConfig mi_loop(const Database& db, int k, double tau) {
  LoopConfig cfg;
  cfg.k = k;
  cfg.tau = tau;
  cfg.scorer.kind = ScorerKind::MI;
  cfg.candidate_pool = candidate_pool(db);
  return cfg;
}

std::set<std::pair<int, int>> knn_edge_set(const HeteroGraph& g) {
  REQUIRE(!g.etypes.empty());
  const EdgeType& et = g.etypes.back();
  REQUIRE(et.name == "knn");
  return {et.edges.begin(), et.edges.end()};
}

}  // namespace

TEST_CASE("default thresholds per scorer") {
  CHECK(default_tau(ScorerKind::MI) == -kInf);
  CHECK(default_tau(ScorerKind::EntropyGain) == 0.0);
  CHECK(default_tau(ScorerKind::GnnGain) == 0.0);
  CHECK(default_tau(ScorerKind::PathDisagreement) == 0.5);
}

TEST_CASE("zero budget returns the base graph untouched") {
  auto inst = graded_table();
  HeteroGraph g0 = build_reg(inst.db);
  PromotionTrace trace;
  HeteroGraph g = run_augmentation(g0, inst.db, inst.task, mi_loop(inst.db, 0, -kInf), &trace);
  CHECK(trace.stop_reason == "budget");
  CHECK(trace.rounds.empty());
  CHECK(trace.final_scores.empty());
  CHECK(g.export_text() == g0.export_text());
  CHECK(g.promotions.empty());
}

TEST_CASE("an unbeatable threshold stops before any promotion and keeps the sweep") {
  auto inst = graded_table();
  HeteroGraph g0 = build_reg(inst.db);
  LoopConfig cfg = mi_loop(inst.db, 3, kInf);
  PromotionTrace trace;
  HeteroGraph g = run_augmentation(g0, inst.db, inst.task, cfg, &trace);
  CHECK(trace.stop_reason == "threshold");
  CHECK(trace.rounds.empty());
  REQUIRE(trace.final_scores.size() == cfg.candidate_pool.size());
  for (size_t i = 0; i < trace.final_scores.size(); ++i)
    CHECK(trace.final_scores[i].first == cfg.candidate_pool[i]);
  CHECK(g.fingerprint() == g0.fingerprint());
}

TEST_CASE("greedy loop promotes the strongest candidate first") {
  auto inst = graded_table();
  HeteroGraph g0 = build_reg(inst.db);
  PromotionTrace trace;
  HeteroGraph g = run_augmentation(g0, inst.db, inst.task, mi_loop(inst.db, 3, -kInf), &trace);

  CHECK(trace.stop_reason == "budget");
  REQUIRE(trace.rounds.size() == 3);
  CHECK(trace.rounds[0].attribute == AttributeRef{"t", 2});  // a, exact label copy
  CHECK(trace.rounds[1].attribute == AttributeRef{"t", 4});  // c, partial signal
  CHECK(trace.rounds[2].attribute == AttributeRef{"t", 3});  // b, constant
  CHECK(trace.rounds[0].score == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(trace.rounds[1].score > 0.0);
  CHECK(trace.rounds[1].score < trace.rounds[0].score);
  CHECK(trace.rounds[2].score == 0.0);

  // rounds are 1-based and consecutive; each sweep shrinks by one and the
  // winner is its maximum
  for (size_t i = 0; i < trace.rounds.size(); ++i) {
    const TraceRound& r = trace.rounds[i];
    CHECK(r.round == static_cast<int>(i) + 1);
    CHECK(r.scores.size() == 3 - i);
    for (const auto& [attr, sc] : r.scores) CHECK(sc <= r.score);
    CHECK(r.score > -kInf);
  }

  CHECK(g.promotions.size() == 3);
  HeteroGraph pool_order = promote_all(g0, inst.db, candidate_pool(inst.db));
  CHECK(g.fingerprint() == pool_order.fingerprint());
}

TEST_CASE("equal scores fall back to name order") {
  oracles::RandomInstance inst;
  inst.target = "t";
  inst.schema_text = "relation t(t_id:key, p:cat, q:cat, r:cat)\n";
  inst.tables["t"] = "t_id,p,q,r\nr0,m,m,m\nr1,m,m,m\nr2,m,m,m\nr3,m,m,m\n";
  inst.task_csv = "key,label,split\nr0,1,train\nr1,1,train\nr2,0,train\nr3,0,train\n";
  Schema schema = parse_schema(inst.schema_text);
  inst.task = parse_task_csv("t", inst.task_csv);
  inst.db = attach_task(load_database(schema, inst.tables), inst.task);

  HeteroGraph g0 = build_reg(inst.db);
  LoopConfig cfg = mi_loop(inst.db, 3, -kInf);
  PromotionTrace trace;
  run_augmentation(g0, inst.db, inst.task, cfg, &trace);
  REQUIRE(trace.rounds.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(trace.rounds[i].attribute == cfg.candidate_pool[i]);
    CHECK(trace.rounds[i].score == 0.0);
  }
}

TEST_CASE("a finite threshold stops once the best remaining score falls below it") {
  auto inst = graded_table();
  HeteroGraph g0 = build_reg(inst.db);
  PromotionTrace trace;
  HeteroGraph g = run_augmentation(g0, inst.db, inst.task, mi_loop(inst.db, 3, 0.2), &trace);

  CHECK(trace.stop_reason == "threshold");
  REQUIRE(trace.rounds.size() == 1);
  CHECK(trace.rounds[0].attribute == AttributeRef{"t", 2});
  CHECK(trace.rounds[0].score > 0.2);
  REQUIRE(trace.final_scores.size() == 2);
  for (const auto& [attr, sc] : trace.final_scores) CHECK(!(sc > 0.2));
  CHECK(g.promotions.size() == 1);
}

TEST_CASE("replaying a trace rebuilds the promoted graph exactly") {
  auto inst = graded_table();
  HeteroGraph g0 = build_reg(inst.db);
  for (int k : {1, 2, 3}) {
    PromotionTrace trace;
    HeteroGraph g = run_augmentation(g0, inst.db, inst.task, mi_loop(inst.db, k, -kInf), &trace);
    HeteroGraph replayed = replay_trace(g0, inst.db, trace);
    CHECK(replayed.export_text() == g.export_text());
    CHECK(replayed.fingerprint() == g.fingerprint());
  }
}

TEST_CASE("a failing candidate surfaces through a clean partial trace") {
  Schema s = parse_schema(
      "relation t(t_id:key, f:cat)\n"
      "relation iso(iso_id:key, g:cat)\n");
  Database db = load_database(s, {{"t", "t_id,f\nr0,x\nr1,y\nr2,x\nr3,y\n"},
                                  {"iso", "iso_id,g\ni0,a\ni1,b\ni2,a\ni3,b\n"}});
  TaskSpec task = parse_task_csv(
      "t", "key,label,split\nr0,1,train\nr1,0,train\nr2,1,train\nr3,0,train\n");
  Database at = attach_task(db, task);

  HeteroGraph g0 = build_reg(at);
  LoopConfig cfg = mi_loop(at, 2, -kInf);
  PromotionTrace trace;
  trace.stop_reason = "stale";
  CHECK_THROWS_WITH_AS(run_augmentation(g0, at, task, cfg, &trace),
                       doctest::Contains("candidate iso.g"), Error);
  CHECK(trace.rounds.empty());
  CHECK(trace.stop_reason.empty());
}

TEST_CASE("budget and pool size are validated up front") {
  auto inst = graded_table();
  HeteroGraph g0 = build_reg(inst.db);

  LoopConfig neg = mi_loop(inst.db, -1, 0.0);
  CHECK_THROWS_WITH_AS(run_augmentation(g0, inst.db, inst.task, neg),
                       doctest::Contains("budget k must be nonnegative"), Error);

  LoopConfig big = mi_loop(inst.db, 4, 0.0);
  CHECK_THROWS_WITH_AS(run_augmentation(g0, inst.db, inst.task, big),
                       doctest::Contains("exceeds candidate pool size"), Error);

  LoopConfig empty = mi_loop(inst.db, 0, 0.0);
  empty.candidate_pool.clear();
  CHECK_THROWS_WITH_AS(run_augmentation(g0, inst.db, inst.task, empty),
                       doctest::Contains("empty candidate pool"), Error);
}

TEST_CASE("promoting everything matches an exhaustive greedy run") {
  for (uint64_t seed : {101, 102}) {
    auto inst = oracles::random_two_table(seed);
    CandidateOptions opts;
    opts.include_near_key = true;
    std::vector<AttributeRef> pool = candidate_pool(inst.db, opts);
    if (pool.empty()) continue;

    HeteroGraph g0 = build_reg(inst.db);
    std::vector<std::string> warnings;
    HeteroGraph all = build_all_promote(g0, inst.db, opts, &warnings);
    CHECK(all.promotions.size() == pool.size());
    CHECK(all.vtypes.size() == g0.vtypes.size() + pool.size());

    LoopConfig cfg;
    cfg.k = static_cast<int>(pool.size());
    cfg.tau = -kInf;
    cfg.scorer.kind = ScorerKind::MI;
    cfg.candidate_pool = pool;
    HeteroGraph greedy = run_augmentation(g0, inst.db, inst.task, cfg);
    CHECK(greedy.fingerprint() == all.fingerprint());
    CHECK(greedy.export_text() == all.export_text());
  }
}

TEST_CASE("random subset selection is seeded and bounded") {
  auto inst = graded_table();
  HeteroGraph g0 = build_reg(inst.db);
  std::vector<AttributeRef> pool = candidate_pool(inst.db);
  REQUIRE(pool.size() == 3);

  std::vector<AttributeRef> chosen1, chosen2;
  HeteroGraph a = build_random_k(g0, inst.db, 2, 7, {}, &chosen1);
  HeteroGraph b = build_random_k(g0, inst.db, 2, 7, {}, &chosen2);
  CHECK(chosen1 == chosen2);
  CHECK(a.export_text() == b.export_text());
  REQUIRE(chosen1.size() == 2);
  CHECK(chosen1[0] != chosen1[1]);
  for (const auto& attr : chosen1)
    CHECK(std::find(pool.begin(), pool.end(), attr) != pool.end());
  CHECK(a.promotions.size() == 2);

  HeteroGraph none = build_random_k(g0, inst.db, 0, 7);
  CHECK(none.fingerprint() == g0.fingerprint());

  HeteroGraph full = build_random_k(g0, inst.db, 3, 7);
  CHECK(full.fingerprint() == build_all_promote(g0, inst.db).fingerprint());

  CHECK_THROWS_WITH_AS(build_random_k(g0, inst.db, -1, 7),
                       doctest::Contains("k must be in [0, pool size]"), Error);
  CHECK_THROWS_WITH_AS(build_random_k(g0, inst.db, 4, 7),
                       doctest::Contains("k must be in [0, pool size]"), Error);
}

TEST_CASE("nearest-neighbor graph links identical rows first") {
  oracles::RandomInstance inst;
  inst.target = "t";
  inst.schema_text = "relation t(t_id:key, f:cat)\n";
  inst.tables["t"] = "t_id,f\nr0,a\nr1,a\nr2,a\nr3,z\n";
  inst.task_csv = "key,label,split\nr0,1,train\nr1,1,train\nr2,0,train\nr3,0,train\n";
  Schema schema = parse_schema(inst.schema_text);
  inst.task = parse_task_csv("t", inst.task_csv);
  inst.db = attach_task(load_database(schema, inst.tables), inst.task);

  HeteroGraph g = build_knn_graph(inst.db, inst.task, 1);
  const EdgeType& et = g.etypes.back();
  CHECK(et.name == "knn");
  CHECK(et.src_type == g.vtype_index("t"));
  CHECK(et.dst_type == g.vtype_index("t"));
  // ties resolve toward the lowest row index, each pair stored once
  std::set<std::pair<int, int>> want{{0, 1}, {0, 2}, {0, 3}};
  CHECK(knn_edge_set(g) == want);
  CHECK(g.vtype_index(std::string(kTrainRelation)) >= 0);
}

TEST_CASE("nearest-neighbor construction matches direct enumeration") {
  for (uint64_t seed = 60; seed < 68; ++seed) {
    auto inst = oracles::random_single_table(seed);
    int n = static_cast<int>(inst.db.table("t").size());
    int k_nn = 1 + static_cast<int>(seed % 3);
    REQUIRE(k_nn < n);
    HeteroGraph g = build_knn_graph(inst.db, inst.task, k_nn);
    CHECK(knn_edge_set(g) == oracles::knn_pairs(inst.db, inst.task, k_nn));
  }
}

TEST_CASE("nearest-neighbor input validation") {
  auto single = graded_table();
  CHECK_THROWS_WITH_AS(build_knn_graph(single.db, single.task, 0),
                       doctest::Contains("k_nn must be >= 1"), Error);
  CHECK_THROWS_WITH_AS(build_knn_graph(single.db, single.task, 8),
                       doctest::Contains("smaller than the row count"), Error);
  CHECK_THROWS_WITH_AS(build_knn_graph(single.db, single.task, 1, "cosine"),
                       doctest::Contains("unsupported metric 'cosine'"), Error);

  auto relational = oracles::random_two_table(5);
  CHECK_THROWS_WITH_AS(build_knn_graph(relational.db, relational.task, 1),
                       doctest::Contains("knn requires single-table input"), Error);

  Schema s = parse_schema(single.schema_text);
  Database unattached = load_database(s, single.tables);
  CHECK_THROWS_WITH_AS(build_knn_graph(unattached, single.task, 1),
                       doctest::Contains("task must be attached"), Error);
}

TEST_CASE("model-gain loop agrees between fresh and frozen scoring on round one") {
  SynthConfig sc;
  sc.n_target = 40;
  sc.n_parent = 4;
  sc.n_noise = 1;
  sc.epsilon = 0.0;
  sc.seed = 3;
  sc.tabular = true;
  auto [db, task] = generate_database(sc);
  HeteroGraph g0 = build_reg(db);

  LoopConfig cfg;
  cfg.k = 1;
  cfg.tau = -kInf;
  cfg.scorer.kind = ScorerKind::GnnGain;
  cfg.scorer.train.width = 8;
  cfg.scorer.train.layers = 1;
  cfg.scorer.train.epochs = 20;
  cfg.candidate_pool = candidate_pool(db);
  REQUIRE(!cfg.candidate_pool.empty());

  PromotionTrace fresh;
  HeteroGraph gf = run_augmentation(g0, db, task, cfg, &fresh);
  cfg.retrain_per_round = false;
  PromotionTrace frozen;
  HeteroGraph gz = run_augmentation(g0, db, task, cfg, &frozen);

  CHECK(fresh.stop_reason == "budget");
  CHECK(frozen.stop_reason == "budget");
  REQUIRE(fresh.rounds.size() == 1);
  REQUIRE(frozen.rounds.size() == 1);
  CHECK(fresh.rounds[0].attribute == frozen.rounds[0].attribute);
  CHECK(fresh.rounds[0].scores == frozen.rounds[0].scores);
  CHECK(gf.fingerprint() == gz.fingerprint());
}
