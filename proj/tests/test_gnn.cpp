#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "augraph/cli.hpp"
#include "augraph/scoring.hpp"
#include "augraph/synthgen.hpp"

using namespace augraph;

namespace {

struct Fixture {
  Database db;
  TaskSpec task;
};

// Single-relation instance with explicit (value, label, split) rows.
Fixture value_table(const std::vector<std::array<std::string, 3>>& rows) {
  Schema s = parse_schema("relation t(t_id:key, f:cat?)\n");
  std::string csv = "t_id,f\n", task_csv = "key,label,split\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    std::string key = "r" + std::to_string(r);
    csv += key + "," + rows[r][0] + "\n";
    task_csv += key + "," + rows[r][1] + "," + rows[r][2] + "\n";
  }
  Fixture fx;
  fx.task = parse_task_csv("t", task_csv);
  fx.db = attach_task(load_database(s, {{"t", csv}}), fx.task);
  return fx;
}

Fixture two_parent_family(int copies) {
  Schema s = parse_schema(
      "relation parent(p_id:key)\n"
      "relation child(c_id:key, ref:fk(parent), a:cat)\n");
  std::string child_csv = "c_id,ref,a\n";
  for (int k = 0; k < copies; ++k) {
    child_csv += "c1" + std::string(1, static_cast<char>('a' + k)) + ",p1,u\n";
    child_csv += "c2" + std::string(1, static_cast<char>('a' + k)) + ",p2,w\n";
  }
  Fixture fx;
  fx.task = parse_task_csv("parent", "key,label,split\np1,1,train\np2,0,train\n");
  fx.db = attach_task(
      load_database(s, {{"parent", "p_id\np1\np2\n"}, {"child", child_csv}}), fx.task);
  return fx;
}

std::string shuffled_csv(const std::string& csv, std::mt19937_64& rng) {
  auto lines = split(csv, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::shuffle(lines.begin() + 1, lines.end(), rng);
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

void own_softmax(const double* logits, size_t C, double* probs) {
  double mx = *std::max_element(logits, logits + C);
  double sum = 0.0;
  for (size_t c = 0; c < C; ++c) {
    probs[c] = std::exp(logits[c] - mx);
    sum += probs[c];
  }
  for (size_t c = 0; c < C; ++c) probs[c] /= sum;
}

}  // namespace

TEST_CASE("analytic gradients agree with central differences on a small instance") {
  auto [db, task] = generate_database(cli::gradcheck_instance_config());
  HeteroGraph g = build_reg(db);
  REQUIRE(g.vertex_count() <= 30);

  TrainConfig tc;
  tc.width = 8;
  tc.layers = 2;
  CHECK(gradient_check(g, db, task, tc) <= 1e-4);

  tc.relu = false;
  CHECK(gradient_check(g, db, task, tc) <= 1e-4);
}

TEST_CASE("gradients are exact in the linear regime") {
  auto [db, task] = generate_database(cli::gradcheck_instance_config());
  HeteroGraph g = build_reg(db);
  TrainConfig tc;
  tc.width = 8;
  tc.layers = 2;
  tc.relu = false;
  GnnModel model = init_model(g, db, task, tc);
  std::fill(model.params.theta().begin(), model.params.theta().end(), 0.0);
  CHECK(gradient_check_at(model, g, db, task) <= 1e-7);
}

TEST_CASE("head gradients match the closed form when no layers are stacked") {
  SynthConfig cfg;
  cfg.tabular = true;
  cfg.n_target = 10;
  cfg.n_noise = 1;
  cfg.cardinality = 3;
  cfg.epsilon = 0.0;
  cfg.seed = 21;
  auto [db, task] = generate_database(cfg);
  HeteroGraph g = build_reg(db);

  TrainConfig tc;
  tc.width = 6;
  tc.layers = 0;
  tc.relu = false;
  GnnModel model = init_model(g, db, task, tc);
  gnn_detail::Plan plan = gnn_detail::build_plan(model, g);
  GraphEncoding enc = encode_graph(g, db, model.enc);
  gnn_detail::Supervision sup = gnn_detail::supervision(g, plan, task);
  gnn_detail::TyingPairs tp = gnn_detail::tying_pairs(model);
  gnn_detail::ForwardState st;
  gnn_detail::forward(model, plan, enc, st);
  model.params.zero_grad();
  std::vector<double> dlogits;
  gnn_detail::supervised_loss(model, st, sup, tp, &dlogits);
  gnn_detail::backward(model, plan, enc, st, dlogits, tp);

  size_t C = task.classes.size();
  size_t F = static_cast<size_t>(tc.width);
  const auto& H0 = st.H[0][static_cast<size_t>(plan.target_type)];
  std::vector<double> want_b(C, 0.0), want_w(C * F, 0.0), probs(C);
  double inv = 1.0 / static_cast<double>(sup.rows.size());
  for (size_t k = 0; k < sup.rows.size(); ++k) {
    size_t v = static_cast<size_t>(sup.rows[k]);
    own_softmax(st.logits.data() + v * C, C, probs.data());
    for (size_t c = 0; c < C; ++c) {
      double d = (probs[c] - (static_cast<int>(c) == sup.labels[k] ? 1.0 : 0.0)) * inv;
      want_b[c] += d;
      for (size_t i = 0; i < F; ++i) want_w[c * F + i] += d * H0[v * F + i];
    }
  }
  const double* got_w = model.params.grad(model.params.find("head:W"));
  const double* got_b = model.params.grad(model.params.find("head:b"));
  for (size_t c = 0; c < C; ++c) CHECK(std::abs(got_b[c] - want_b[c]) <= 1e-12);
  for (size_t i = 0; i < C * F; ++i) CHECK(std::abs(got_w[i] - want_w[i]) <= 1e-12);
}

TEST_CASE("training separates a promoted noiseless table") {
  SynthConfig cfg;
  cfg.tabular = true;
  cfg.n_target = 120;
  cfg.n_noise = 2;
  cfg.cardinality = 4;
  cfg.epsilon = 0.0;
  cfg.seed = 11;
  SynthOutput files;
  auto [db, task] = generate_database(cfg, &files);
  HeteroGraph g = promote_all(build_reg(db), db, files.ground_truth);

  TrainConfig tc;
  tc.width = 16;
  tc.layers = 2;
  tc.epochs = 150;
  TrainStats stats;
  GnnModel model = train(g, db, task, tc, &stats);
  CHECK(stats.final_train_accuracy >= 0.95);
  CHECK(stats.loss_per_epoch.size() == 150);
  CHECK(stats.loss_per_epoch.front() > stats.loss_per_epoch.back());
  CHECK(evaluate(model, g, db, task, Split::Train).accuracy == stats.final_train_accuracy);
}

TEST_CASE("zero training epochs leave the initial parameters") {
  auto fx = value_table({{"a", "1", "train"},
                         {"b", "0", "train"},
                         {"a", "1", "train"},
                         {"b", "0", "val"}});
  HeteroGraph g = build_reg(fx.db);
  TrainConfig tc;
  tc.width = 4;
  tc.layers = 1;
  tc.epochs = 0;
  GnnModel trained = train(g, fx.db, fx.task, tc);
  GnnModel fresh = init_model(g, fx.db, fx.task, tc);
  CHECK(trained.params.theta() == fresh.params.theta());
  CHECK(evaluate(trained, g, fx.db, fx.task, Split::Val).count == 1);
}

TEST_CASE("training is seed-deterministic") {
  SynthConfig cfg;
  cfg.tabular = true;
  cfg.n_target = 40;
  cfg.epsilon = 0.0;
  cfg.seed = 8;
  auto [db, task] = generate_database(cfg);
  HeteroGraph g = build_reg(db);
  TrainConfig tc;
  tc.width = 8;
  tc.layers = 1;
  tc.epochs = 20;

  GnnModel a = train(g, db, task, tc);
  GnnModel b = train(g, db, task, tc);
  CHECK(a.params.theta() == b.params.theta());
  EvalResult ea = evaluate(a, g, db, task, Split::Val);
  EvalResult eb = evaluate(b, g, db, task, Split::Val);
  CHECK(ea.accuracy == eb.accuracy);
  CHECK(ea.probs == eb.probs);

  tc.seed = 9;
  GnnModel c = train(g, db, task, tc);
  CHECK(a.params.theta() != c.params.theta());
}

TEST_CASE("ranking and agreement metrics on pinned vectors") {
  CHECK(metrics::accuracy({1, 0, 1}, {1, 1, 1}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  CHECK(metrics::f1_score({1, 0, 1, 1}, {1, 0, 0, 1}, 2) == 0.8);
  CHECK(metrics::f1_score({0, 1, 2, 2}, {0, 2, 2, 2}, 3) ==
        doctest::Approx(0.6).epsilon(1e-12));

  std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  CHECK(*metrics::roc_auc({1, 1, 0, 0}, s) == 1.0);
  CHECK(*metrics::roc_auc({1, 0, 1, 0}, s) == 0.75);
  CHECK(*metrics::roc_auc({1, 0, 0, 1}, s) == 0.5);
  CHECK(*metrics::roc_auc({1, 0, 1, 0}, {0.5, 0.5, 0.5, 0.5}) == 0.5);
  CHECK_FALSE(metrics::roc_auc({1, 1, 1, 1}, s).has_value());
}

TEST_CASE("predictions travel with the rows under permutation") {
  SynthConfig cfg;
  cfg.tabular = true;
  cfg.n_target = 80;
  cfg.n_noise = 1;
  cfg.cardinality = 4;
  cfg.epsilon = 0.0;
  cfg.seed = 13;
  SynthOutput files = generate(cfg);
  Schema schema = parse_schema(files.schema_text);
  TaskSpec task = parse_task_csv(files.target_relation, files.task_csv);
  Database db1 = attach_task(load_database(schema, files.tables), task);

  std::mt19937_64 rng(4);
  std::map<std::string, std::string> shuffled;
  for (const auto& [name, csv] : files.tables) shuffled[name] = shuffled_csv(csv, rng);
  Database db2 = attach_task(load_database(schema, shuffled), task);

  AttributeRef sig = files.ground_truth[0];
  HeteroGraph g1 = promote(build_reg(db1), db1, sig);
  HeteroGraph g2 = promote(build_reg(db2), db2, sig);
  REQUIRE(g1.fingerprint() == g2.fingerprint());

  TrainConfig tc;
  tc.width = 8;
  tc.layers = 1;
  tc.epochs = 25;
  GnnModel m1 = train(g1, db1, task, tc);
  GnnModel m2 = train(g2, db2, task, tc);

  EvalResult e1 = evaluate(m1, g1, db1, task, Split::Val);
  EvalResult e2 = evaluate(m2, g2, db2, task, Split::Val);
  REQUIRE(e1.count == e2.count);
  std::map<std::string, size_t> where;
  for (size_t i = 0; i < e2.keys.size(); ++i) where[e2.keys[i]] = i;
  for (size_t i = 0; i < e1.keys.size(); ++i) {
    size_t j = where.at(e1.keys[i]);
    CHECK(e1.y_pred[i] == e2.y_pred[j]);
    for (size_t c = 0; c < e1.probs[i].size(); ++c)
      CHECK(std::abs(e1.probs[i][c] - e2.probs[j][c]) <= 1e-9);
  }
}

TEST_CASE("averaging duplicated identical children leaves parent activations unchanged") {
  Fixture one = two_parent_family(1);
  Fixture two = two_parent_family(2);
  HeteroGraph g1 = build_reg(one.db);
  HeteroGraph g2 = build_reg(two.db);

  TrainConfig tc;
  tc.width = 8;
  tc.layers = 2;
  tc.seed = 5;
  GnnModel m1 = init_model(g1, one.db, one.task, tc);
  GnnModel m2 = init_model(g2, two.db, two.task, tc);
  REQUIRE(m1.params.theta() == m2.params.theta());

  gnn_detail::Plan p1 = gnn_detail::build_plan(m1, g1);
  gnn_detail::Plan p2 = gnn_detail::build_plan(m2, g2);
  GraphEncoding enc1 = encode_graph(g1, one.db, m1.enc);
  GraphEncoding enc2 = encode_graph(g2, two.db, m2.enc);
  gnn_detail::ForwardState s1, s2;
  gnn_detail::forward(m1, p1, enc1, s1);
  gnn_detail::forward(m2, p2, enc2, s2);

  size_t parent_t = static_cast<size_t>(g1.vtype_index("parent"));
  size_t marker_t = static_cast<size_t>(g1.vtype_index(kTrainRelation));
  for (int l = 0; l <= tc.layers; ++l) {
    CHECK(s1.H[static_cast<size_t>(l)][parent_t] == s2.H[static_cast<size_t>(l)][parent_t]);
    CHECK(s1.H[static_cast<size_t>(l)][marker_t] == s2.H[static_cast<size_t>(l)][marker_t]);
  }
  CHECK(s1.logits == s2.logits);
}

TEST_CASE("checkpoints round-trip through their serialized form") {
  SynthConfig cfg;
  cfg.tabular = true;
  cfg.n_target = 30;
  cfg.epsilon = 0.0;
  cfg.seed = 6;
  auto [db, task] = generate_database(cfg);
  HeteroGraph g = build_reg(db);
  TrainConfig tc;
  tc.width = 6;
  tc.layers = 1;
  tc.epochs = 10;
  GnnModel model = train(g, db, task, tc);

  GnnModel back = GnnModel::from_json(model.to_json());
  CHECK(back.params.theta() == model.params.theta());
  CHECK(back.train_fingerprint == model.train_fingerprint);
  CHECK(back.classes == model.classes);
  EvalResult ea = evaluate(model, g, db, task, Split::Val);
  EvalResult eb = evaluate(back, g, db, task, Split::Val);
  CHECK(ea.probs == eb.probs);

  CHECK_THROWS_WITH_AS(GnnModel::from_json(json::object()),
                       doctest::Contains("not a model checkpoint"), Error);
  CHECK_THROWS_WITH_AS(GnnModel::from_json(json{{"format", "zzz"}}),
                       doctest::Contains("not a model checkpoint"), Error);
}

TEST_CASE("degenerate splits are rejected") {
  auto single = value_table({{"a", "0", "train"},
                             {"b", "0", "train"},
                             {"a", "1", "val"}});
  HeteroGraph g = build_reg(single.db);
  TrainConfig tc;
  tc.width = 4;
  tc.layers = 1;
  tc.epochs = 3;
  CHECK_THROWS_WITH_AS(train(g, single.db, single.task, tc),
                       doctest::Contains("single class"), Error);

  auto no_test = value_table({{"a", "1", "train"},
                              {"b", "0", "train"},
                              {"a", "1", "val"}});
  HeteroGraph gt = build_reg(no_test.db);
  GnnModel model = train(gt, no_test.db, no_test.task, tc);
  CHECK_THROWS_WITH_AS(evaluate(model, gt, no_test.db, no_test.task, Split::Test),
                       doctest::Contains("split 'test' is empty"), Error);
}

TEST_CASE("evaluation is a pure function of model and graph") {
  auto fx = value_table({{"a", "1", "train"},
                         {"b", "0", "train"},
                         {"a", "1", "val"},
                         {"b", "0", "val"}});
  HeteroGraph g = build_reg(fx.db);
  TrainConfig tc;
  tc.width = 4;
  tc.layers = 1;
  tc.epochs = 8;
  GnnModel model = train(g, fx.db, fx.task, tc);
  EvalResult a = evaluate(model, g, fx.db, fx.task, Split::Val);
  EvalResult b = evaluate(model, g, fx.db, fx.task, Split::Val);
  CHECK(a.probs == b.probs);
  CHECK(a.y_pred == b.y_pred);
  CHECK(a.keys == b.keys);
}
