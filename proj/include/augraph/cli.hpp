#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "augraph/experiment.hpp"

namespace augraph {
namespace cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail_validation("cannot read file '" + p.generic_string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail_runtime("cannot open '" + p.generic_string() + "' for writing");
  out << content;
  out.flush();
  if (!out) fail_runtime("short write to '" + p.generic_string() + "'");
}

inline json parse_json_file(const fs::path& p) {
  std::string text = read_file(p);
  try {
    return json::parse(text);
  } catch (const std::exception& e) {
    fail_validation("'" + p.generic_string() + "' is not valid JSON: " + e.what());
  }
}

inline std::string json_text(const json& j) { return j.dump(2) + "\n"; }

inline double round6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return std::atof(buf);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

inline json make_manifest(const std::string& command, const json& inputs, const json& options) {
  return {{"command", command}, {"inputs", inputs}, {"options", options}};
}

// Timestamps and wall-clock live only in this sidecar so every other output
// of a run stays byte-identical across re-runs of the same manifest.
inline void write_run_meta(const fs::path& dir, const std::string& command,
                           const std::string& manifest_hash, double seconds) {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
  json meta = {{"command", command},
               {"manifest_hash", manifest_hash},
               {"finished_at", stamp},
               {"wall_clock_seconds", seconds}};
  write_file(dir / "run_meta.json", json_text(meta));
}

inline json error_json(const std::string& kind, const std::string& message,
                       const json& detail = json::object()) {
  return {{"error", {{"kind", kind}, {"message", message}, {"detail", detail}}}};
}

// If the target table carries a plain column literally named "label", drop
// it before any graph is built: the task file is the only legitimate label
// carrier, and a promotable copy of the labels would trivialize scoring.
inline bool strip_label_column(Database& db, const std::string& target, std::ostream& err) {
  int ri = db.schema.index_of(target);
  if (ri < 0) return false;
  RelationDecl& rel = db.schema.relations[static_cast<size_t>(ri)];
  int pos = 0;
  for (int p = 2; p <= rel.arity(); ++p) {
    const AttrType& t = rel.attr_types[static_cast<size_t>(p - 1)];
    if (rel.attr_names[static_cast<size_t>(p - 1)] == "label" && !t.is_key() && !t.is_fk()) {
      pos = p;
      break;
    }
  }
  if (pos == 0) return false;
  rel.attr_names.erase(rel.attr_names.begin() + (pos - 1));
  rel.attr_types.erase(rel.attr_types.begin() + (pos - 1));
  for (auto& link : db.schema.links)
    if (link.relation == target && link.position > pos) --link.position;
  for (auto& row : db.tables[static_cast<size_t>(ri)])
    row.erase(row.begin() + (pos - 1));
  err << "note: removed column '" << target << ".label' (labels belong in the task file)\n";
  return true;
}

struct DataInput {
  Database db;  // task attached when has_task
  TaskSpec task;
  bool has_task = false;
  std::string target;
  json inputs = json::object();  // manifest entries: logical name -> {path, hash}
};

// A dataset directory holds schema.txt, one <relation>.csv per declared
// relation, and optionally task.csv. The target relation comes from
// --target, from a ground_truth.json written by synth, or is implied when
// the schema has a single relation.
inline DataInput load_data_dir(const std::string& dir, const std::string& target_flag,
                               bool strict_fk, std::ostream& err) {
  if (dir.empty()) fail_validation("--data <dir> is required");
  fs::path root(dir);
  DataInput in;

  std::string schema_text = read_file(root / "schema.txt");
  Schema schema = parse_schema(schema_text);
  in.inputs["schema"] = {{"path", (root / "schema.txt").generic_string()},
                         {"hash", content_hash(schema_text)}};

  std::map<std::string, std::string> sources;
  json tables = json::object();
  for (const auto& rel : schema.relations) {
    fs::path p = root / (rel.name + ".csv");
    std::string text = read_file(p);
    tables[rel.name] = {{"path", p.generic_string()}, {"hash", content_hash(text)}};
    sources.emplace(rel.name, std::move(text));
  }
  in.inputs["tables"] = tables;
  in.db = load_database(schema, sources, LoadOptions{strict_fk});

  in.target = target_flag;
  if (in.target.empty() && fs::exists(root / "ground_truth.json")) {
    try {
      json gt = parse_json_file(root / "ground_truth.json");
      in.target = gt.value("target_relation", std::string());
    } catch (const Error&) {
      err << "note: ignoring unreadable ground_truth.json\n";
    }
  }
  if (in.target.empty() && schema.relations.size() == 1) in.target = schema.relations[0].name;

  fs::path task_path = root / "task.csv";
  if (fs::exists(task_path)) {
    if (in.target.empty())
      fail_validation("--target <relation> is required for multi-table input");
    std::string task_text = read_file(task_path);
    in.inputs["task"] = {{"path", task_path.generic_string()},
                         {"hash", content_hash(task_text)}};
    strip_label_column(in.db, in.target, err);
    in.task = parse_task_csv(in.target, task_text);
    in.db = attach_task(in.db, in.task);
    in.has_task = true;
  }
  return in;
}

// ---------------------------------------------------------------------------
// graph construction shared by build, train, and eval

struct BuildFlags {
  std::string strategy = "reg";
  int k = 3;
  std::optional<double> tau;
  std::string scorer = "mi";
  int d = 2;
  bool include_center = false;
  std::string metric = "accuracy";
  int knn_k = 10;
  bool retrain_per_round = true;
  BinPolicy bins;
  bool include_near_key = false;
  TrainConfig train;
  uint64_t seed = 42;

  json to_json() const {
    return {{"strategy", strategy},
            {"k", k},
            {"tau", tau ? json(*tau) : json("per-scorer-default")},
            {"scorer", scorer},
            {"d", d},
            {"include_center", include_center},
            {"metric", metric},
            {"knn_k", knn_k},
            {"retrain_per_round", retrain_per_round},
            {"float_bins", bins.float_bins},
            {"int_cardinality_cap", bins.int_cardinality_cap},
            {"include_near_key", include_near_key},
            {"train", train.to_json()},
            {"seed", seed}};
  }
};

struct BuiltGraph {
  HeteroGraph graph;
  json info = json::object();
  PromotionTrace trace;
  bool has_trace = false;
  std::vector<std::string> warnings;
};

inline BuiltGraph construct_graph(const Database& db, const TaskSpec& task, bool has_task,
                                  const BuildFlags& f) {
  const auto& known = known_strategies();
  if (std::find(known.begin(), known.end(), f.strategy) == known.end())
    fail_validation("unknown strategy '" + f.strategy +
                    "' (expected reg, all-promote, random-k, knn, or augraph)");
  auto need_task = [&]() {
    if (!has_task)
      fail_validation("strategy '" + f.strategy + "' requires a task file (task.csv)");
  };

  BuiltGraph out;
  if (f.strategy == "knn") {
    need_task();
    out.graph = build_knn_graph(db, task, f.knn_k);
    out.info["knn_k"] = f.knn_k;
    return out;
  }

  HeteroGraph g0 = build_reg(db);
  CandidateOptions copts{f.bins, 0.5, f.include_near_key};
  if (f.strategy == "reg") {
    out.graph = std::move(g0);
  } else if (f.strategy == "all-promote") {
    out.graph = build_all_promote(g0, db, copts, &out.warnings);
    out.info["promotions"] = out.graph.promotions.size();
  } else if (f.strategy == "random-k") {
    std::vector<AttributeRef> chosen;
    out.graph = build_random_k(g0, db, f.k, f.seed, copts, &chosen);
    json attrs = json::array();
    for (const auto& a : chosen) attrs.push_back(a.to_json(db.schema));
    out.info["chosen"] = attrs;
  } else {  // augraph
    need_task();
    Scorer s;
    s.kind = parse_scorer_kind(f.scorer);
    s.d = f.d;
    s.include_center = f.include_center;
    s.metric = f.metric;
    s.bins = f.bins;
    s.train = f.train;
    LoopConfig cfg;
    cfg.k = f.k;
    cfg.tau = f.tau ? *f.tau : default_tau(s.kind);
    cfg.scorer = s;
    cfg.candidate_pool = candidate_pool(db, copts);
    cfg.seed = f.seed;
    cfg.retrain_per_round = f.retrain_per_round;
    out.graph = run_augmentation(g0, db, task, cfg, &out.trace);
    out.has_trace = true;
    out.info["scorer"] = f.scorer;
    out.info["stop_reason"] = out.trace.stop_reason;
    out.info["promotions"] = out.trace.rounds.size();
  }
  return out;
}

// ---------------------------------------------------------------------------
// option plumbing

struct GlobalOpts {
  uint64_t seed = 42;
  std::string out_dir;
};

inline CLI::Option* add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--width", t.width, "hidden width")->capture_default_str();
  cmd->add_option("--layers", t.layers, "message-passing layers")->capture_default_str();
  cmd->add_option("--lr", t.lr, "learning rate")->capture_default_str();
  cmd->add_option("--momentum", t.momentum, "sgd momentum")->capture_default_str();
  cmd->add_option("--weight-decay", t.weight_decay, "l2 weight decay")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "training epochs")->capture_default_str();
  cmd->add_flag("--relu,!--identity", t.relu,
                "relu activation (identity is for linear-regime gradient checks)");
  return cmd->add_option("--gnn-seed", t.seed, "model init seed (defaults to --seed)");
}

inline void add_bin_flags(CLI::App* cmd, BinPolicy& bins, bool& include_near_key) {
  cmd->add_option("--float-bins", bins.float_bins, "equal-frequency bins for float attributes")
      ->capture_default_str();
  cmd->add_option("--int-cap", bins.int_cardinality_cap,
                  "distinct-value cap before integers get binned")
      ->capture_default_str();
  cmd->add_flag("--include-near-key", include_near_key,
                "keep near-key attributes in the candidate pool");
}

inline void add_data_flags(CLI::App* cmd, std::string& data, std::string& target,
                           bool& strict_fk) {
  cmd->add_option("--data", data, "dataset directory (schema.txt, <relation>.csv, task.csv)")
      ->required();
  cmd->add_option("--target", target, "task target relation (default: from ground_truth.json, "
                                      "or the only relation)");
  cmd->add_flag("--strict-fk", strict_fk, "reject missing foreign-key values");
}

// ---------------------------------------------------------------------------
// subcommands

inline void cmd_synth(SynthConfig cfg, const GlobalOpts& g, std::ostream& out) {
  if (g.out_dir.empty()) fail_validation("synth: --out <dir> is required");
  cfg.seed = g.seed;
  Timer timer;
  SynthOutput files = generate(cfg);
  json manifest = make_manifest("synth", json::object(), cfg.to_json());
  std::string mh = content_hash(manifest.dump());

  fs::path dir(g.out_dir);
  write_file(dir / "schema.txt", files.schema_text);
  for (const auto& [rel, csv] : files.tables) write_file(dir / (rel + ".csv"), csv);
  write_file(dir / "task.csv", files.task_csv);

  Schema schema = parse_schema(files.schema_text);
  json attrs = json::array();
  for (const auto& a : files.ground_truth) attrs.push_back(a.to_json(schema));
  json gt = {{"manifest_hash", mh},
             {"manifest", manifest},
             {"target_relation", files.target_relation},
             {"attributes", attrs}};
  write_file(dir / "ground_truth.json", json_text(gt));
  write_run_meta(dir, "synth", mh, timer.seconds());

  out << "synth: wrote schema.txt, task.csv, ground_truth.json and " << files.tables.size()
      << " tables to " << g.out_dir << " (manifest " << mh << ")\n";
}

struct BuildCmd {
  std::string data;
  std::string target;
  bool strict_fk = false;
  BuildFlags flags;
};

inline void cmd_build(BuildCmd c, const GlobalOpts& g, std::ostream& out, std::ostream& err) {
  c.flags.seed = g.seed;
  Timer timer;
  DataInput in = load_data_dir(c.data, c.target, c.strict_fk, err);
  BuiltGraph bg = construct_graph(in.db, in.task, in.has_task, c.flags);

  json options = c.flags.to_json();
  options["strict_fk"] = c.strict_fk;
  options["target"] = in.target;
  json manifest = make_manifest("build", in.inputs, options);
  std::string mh = content_hash(manifest.dump());

  json report = {{"manifest_hash", mh},
                 {"manifest", manifest},
                 {"strategy", c.flags.strategy},
                 {"fingerprint", bg.graph.fingerprint()},
                 {"vertices", bg.graph.vertex_count()},
                 {"edges", bg.graph.edge_count()},
                 {"graph", bg.graph.manifest(in.db.schema)},
                 {"warnings", bg.warnings}};
  for (const auto& [k, v] : bg.info.items()) report[k] = v;
  if (bg.has_trace) report["trace"] = bg.trace.to_json(in.db.schema);

  out << "build: strategy=" << c.flags.strategy << " vertices=" << bg.graph.vertex_count()
      << " edges=" << bg.graph.edge_count() << " fingerprint=" << bg.graph.fingerprint()
      << "\n";
  if (g.out_dir.empty()) {
    out << json_text(report);
  } else {
    fs::path dir(g.out_dir);
    write_file(dir / "graph.txt", bg.graph.export_text());
    write_file(dir / "build.json", json_text(report));
    write_run_meta(dir, "build", mh, timer.seconds());
    out << "wrote " << (dir / "graph.txt").generic_string() << "\n";
  }
}

struct ScoreCmd {
  std::string data;
  std::string target;
  bool strict_fk = false;
  std::string scorer;
  int d = 2;
  bool include_center = false;
  std::string metric = "accuracy";
  std::string model_path;
  bool train_now = false;
  BinPolicy bins;
  bool include_near_key = false;
  TrainConfig train;
};

inline void cmd_score(ScoreCmd c, const GlobalOpts& g, std::ostream& out, std::ostream& err) {
  Timer timer;
  DataInput in = load_data_dir(c.data, c.target, c.strict_fk, err);
  if (!in.has_task) fail_validation("score: task.csv is required");
  ScorerKind kind = parse_scorer_kind(c.scorer);

  Scorer scorer;
  scorer.kind = kind;
  scorer.d = c.d;
  scorer.include_center = c.include_center;
  scorer.metric = c.metric;
  scorer.bins = c.bins;
  scorer.train = c.train;

  json options = {{"scorer", scorer_kind_name(kind)},
                  {"d", c.d},
                  {"include_center", c.include_center},
                  {"metric", c.metric},
                  {"model", c.model_path},
                  {"train", c.train_now},
                  {"train_config", c.train.to_json()},
                  {"float_bins", c.bins.float_bins},
                  {"int_cardinality_cap", c.bins.int_cardinality_cap},
                  {"include_near_key", c.include_near_key},
                  {"strict_fk", c.strict_fk},
                  {"target", in.target}};
  json manifest = make_manifest("score", in.inputs, options);
  std::string mh = content_hash(manifest.dump());

  HeteroGraph g0 = build_reg(in.db);
  std::vector<std::string> warnings;
  std::vector<AttributeRef> pool =
      candidate_pool(in.db, CandidateOptions{c.bins, 0.5, c.include_near_key}, &warnings);

  std::vector<ScoreReport> reports;
  if (!pool.empty()) {
    if (kind == ScorerKind::GnnGain) {
      GnnModel model;
      if (!c.model_path.empty())
        model = GnnModel::from_json(parse_json_file(c.model_path));
      else if (c.train_now)
        model = train(g0, in.db, in.task, c.train);
      else
        fail_validation("model required: pass --model <checkpoint.json> or --train to fit a "
                        "frozen model on the input graph");
      std::optional<double> base;
      for (const auto& attr : pool)
        reports.push_back(
            score_gnn_gain(g0, in.db, in.task, attr, model, c.metric, c.bins, &base));
    } else {
      reports = score_all(g0, in.db, in.task, pool, scorer);
    }
  } else {
    err << "warning: empty candidate pool, nothing to score\n";
  }
  std::sort(reports.begin(), reports.end(), [](const ScoreReport& a, const ScoreReport& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.attribute < b.attribute;
  });

  out << "attribute                            score\n";
  for (const auto& r : reports) {
    char line[80];
    std::snprintf(line, sizeof(line), "%-28s %13.6f\n", r.attribute.display(in.db.schema).c_str(),
                  r.score);
    out << line;
  }

  json rows = json::array();
  for (const auto& r : reports) rows.push_back(r.to_json(in.db.schema));
  json report = {{"manifest_hash", mh},
                 {"manifest", manifest},
                 {"scorer", scorer.to_json()},
                 {"warnings", warnings},
                 {"reports", rows}};
  if (g.out_dir.empty()) {
    out << json_text(report);
  } else {
    fs::path dir(g.out_dir);
    write_file(dir / "score.json", json_text(report));
    write_run_meta(dir, "score", mh, timer.seconds());
    out << "wrote " << (dir / "score.json").generic_string() << "\n";
  }
}

struct AugmentCmd {
  std::string data;
  std::string target;
  bool strict_fk = false;
  BuildFlags flags;  // strategy field unused; scorer/k/tau/bins/train drive the loop
};

inline void cmd_augment(AugmentCmd c, const GlobalOpts& g, std::ostream& out,
                        std::ostream& err) {
  c.flags.seed = g.seed;
  c.flags.strategy = "augraph";
  Timer timer;
  DataInput in = load_data_dir(c.data, c.target, c.strict_fk, err);
  if (!in.has_task) fail_validation("augment: task.csv is required");

  json options = c.flags.to_json();
  options["strict_fk"] = c.strict_fk;
  options["target"] = in.target;
  json manifest = make_manifest("augment", in.inputs, options);
  std::string mh = content_hash(manifest.dump());
  fs::path dir(g.out_dir);

  BuiltGraph bg;
  try {
    bg = construct_graph(in.db, in.task, in.has_task, c.flags);
  } catch (const Error& e) {
    // flush whatever the loop recorded before the scorer failed
    if (!g.out_dir.empty()) {
      json partial = {{"manifest_hash", mh},
                      {"manifest", manifest},
                      {"failed", std::string(e.what())},
                      {"trace", bg.trace.to_json(in.db.schema)}};
      write_file(dir / "augment.json", json_text(partial));
      write_run_meta(dir, "augment", mh, timer.seconds());
    }
    throw;
  }

  for (const auto& r : bg.trace.rounds) {
    char line[160];
    std::snprintf(line, sizeof(line), "round %d: promote %s score=%.6f\n", r.round,
                  r.attribute.display(in.db.schema).c_str(), r.score);
    out << line;
  }
  out << "stop: " << bg.trace.stop_reason << " fingerprint=" << bg.graph.fingerprint() << "\n";

  json report = {{"manifest_hash", mh},
                 {"manifest", manifest},
                 {"fingerprint", bg.graph.fingerprint()},
                 {"vertices", bg.graph.vertex_count()},
                 {"edges", bg.graph.edge_count()},
                 {"trace", bg.trace.to_json(in.db.schema)}};
  if (g.out_dir.empty()) {
    out << json_text(report);
  } else {
    write_file(dir / "graph.txt", bg.graph.export_text());
    write_file(dir / "augment.json", json_text(report));
    write_run_meta(dir, "augment", mh, timer.seconds());
    out << "wrote " << (dir / "augment.json").generic_string() << "\n";
  }
}

struct TrainCmd {
  std::string data;
  std::string target;
  bool strict_fk = false;
  BuildFlags flags;
};

inline void cmd_train(TrainCmd c, const GlobalOpts& g, std::ostream& out, std::ostream& err) {
  if (g.out_dir.empty()) fail_validation("train: --out <dir> is required");
  c.flags.seed = g.seed;
  Timer timer;
  DataInput in = load_data_dir(c.data, c.target, c.strict_fk, err);
  if (!in.has_task) fail_validation("train: task.csv is required");
  BuiltGraph bg = construct_graph(in.db, in.task, in.has_task, c.flags);

  json options = c.flags.to_json();
  options["strict_fk"] = c.strict_fk;
  options["target"] = in.target;
  json manifest = make_manifest("train", in.inputs, options);
  std::string mh = content_hash(manifest.dump());

  TrainStats stats;
  GnnModel model = train(bg.graph, in.db, in.task, c.flags.train, &stats);

  json model_json = model.to_json();
  model_json["manifest_hash"] = mh;

  json report = {{"manifest_hash", mh},
                 {"manifest", manifest},
                 {"fingerprint", bg.graph.fingerprint()},
                 {"final_loss", stats.loss_per_epoch.empty() ? json(nullptr)
                                                             : json(stats.loss_per_epoch.back())},
                 {"final_train_accuracy", stats.final_train_accuracy},
                 {"loss_per_epoch", stats.loss_per_epoch}};
  if (in.task.split_size(Split::Val) > 0)
    report["val"] = evaluate(model, bg.graph, in.db, in.task, Split::Val).to_json();

  fs::path dir(g.out_dir);
  write_file(dir / "model.json", json_text(model_json));
  write_file(dir / "train.json", json_text(report));
  write_run_meta(dir, "train", mh, timer.seconds());

  out << "train: epochs=" << c.flags.train.epochs << " train_accuracy=" << std::fixed;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", stats.final_train_accuracy);
  out << buf;
  if (report.contains("val")) {
    std::snprintf(buf, sizeof(buf), " val_accuracy=%.4f",
                  report["val"]["accuracy"].get<double>());
    out << buf;
  }
  out << " wrote " << (dir / "model.json").generic_string() << "\n";
}

struct EvalCmd {
  std::string data;
  std::string target;
  bool strict_fk = false;
  std::string model_path;
  std::string split = "test";
  bool scores = false;
  BuildFlags flags;
};

inline void cmd_eval(EvalCmd c, const GlobalOpts& g, std::ostream& out, std::ostream& err) {
  c.flags.seed = g.seed;
  Timer timer;
  DataInput in = load_data_dir(c.data, c.target, c.strict_fk, err);
  if (!in.has_task) fail_validation("eval: task.csv is required");
  Split split = parse_split(c.split);
  BuiltGraph bg = construct_graph(in.db, in.task, in.has_task, c.flags);
  GnnModel model = GnnModel::from_json(parse_json_file(c.model_path));

  json options = c.flags.to_json();
  options["strict_fk"] = c.strict_fk;
  options["target"] = in.target;
  options["model"] = c.model_path;
  options["split"] = c.split;
  options["scores"] = c.scores;
  json manifest = make_manifest("eval", in.inputs, options);
  std::string mh = content_hash(manifest.dump());

  EvalResult res = evaluate(model, bg.graph, in.db, in.task, split);
  json report = {{"manifest_hash", mh},
                 {"manifest", manifest},
                 {"fingerprint", bg.graph.fingerprint()},
                 {"model_fingerprint", model.train_fingerprint},
                 {"eval", res.to_json(c.scores)}};

  char line[160];
  std::snprintf(line, sizeof(line), "eval: split=%s count=%zu accuracy=%.4f f1=%.4f", c.split.c_str(),
                res.count, res.accuracy, res.f1);
  out << line;
  if (res.roc_auc) {
    std::snprintf(line, sizeof(line), " roc_auc=%.4f", *res.roc_auc);
    out << line;
  }
  out << "\n";

  if (g.out_dir.empty()) {
    out << json_text(report);
  } else {
    fs::path dir(g.out_dir);
    write_file(dir / "eval.json", json_text(report));
    write_run_meta(dir, "eval", mh, timer.seconds());
    out << "wrote " << (dir / "eval.json").generic_string() << "\n";
  }
}

struct ExperimentCmd {
  std::string data;
  std::string target;
  bool strict_fk = false;
  ExperimentOptions opts;
};

inline void cmd_experiment(ExperimentCmd c, const GlobalOpts& g, std::ostream& out,
                           std::ostream& err) {
  c.opts.seed = g.seed;
  Timer timer;
  DataInput in = load_data_dir(c.data, c.target, c.strict_fk, err);
  if (!in.has_task) fail_validation("experiment: task.csv is required");

  fs::path dir(g.out_dir);
  ExperimentResult partial;
  ExperimentResult res;
  try {
    res = run_experiment(in.db, in.task, c.opts, in.inputs, &partial);
  } catch (const Error& e) {
    if (!g.out_dir.empty()) {
      json flushed = partial.to_json();
      flushed["failed"] = std::string(e.what());
      write_file(dir / "experiment.json", json_text(flushed));
      write_run_meta(dir, "experiment", partial.manifest_hash, timer.seconds());
    }
    throw;
  }

  out << res.table_text();
  out << "manifest " << res.manifest_hash << "\n";

  if (g.out_dir.empty()) {
    out << json_text(res.to_json());
  } else {
    write_file(dir / "experiment.json", json_text(res.to_json()));
    if (c.opts.with_curve) {
      std::string csv = "scorer,k,val_accuracy,test_accuracy\n";
      for (const auto& row : res.curve) {
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%d,%.10g,%.10g\n",
                      row.at("scorer").get<std::string>().c_str(), row.at("k").get<int>(),
                      row.at("val_accuracy").get<double>(), row.at("test_accuracy").get<double>());
        csv += line;
      }
      write_file(dir / "curve.csv", csv);
    }
    write_run_meta(dir, "experiment", res.manifest_hash, timer.seconds());
    out << "wrote " << (dir / "experiment.json").generic_string() << "\n";
  }
}

// The bundled gradient-check instance: a small three-table database whose
// base graph stays under 30 vertices so central differences finish quickly.
inline SynthConfig gradcheck_instance_config() {
  SynthConfig cfg;
  cfg.n_target = 12;
  cfg.n_parent = 3;
  cfg.n_noise = 1;
  cfg.cardinality = 3;
  cfg.epsilon = 0.0;
  cfg.train_frac = 0.5;
  cfg.val_frac = 0.25;
  cfg.test_frac = 0.25;
  cfg.seed = 7;
  return cfg;
}

struct GradcheckCmd {
  std::string data;
  std::string target;
  bool strict_fk = false;
  TrainConfig train;
  double step = 1e-5;
  double tolerance = 1e-4;
};

inline void cmd_gradcheck(GradcheckCmd c, const GlobalOpts& g, std::ostream& out,
                          std::ostream& err) {
  Timer timer;
  Database db;
  TaskSpec task;
  json inputs = json::object();
  if (c.data.empty()) {
    SynthConfig cfg = gradcheck_instance_config();
    auto pair = generate_database(cfg);
    db = std::move(pair.first);
    task = std::move(pair.second);
    inputs["builtin_instance"] = cfg.to_json();
  } else {
    DataInput in = load_data_dir(c.data, c.target, c.strict_fk, err);
    if (!in.has_task) fail_validation("gradcheck: task.csv is required");
    db = std::move(in.db);
    task = std::move(in.task);
    inputs = in.inputs;
  }

  HeteroGraph graph = build_reg(db);
  if (graph.vertex_count() > 30)
    fail_validation("gradcheck: instance too large (" + std::to_string(graph.vertex_count()) +
                    " vertices, limit 30)");

  json options = {{"train", c.train.to_json()}, {"step", c.step}, {"tolerance", c.tolerance}};
  json manifest = make_manifest("gradcheck", inputs, options);
  std::string mh = content_hash(manifest.dump());

  double max_rel = gradient_check(graph, db, task, c.train, c.step);
  bool pass = max_rel <= c.tolerance;

  char line[160];
  std::snprintf(line, sizeof(line), "gradcheck: max_relative_error=%.3e tolerance=%.1e %s\n",
                max_rel, c.tolerance, pass ? "pass" : "FAIL");
  out << line;

  json report = {{"manifest_hash", mh},
                 {"manifest", manifest},
                 {"vertices", graph.vertex_count()},
                 {"max_relative_error", max_rel},
                 {"pass", pass}};
  if (g.out_dir.empty()) {
    out << json_text(report);
  } else {
    fs::path dir(g.out_dir);
    write_file(dir / "gradcheck.json", json_text(report));
    write_run_meta(dir, "gradcheck", mh, timer.seconds());
  }
}

// ---------------------------------------------------------------------------
// entry point. Also callable in-process from tests: streams replace stdio.

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"task-aware graph construction and GNN evaluation over relational CSV data",
               "augraph"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "read options from a TOML-style file");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "root seed for every random substream")->capture_default_str();
  app.add_option("--out", g.out_dir, "output directory");

  SynthConfig synth_cfg;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic relational dataset");
  synth->fallthrough();
  synth->add_option("--n", synth_cfg.n_target, "target-table rows")->capture_default_str();
  synth->add_option("--n-parent", synth_cfg.n_parent, "rows per dimension table")
      ->capture_default_str();
  synth->add_option("--n-noise", synth_cfg.n_noise, "noise attributes")->capture_default_str();
  synth->add_option("--cardinality", synth_cfg.cardinality, "distinct values per attribute")
      ->capture_default_str();
  synth->add_option("--epsilon", synth_cfg.epsilon, "label noise rate")->capture_default_str();
  synth->add_option("--train-frac", synth_cfg.train_frac, "train split fraction")
      ->capture_default_str();
  synth->add_option("--val-frac", synth_cfg.val_frac, "validation split fraction")
      ->capture_default_str();
  synth->add_option("--test-frac", synth_cfg.test_frac, "test split fraction")
      ->capture_default_str();
  synth->add_flag("--tabular", synth_cfg.tabular, "single-table variant");
  synth->add_flag("--redundant-third", synth_cfg.redundant_third,
                  "third signal column duplicates the first (tabular only)");

  BuildCmd build_cmd;
  CLI::App* build = app.add_subcommand("build", "construct a graph and write its export");
  build->fallthrough();
  add_data_flags(build, build_cmd.data, build_cmd.target, build_cmd.strict_fk);
  build->add_option("--strategy", build_cmd.flags.strategy,
                    "reg | all-promote | random-k | knn | augraph")
      ->capture_default_str();
  build->add_option("--k", build_cmd.flags.k, "promotion budget")->capture_default_str();
  build->add_option("--tau", build_cmd.flags.tau, "promotion threshold (default per scorer)");
  build->add_option("--scorer", build_cmd.flags.scorer,
                    "mi | entropy-gain | path-disagreement | gnn-gain")
      ->capture_default_str();
  build->add_option("--d", build_cmd.flags.d, "entropy-gain neighborhood radius")
      ->capture_default_str();
  build->add_flag("--include-center", build_cmd.flags.include_center,
                  "count a vertex in its own neighborhood");
  build->add_option("--metric", build_cmd.flags.metric, "gnn-gain metric")->capture_default_str();
  build->add_option("--knn-k", build_cmd.flags.knn_k, "neighbors per row for knn")
      ->capture_default_str();
  build->add_flag("--retrain-per-round,!--no-retrain", build_cmd.flags.retrain_per_round,
                  "refit the frozen gnn-gain model each round");
  add_bin_flags(build, build_cmd.flags.bins, build_cmd.flags.include_near_key);
  CLI::Option* build_gnn_seed = add_train_flags(build, build_cmd.flags.train);

  ScoreCmd score_cmd;
  CLI::App* score = app.add_subcommand("score", "rank candidate attributes on the base graph");
  score->fallthrough();
  add_data_flags(score, score_cmd.data, score_cmd.target, score_cmd.strict_fk);
  score->add_option("--scorer", score_cmd.scorer, "mi | entropy-gain | path-disagreement | gnn-gain")
      ->required();
  score->add_option("--d", score_cmd.d, "entropy-gain neighborhood radius")->capture_default_str();
  score->add_flag("--include-center", score_cmd.include_center,
                  "count a vertex in its own neighborhood");
  score->add_option("--metric", score_cmd.metric, "gnn-gain metric")->capture_default_str();
  score->add_option("--model", score_cmd.model_path, "frozen model checkpoint for gnn-gain");
  score->add_flag("--train", score_cmd.train_now, "fit the frozen model on the input graph");
  add_bin_flags(score, score_cmd.bins, score_cmd.include_near_key);
  CLI::Option* score_gnn_seed = add_train_flags(score, score_cmd.train);

  AugmentCmd augment_cmd;
  CLI::App* augment = app.add_subcommand("augment", "run the greedy promotion loop");
  augment->fallthrough();
  add_data_flags(augment, augment_cmd.data, augment_cmd.target, augment_cmd.strict_fk);
  augment->add_option("--scorer", augment_cmd.flags.scorer,
                      "mi | entropy-gain | path-disagreement | gnn-gain")
      ->capture_default_str();
  augment->add_option("--k", augment_cmd.flags.k, "promotion budget")->capture_default_str();
  augment->add_option("--tau", augment_cmd.flags.tau, "promotion threshold (default per scorer)");
  augment->add_option("--d", augment_cmd.flags.d, "entropy-gain neighborhood radius")
      ->capture_default_str();
  augment->add_flag("--include-center", augment_cmd.flags.include_center,
                    "count a vertex in its own neighborhood");
  augment->add_option("--metric", augment_cmd.flags.metric, "gnn-gain metric")
      ->capture_default_str();
  augment->add_flag("--retrain-per-round,!--no-retrain", augment_cmd.flags.retrain_per_round,
                    "refit the frozen gnn-gain model each round");
  add_bin_flags(augment, augment_cmd.flags.bins, augment_cmd.flags.include_near_key);
  CLI::Option* augment_gnn_seed = add_train_flags(augment, augment_cmd.flags.train);

  TrainCmd train_cmd;
  CLI::App* train = app.add_subcommand("train", "train a model and write its checkpoint");
  train->fallthrough();
  add_data_flags(train, train_cmd.data, train_cmd.target, train_cmd.strict_fk);
  train->add_option("--strategy", train_cmd.flags.strategy,
                    "graph to train on: reg | all-promote | random-k | knn | augraph")
      ->capture_default_str();
  train->add_option("--k", train_cmd.flags.k, "promotion budget")->capture_default_str();
  train->add_option("--tau", train_cmd.flags.tau, "promotion threshold (default per scorer)");
  train->add_option("--scorer", train_cmd.flags.scorer, "loop scorer for strategy augraph")
      ->capture_default_str();
  train->add_option("--knn-k", train_cmd.flags.knn_k, "neighbors per row for knn")
      ->capture_default_str();
  add_bin_flags(train, train_cmd.flags.bins, train_cmd.flags.include_near_key);
  CLI::Option* train_gnn_seed = add_train_flags(train, train_cmd.flags.train);

  EvalCmd eval_cmd;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  eval->fallthrough();
  add_data_flags(eval, eval_cmd.data, eval_cmd.target, eval_cmd.strict_fk);
  eval->add_option("--model", eval_cmd.model_path, "model checkpoint")->required();
  eval->add_option("--split", eval_cmd.split, "train | val | test")->capture_default_str();
  eval->add_flag("--scores", eval_cmd.scores, "include per-vertex predictions");
  eval->add_option("--strategy", eval_cmd.flags.strategy,
                   "graph to evaluate on: reg | all-promote | random-k | knn | augraph")
      ->capture_default_str();
  eval->add_option("--k", eval_cmd.flags.k, "promotion budget")->capture_default_str();
  eval->add_option("--tau", eval_cmd.flags.tau, "promotion threshold (default per scorer)");
  eval->add_option("--scorer", eval_cmd.flags.scorer, "loop scorer for strategy augraph")
      ->capture_default_str();
  eval->add_option("--knn-k", eval_cmd.flags.knn_k, "neighbors per row for knn")
      ->capture_default_str();
  add_bin_flags(eval, eval_cmd.flags.bins, eval_cmd.flags.include_near_key);
  CLI::Option* eval_gnn_seed = add_train_flags(eval, eval_cmd.flags.train);

  ExperimentCmd exp_cmd;
  CLI::App* experiment =
      app.add_subcommand("experiment", "compare strategies under one frozen model config");
  experiment->fallthrough();
  add_data_flags(experiment, exp_cmd.data, exp_cmd.target, exp_cmd.strict_fk);
  experiment->add_option("--strategies", exp_cmd.opts.strategies,
                         "strategies to run (default reg,all-promote,random-k,augraph)")
      ->delimiter(',');
  experiment->add_option("--seeds", exp_cmd.opts.random_seeds,
                         "random-k draw seeds (default seed, seed+1, seed+2)")
      ->delimiter(',');
  experiment->add_option("--k", exp_cmd.opts.k, "promotion budget")->capture_default_str();
  experiment->add_option("--tau", exp_cmd.opts.tau, "promotion threshold (default per scorer)");
  experiment->add_option("--metric", exp_cmd.opts.metric, "validation metric that picks the scorer")
      ->capture_default_str();
  experiment->add_option("--knn-k", exp_cmd.opts.knn_k, "neighbors per row for knn")
      ->capture_default_str();
  experiment->add_flag("--curve", exp_cmd.opts.with_curve, "emit the per-budget accuracy sweep");
  experiment->add_option("--curve-k-max", exp_cmd.opts.curve_k_max, "largest budget in the sweep")
      ->capture_default_str();
  experiment->add_flag("--retrain-per-round,!--no-retrain", exp_cmd.opts.retrain_per_round,
                       "refit the frozen gnn-gain model each round");
  bool exp_include_near_key = false;  // pool options are fixed inside the runner
  add_bin_flags(experiment, exp_cmd.opts.bins, exp_include_near_key);
  CLI::Option* exp_gnn_seed = add_train_flags(experiment, exp_cmd.opts.train);

  GradcheckCmd grad_cmd;
  grad_cmd.train.width = 8;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "compare analytic gradients against central differences");
  gradcheck->fallthrough();
  gradcheck->add_option("--data", grad_cmd.data, "dataset directory (default: bundled instance)");
  gradcheck->add_option("--target", grad_cmd.target, "task target relation");
  gradcheck->add_flag("--strict-fk", grad_cmd.strict_fk, "reject missing foreign-key values");
  gradcheck->add_option("--step", grad_cmd.step, "finite-difference step")->capture_default_str();
  gradcheck->add_option("--tolerance", grad_cmd.tolerance, "pass threshold")
      ->capture_default_str();
  CLI::Option* grad_gnn_seed = add_train_flags(gradcheck, grad_cmd.train);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << json_text(error_json("validation", e.what()));
    return kExitValidation;
  }

  // the model seed follows the root seed unless pinned explicitly
  auto tie_seed = [&](CLI::Option* opt, TrainConfig& t) {
    if (opt->count() == 0) t.seed = g.seed;
  };
  tie_seed(build_gnn_seed, build_cmd.flags.train);
  tie_seed(score_gnn_seed, score_cmd.train);
  tie_seed(augment_gnn_seed, augment_cmd.flags.train);
  tie_seed(train_gnn_seed, train_cmd.flags.train);
  tie_seed(eval_gnn_seed, eval_cmd.flags.train);
  tie_seed(exp_gnn_seed, exp_cmd.opts.train);
  tie_seed(grad_gnn_seed, grad_cmd.train);

  try {
    if (app.got_subcommand(synth))
      cmd_synth(synth_cfg, g, out);
    else if (app.got_subcommand(build))
      cmd_build(build_cmd, g, out, err);
    else if (app.got_subcommand(score))
      cmd_score(score_cmd, g, out, err);
    else if (app.got_subcommand(augment))
      cmd_augment(augment_cmd, g, out, err);
    else if (app.got_subcommand(train))
      cmd_train(train_cmd, g, out, err);
    else if (app.got_subcommand(eval))
      cmd_eval(eval_cmd, g, out, err);
    else if (app.got_subcommand(experiment))
      cmd_experiment(exp_cmd, g, out, err);
    else if (app.got_subcommand(gradcheck))
      cmd_gradcheck(grad_cmd, g, out, err);
    return kExitOk;
  } catch (const Error& e) {
    err << json_text(error_json(e.kind == Error::Kind::Validation ? "validation" : "runtime",
                                e.what(), e.detail));
    return e.kind == Error::Kind::Validation ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << json_text(error_json("runtime", e.what()));
    return kExitRuntime;
  }
}

}  // namespace cli
}  // namespace augraph
