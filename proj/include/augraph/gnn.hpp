#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "augraph/encoding.hpp"
#include "augraph/hetero_graph.hpp"
#include "augraph/metrics.hpp"
#include "augraph/params.hpp"
#include "augraph/rng.hpp"

namespace augraph {

struct TrainConfig {
  int width = 32;
  int layers = 2;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 200;
  uint64_t seed = 42;
  bool relu = true;  // identity activation is for linear-regime gradient checks

  void validate() const {
    if (width < 2) fail_validation("gnn: width must be >= 2");
    if (layers < 0 || layers > 8) fail_validation("gnn: layers must be in [0, 8]");
    if (lr <= 0.0) fail_validation("gnn: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) fail_validation("gnn: momentum must be in [0, 1)");
    if (weight_decay < 0.0) fail_validation("gnn: weight decay must be nonnegative");
    if (epochs < 0) fail_validation("gnn: epochs must be nonnegative");
  }

  json to_json() const {
    return {{"width", width},         {"layers", layers},
            {"lr", lr},               {"momentum", momentum},
            {"weight_decay", weight_decay}, {"epochs", epochs},
            {"seed", seed},           {"relu", relu}};
  }

  static TrainConfig from_json(const json& j) {
    TrainConfig cfg;
    if (j.contains("width")) cfg.width = j.at("width").get<int>();
    if (j.contains("layers")) cfg.layers = j.at("layers").get<int>();
    if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
    if (j.contains("momentum")) cfg.momentum = j.at("momentum").get<double>();
    if (j.contains("weight_decay")) cfg.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("relu")) cfg.relu = j.at("relu").get<bool>();
    cfg.validate();
    return cfg;
  }
};

struct EvalResult {
  std::string split;
  size_t count = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> roc_auc;          // binary tasks only
  std::vector<std::string> keys;          // evaluated vertices, in row order
  std::vector<int> y_true;
  std::vector<int> y_pred;
  std::vector<std::vector<double>> probs;  // per vertex, per class

  json to_json(bool include_scores = false) const {
    json out = {{"split", split}, {"count", count}, {"accuracy", accuracy}, {"f1", f1}};
    out["roc_auc"] = roc_auc ? json(*roc_auc) : json(nullptr);
    if (include_scores) {
      json scores = json::array();
      for (size_t i = 0; i < keys.size(); ++i)
        scores.push_back({{"key", keys[i]},
                          {"label", y_true[i]},
                          {"predicted", y_pred[i]},
                          {"probs", probs[i]}});
      out["scores"] = scores;
    }
    return out;
  }
};

// Weight-tying strength pulling every transform toward the shared fallback
// transform (and every type constant toward the fallback constant). The sum
// of squared differences is averaged over the tied scalar count so the term
// stays small relative to the cross-entropy at any width.
inline constexpr double kTyingWeight = 0.01;

class GnnModel {
 public:
  TrainConfig cfg;
  std::string target_relation;
  std::vector<std::string> classes;
  std::string train_fingerprint;
  EncoderSpec enc;
  ParamStore params;
  std::vector<std::string> seen_vtypes;  // vertex types present at training time
  std::vector<std::string> seen_etypes;

  int n_classes() const { return static_cast<int>(classes.size()); }

  static std::string const_name(const std::string& vtype) { return "const:" + vtype; }
  static std::string self_w_name(int layer, const std::string& vtype) {
    return "self:W:" + std::to_string(layer) + ":" + vtype;
  }
  static std::string self_b_name(int layer, const std::string& vtype) {
    return "self:b:" + std::to_string(layer) + ":" + vtype;
  }
  static std::string edge_w_name(int layer, const std::string& etype, bool forward) {
    return "edge:W:" + std::to_string(layer) + ":" + etype + (forward ? ":fwd" : ":rev");
  }
  static std::string edge_b_name(int layer, const std::string& etype, bool forward) {
    return "edge:b:" + std::to_string(layer) + ":" + etype + (forward ? ":fwd" : ":rev");
  }
  static std::string fallback_w_name(int layer) { return "fb:W:" + std::to_string(layer); }
  static std::string fallback_b_name(int layer) { return "fb:b:" + std::to_string(layer); }

  // Segment lookups fall back to the shared transform for types that did not
  // exist when the model was trained (value types added by later promotions).
  int const_seg(const std::string& vtype) const {
    int id = params.find(const_name(vtype));
    return id >= 0 ? id : params.find("const:~fallback");
  }
  int self_w_seg(int layer, const std::string& vtype) const {
    int id = params.find(self_w_name(layer, vtype));
    return id >= 0 ? id : params.find(fallback_w_name(layer));
  }
  int self_b_seg(int layer, const std::string& vtype) const {
    int id = params.find(self_b_name(layer, vtype));
    return id >= 0 ? id : params.find(fallback_b_name(layer));
  }
  int edge_w_seg(int layer, const std::string& etype, bool forward) const {
    int id = params.find(edge_w_name(layer, etype, forward));
    return id >= 0 ? id : params.find(fallback_w_name(layer));
  }
  int edge_b_seg(int layer, const std::string& etype, bool forward) const {
    int id = params.find(edge_b_name(layer, etype, forward));
    return id >= 0 ? id : params.find(fallback_b_name(layer));
  }

  json to_json() const {
    json buckets = json::array();
    for (uint64_t b : enc.buckets) buckets.push_back(b);
    json numeric = json::object();
    for (const auto& [k, st] : enc.numeric)
      numeric[k] = {{"mean", st.mean}, {"stddev", st.stddev},
                    {"channel", enc.numeric_channel.at(k)}};
    return {{"format", "augraph-gnn-checkpoint"},
            {"version", 1},
            {"config", cfg.to_json()},
            {"target_relation", target_relation},
            {"classes", classes},
            {"train_fingerprint", train_fingerprint},
            {"buckets", buckets},
            {"numeric", numeric},
            {"seen_vtypes", seen_vtypes},
            {"seen_etypes", seen_etypes},
            {"segments", params.to_json()}};
  }

  static GnnModel from_json(const json& j) {
    if (!j.contains("format") || j.at("format") != "augraph-gnn-checkpoint")
      fail_validation("not a model checkpoint");
    GnnModel m;
    m.cfg = TrainConfig::from_json(j.at("config"));
    m.target_relation = j.at("target_relation").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.train_fingerprint = j.at("train_fingerprint").get<std::string>();
    m.enc.width = m.cfg.width;
    for (const auto& b : j.at("buckets")) m.enc.buckets.push_back(b.get<uint64_t>());
    for (const auto& [k, v] : j.at("numeric").items()) {
      m.enc.numeric[k] = NumericStat{v.at("mean").get<double>(), v.at("stddev").get<double>()};
      m.enc.numeric_channel[k] = v.at("channel").get<int>();
    }
    m.seen_vtypes = j.at("seen_vtypes").get<std::vector<std::string>>();
    m.seen_etypes = j.at("seen_etypes").get<std::vector<std::string>>();
    m.params = ParamStore::from_json(j.at("segments"));
    return m;
  }
};

namespace gnn_detail {

// One message pass: receivers of `recv_type` aggregate the mean of their
// neighbors' activations in `send_type`, through the transform at (Wseg,
// bseg). Receivers with no neighbors are skipped outright.
struct MessagePass {
  int recv_type = -1;
  int send_type = -1;
  std::vector<std::vector<int>> nbrs;  // per receiver
  std::vector<char> mask;              // receiver has at least one neighbor
  std::vector<int> Wseg, bseg;         // per layer
};

struct Plan {
  const HeteroGraph* graph = nullptr;
  std::vector<std::string> type_names;
  std::vector<int> type_sizes;
  std::vector<int> const_seg;                    // per type
  std::vector<std::vector<int>> self_Wseg;       // [layer][type]
  std::vector<std::vector<int>> self_bseg;
  std::vector<MessagePass> messages;
  int target_type = -1;
  int head_W = -1, head_b = -1;
};

inline Plan build_plan(const GnnModel& model, const HeteroGraph& g) {
  Plan plan;
  plan.graph = &g;
  int L = model.cfg.layers;
  size_t T = g.vtypes.size();
  plan.type_names.reserve(T);
  for (const auto& vt : g.vtypes) {
    plan.type_names.push_back(vt.name);
    plan.type_sizes.push_back(vt.size());
  }
  plan.const_seg.resize(T);
  for (size_t t = 0; t < T; ++t) plan.const_seg[t] = model.const_seg(g.vtypes[t].name);
  plan.self_Wseg.assign(static_cast<size_t>(L), std::vector<int>(T));
  plan.self_bseg.assign(static_cast<size_t>(L), std::vector<int>(T));
  for (int l = 0; l < L; ++l)
    for (size_t t = 0; t < T; ++t) {
      plan.self_Wseg[static_cast<size_t>(l)][t] = model.self_w_seg(l, g.vtypes[t].name);
      plan.self_bseg[static_cast<size_t>(l)][t] = model.self_b_seg(l, g.vtypes[t].name);
    }

  for (const auto& e : g.etypes) {
    for (int dir = 0; dir < 2; ++dir) {
      bool forward = dir == 0;
      MessagePass mp;
      mp.recv_type = forward ? e.dst_type : e.src_type;
      mp.send_type = forward ? e.src_type : e.dst_type;
      size_t n_recv = static_cast<size_t>(plan.type_sizes[static_cast<size_t>(mp.recv_type)]);
      mp.nbrs.assign(n_recv, {});
      for (const auto& [s, d] : e.edges) {
        if (forward)
          mp.nbrs[static_cast<size_t>(d)].push_back(s);
        else
          mp.nbrs[static_cast<size_t>(s)].push_back(d);
      }
      mp.mask.resize(n_recv);
      for (size_t v = 0; v < n_recv; ++v) mp.mask[v] = mp.nbrs[v].empty() ? 0 : 1;
      for (int l = 0; l < L; ++l) {
        mp.Wseg.push_back(model.edge_w_seg(l, e.name, forward));
        mp.bseg.push_back(model.edge_b_seg(l, e.name, forward));
      }
      plan.messages.push_back(std::move(mp));
    }
  }

  plan.target_type = g.vtype_index(model.target_relation);
  if (plan.target_type < 0)
    fail_validation("graph has no vertex type for target relation '" + model.target_relation +
                    "'");
  plan.head_W = model.params.find("head:W");
  plan.head_b = model.params.find("head:b");
  return plan;
}

struct ForwardState {
  // H[l][type]: activations after layer l (H[0] is the encoded input).
  std::vector<std::vector<std::vector<double>>> H;
  // aggregated neighbor means per message pass per layer, stored for backprop
  std::vector<std::vector<std::vector<double>>> agg;  // [layer][message] n_recv*F
  std::vector<double> logits;                         // n_target * C
};

inline void forward(const GnnModel& model, const Plan& plan, const GraphEncoding& enc,
                    ForwardState& st) {
  int L = model.cfg.layers;
  size_t F = static_cast<size_t>(model.cfg.width);
  size_t T = plan.type_sizes.size();

  st.H.assign(static_cast<size_t>(L) + 1, {});
  st.H[0].resize(T);
  for (size_t t = 0; t < T; ++t) {
    size_t n = static_cast<size_t>(plan.type_sizes[t]);
    auto& H0 = st.H[0][t];
    H0 = enc.fixed[t];  // copy of the fixed channels
    const double* c = model.params.data(plan.const_seg[t]);
    for (size_t v = 0; v < n; ++v) {
      double* h = H0.data() + v * F;
      for (size_t i = 0; i < F; ++i) h[i] += c[i];
      for (int row : enc.emb_rows[t][v]) {
        const double* erow = model.params.data(model.params.find("emb")) +
                             static_cast<size_t>(row) * F;
        for (size_t i = 0; i < F; ++i) h[i] += erow[i];
      }
    }
  }

  st.agg.assign(static_cast<size_t>(L), {});
  for (int l = 0; l < L; ++l) {
    auto& Hin = st.H[static_cast<size_t>(l)];
    auto& Hout = st.H[static_cast<size_t>(l) + 1];
    Hout.resize(T);
    for (size_t t = 0; t < T; ++t) {
      size_t n = static_cast<size_t>(plan.type_sizes[t]);
      Hout[t].assign(n * F, 0.0);
      affine_accumulate(Hin[t].data(), n, F,
                        model.params.data(plan.self_Wseg[static_cast<size_t>(l)][t]),
                        model.params.data(plan.self_bseg[static_cast<size_t>(l)][t]), F,
                        Hout[t].data());
    }
    st.agg[static_cast<size_t>(l)].resize(plan.messages.size());
    for (size_t m = 0; m < plan.messages.size(); ++m) {
      const MessagePass& mp = plan.messages[m];
      size_t n_recv = static_cast<size_t>(plan.type_sizes[static_cast<size_t>(mp.recv_type)]);
      auto& A = st.agg[static_cast<size_t>(l)][m];
      A.assign(n_recv * F, 0.0);
      const auto& Hsend = Hin[static_cast<size_t>(mp.send_type)];
      for (size_t v = 0; v < n_recv; ++v) {
        const auto& nb = mp.nbrs[v];
        if (nb.empty()) continue;
        double* a = A.data() + v * F;
        for (int u : nb) {
          const double* h = Hsend.data() + static_cast<size_t>(u) * F;
          for (size_t i = 0; i < F; ++i) a[i] += h[i];
        }
        double inv = 1.0 / static_cast<double>(nb.size());
        for (size_t i = 0; i < F; ++i) a[i] *= inv;
      }
      // transform masked receivers only: empty neighborhoods contribute
      // nothing, not even the bias
      const double* W = model.params.data(mp.Wseg[static_cast<size_t>(l)]);
      const double* b = model.params.data(mp.bseg[static_cast<size_t>(l)]);
      auto& Z = Hout[static_cast<size_t>(mp.recv_type)];
      for (size_t v = 0; v < n_recv; ++v) {
        if (!mp.mask[v]) continue;
        const double* a = A.data() + v * F;
        double* z = Z.data() + v * F;
        for (size_t o = 0; o < F; ++o) {
          const double* w = W + o * F;
          double acc = b[o];
          for (size_t i = 0; i < F; ++i) acc += w[i] * a[i];
          z[o] += acc;
        }
      }
    }
    if (model.cfg.relu)
      for (size_t t = 0; t < T; ++t)
        for (double& x : Hout[t])
          if (x < 0.0) x = 0.0;
  }

  size_t n_target = static_cast<size_t>(plan.type_sizes[static_cast<size_t>(plan.target_type)]);
  size_t C = static_cast<size_t>(model.n_classes());
  st.logits.assign(n_target * C, 0.0);
  affine_accumulate(st.H[static_cast<size_t>(L)][static_cast<size_t>(plan.target_type)].data(),
                    n_target, F, model.params.data(plan.head_W), model.params.data(plan.head_b),
                    C, st.logits.data());
}

inline void softmax_row(const double* logits, size_t C, double* probs) {
  double mx = logits[0];
  for (size_t c = 1; c < C; ++c) mx = std::max(mx, logits[c]);
  double sum = 0.0;
  for (size_t c = 0; c < C; ++c) {
    probs[c] = std::exp(logits[c] - mx);
    sum += probs[c];
  }
  for (size_t c = 0; c < C; ++c) probs[c] /= sum;
}

// Tied segments for the auxiliary term: every per-type transform pairs with
// its layer's fallback, every type constant with the fallback constant.
struct TyingPairs {
  std::vector<std::pair<int, int>> pairs;  // (tied segment, fallback segment)
  size_t tied_scalars = 0;
};

inline TyingPairs tying_pairs(const GnnModel& model) {
  TyingPairs tp;
  int fb_const = model.params.find("const:~fallback");
  for (size_t s = 0; s < model.params.segment_count(); ++s) {
    const auto& seg = model.params.seg(static_cast<int>(s));
    int fb = -1;
    if (seg.name.rfind("const:", 0) == 0 && seg.name != "const:~fallback") fb = fb_const;
    for (int l = 0; l < model.cfg.layers; ++l) {
      std::string lw = "self:W:" + std::to_string(l) + ":";
      std::string lb = "self:b:" + std::to_string(l) + ":";
      std::string ew = "edge:W:" + std::to_string(l) + ":";
      std::string eb = "edge:b:" + std::to_string(l) + ":";
      if (seg.name.rfind(lw, 0) == 0 || seg.name.rfind(ew, 0) == 0)
        fb = model.params.find(GnnModel::fallback_w_name(l));
      if (seg.name.rfind(lb, 0) == 0 || seg.name.rfind(eb, 0) == 0)
        fb = model.params.find(GnnModel::fallback_b_name(l));
    }
    if (fb >= 0) {
      tp.pairs.emplace_back(static_cast<int>(s), fb);
      tp.tied_scalars += seg.count();
    }
  }
  return tp;
}

inline double tying_loss(const GnnModel& model, const TyingPairs& tp) {
  if (tp.tied_scalars == 0) return 0.0;
  double sum = 0.0;
  for (const auto& [s, fb] : tp.pairs) {
    const double* a = model.params.data(s);
    const double* f = model.params.data(fb);
    size_t n = model.params.seg(s).count();
    for (size_t i = 0; i < n; ++i) {
      double dlt = a[i] - f[i];
      sum += dlt * dlt;
    }
  }
  return kTyingWeight * sum / static_cast<double>(tp.tied_scalars);
}

inline void tying_backward(GnnModel& model, const TyingPairs& tp) {
  if (tp.tied_scalars == 0) return;
  double scale = 2.0 * kTyingWeight / static_cast<double>(tp.tied_scalars);
  for (const auto& [s, fb] : tp.pairs) {
    const double* a = model.params.data(s);
    const double* f = model.params.data(fb);
    double* ga = model.params.grad(s);
    double* gf = model.params.grad(fb);
    size_t n = model.params.seg(s).count();
    for (size_t i = 0; i < n; ++i) {
      double d = scale * (a[i] - f[i]);
      ga[i] += d;
      gf[i] -= d;
    }
  }
}

// Train-split rows of the target type, with class indices.
struct Supervision {
  std::vector<int> rows;
  std::vector<int> labels;
};

inline Supervision supervision(const HeteroGraph& g, const Plan& plan, const TaskSpec& task) {
  Supervision sup;
  const VertexType& vt = g.vtypes[static_cast<size_t>(plan.target_type)];
  for (size_t v = 0; v < vt.ids.size(); ++v) {
    auto it = task.split.find(vt.ids[v]);
    if (it == task.split.end() || it->second != Split::Train) continue;
    sup.rows.push_back(static_cast<int>(v));
    sup.labels.push_back(task.class_index(task.labels.at(vt.ids[v])));
  }
  return sup;
}

// Cross-entropy over the supervised rows plus the tying term. Fills dlogits
// (same shape as logits) when requested.
inline double supervised_loss(const GnnModel& model, const ForwardState& st,
                              const Supervision& sup, const TyingPairs& tp,
                              std::vector<double>* dlogits) {
  size_t C = static_cast<size_t>(model.n_classes());
  if (dlogits) dlogits->assign(st.logits.size(), 0.0);
  double loss = 0.0;
  std::vector<double> probs(C);
  double inv_n = 1.0 / static_cast<double>(sup.rows.size());
  for (size_t k = 0; k < sup.rows.size(); ++k) {
    size_t v = static_cast<size_t>(sup.rows[k]);
    softmax_row(st.logits.data() + v * C, C, probs.data());
    double p = std::max(probs[static_cast<size_t>(sup.labels[k])], 1e-300);
    loss -= std::log(p) * inv_n;
    if (dlogits) {
      double* dl = dlogits->data() + v * C;
      for (size_t c = 0; c < C; ++c)
        dl[c] = (probs[c] - (static_cast<int>(c) == sup.labels[k] ? 1.0 : 0.0)) * inv_n;
    }
  }
  return loss + tying_loss(model, tp);
}

inline void backward(GnnModel& model, const Plan& plan, const GraphEncoding& enc,
                     const ForwardState& st, const std::vector<double>& dlogits,
                     const TyingPairs& tp) {
  int L = model.cfg.layers;
  size_t F = static_cast<size_t>(model.cfg.width);
  size_t T = plan.type_sizes.size();
  size_t C = static_cast<size_t>(model.n_classes());
  size_t tt = static_cast<size_t>(plan.target_type);
  size_t n_target = static_cast<size_t>(plan.type_sizes[tt]);

  // dH[t]: gradient w.r.t. activations of the layer currently processed
  std::vector<std::vector<double>> dH(T);
  for (size_t t = 0; t < T; ++t)
    dH[t].assign(static_cast<size_t>(plan.type_sizes[t]) * F, 0.0);

  affine_backward(st.H[static_cast<size_t>(L)][tt].data(), dlogits.data(), n_target, F, C,
                  model.params.data(plan.head_W), nullptr, dH[tt].data(),
                  model.params.grad(plan.head_W), model.params.grad(plan.head_b));

  std::vector<std::vector<double>> dHprev(T);
  for (int l = L - 1; l >= 0; --l) {
    auto& Hout = st.H[static_cast<size_t>(l) + 1];
    auto& Hin = st.H[static_cast<size_t>(l)];
    // activation gradient: ReLU passes where the output was positive
    if (model.cfg.relu)
      for (size_t t = 0; t < T; ++t) {
        const auto& h = Hout[t];
        auto& dh = dH[t];
        for (size_t i = 0; i < dh.size(); ++i)
          if (h[i] <= 0.0) dh[i] = 0.0;
      }

    for (size_t t = 0; t < T; ++t)
      dHprev[t].assign(static_cast<size_t>(plan.type_sizes[t]) * F, 0.0);

    for (size_t t = 0; t < T; ++t) {
      size_t n = static_cast<size_t>(plan.type_sizes[t]);
      int Wseg = plan.self_Wseg[static_cast<size_t>(l)][t];
      int bseg = plan.self_bseg[static_cast<size_t>(l)][t];
      affine_backward(Hin[t].data(), dH[t].data(), n, F, F, model.params.data(Wseg), nullptr,
                      dHprev[t].data(), model.params.grad(Wseg), model.params.grad(bseg));
    }

    for (size_t m = 0; m < plan.messages.size(); ++m) {
      const MessagePass& mp = plan.messages[m];
      size_t rt = static_cast<size_t>(mp.recv_type);
      size_t stype = static_cast<size_t>(mp.send_type);
      size_t n_recv = static_cast<size_t>(plan.type_sizes[rt]);
      int Wseg = mp.Wseg[static_cast<size_t>(l)];
      int bseg = mp.bseg[static_cast<size_t>(l)];
      const auto& A = st.agg[static_cast<size_t>(l)][m];
      std::vector<double> dA(n_recv * F, 0.0);
      affine_backward(A.data(), dH[rt].data(), n_recv, F, F, model.params.data(Wseg), &mp.mask,
                      dA.data(), model.params.grad(Wseg), model.params.grad(bseg));
      auto& dHs = dHprev[stype];
      for (size_t v = 0; v < n_recv; ++v) {
        if (!mp.mask[v]) continue;
        const double* da = dA.data() + v * F;
        double inv = 1.0 / static_cast<double>(mp.nbrs[v].size());
        for (int u : mp.nbrs[v]) {
          double* dst = dHs.data() + static_cast<size_t>(u) * F;
          for (size_t i = 0; i < F; ++i) dst[i] += da[i] * inv;
        }
      }
    }
    std::swap(dH, dHprev);
  }

  // layer-0 gradients flow into type constants and embedding rows
  int emb = model.params.find("emb");
  for (size_t t = 0; t < T; ++t) {
    size_t n = static_cast<size_t>(plan.type_sizes[t]);
    double* gconst = model.params.grad(plan.const_seg[t]);
    const auto& dh = dH[t];
    for (size_t v = 0; v < n; ++v) {
      const double* d = dh.data() + v * F;
      for (size_t i = 0; i < F; ++i) gconst[i] += d[i];
      for (int row : enc.emb_rows[t][v]) {
        double* ge = model.params.grad(emb) + static_cast<size_t>(row) * F;
        for (size_t i = 0; i < F; ++i) ge[i] += d[i];
      }
    }
  }

  tying_backward(model, tp);
}

}  // namespace gnn_detail

// Builds an untrained model with all segments allocated and seeded. The
// parameter layout depends only on (db, graph types, config).
inline GnnModel init_model(const HeteroGraph& g, const Database& db, const TaskSpec& task,
                           const TrainConfig& cfg) {
  cfg.validate();
  GnnModel m;
  m.cfg = cfg;
  m.target_relation = task.target_relation;
  m.classes = task.classes;
  m.train_fingerprint = g.fingerprint();
  m.enc = build_encoder_spec(db, cfg.width);

  size_t F = static_cast<size_t>(cfg.width);
  for (const auto& vt : g.vtypes) {
    m.seen_vtypes.push_back(vt.name);
    m.params.add(GnnModel::const_name(vt.name), 1, F);
  }
  m.params.add("const:~fallback", 1, F);
  m.params.add("emb", m.enc.buckets.size(), F);
  for (int l = 0; l < cfg.layers; ++l) {
    for (const auto& vt : g.vtypes) {
      m.params.add(GnnModel::self_w_name(l, vt.name), F, F);
      m.params.add(GnnModel::self_b_name(l, vt.name), 1, F);
    }
    for (const auto& et : g.etypes) {
      m.params.add(GnnModel::edge_w_name(l, et.name, true), F, F);
      m.params.add(GnnModel::edge_b_name(l, et.name, true), 1, F);
      m.params.add(GnnModel::edge_w_name(l, et.name, false), F, F);
      m.params.add(GnnModel::edge_b_name(l, et.name, false), 1, F);
    }
    m.params.add(GnnModel::fallback_w_name(l), F, F);
    m.params.add(GnnModel::fallback_b_name(l), 1, F);
  }
  for (const auto& et : g.etypes) m.seen_etypes.push_back(et.name);
  m.params.add("head:W", static_cast<size_t>(m.n_classes()), F);
  m.params.add("head:b", 1, static_cast<size_t>(m.n_classes()));

  // seed every segment from its own named stream: layout changes never
  // perturb other segments' draws
  for (size_t s = 0; s < m.params.segment_count(); ++s) {
    const auto& seg = m.params.seg(static_cast<int>(s));
    Rng rng = substream(cfg.seed, "init:" + seg.name);
    if (seg.name.rfind("emb", 0) == 0 || seg.name.rfind("const:", 0) == 0)
      m.params.init_scaled_normal(static_cast<int>(s), rng, 0.1);
    else if (seg.name.rfind("self:b", 0) == 0 || seg.name.rfind("edge:b", 0) == 0 ||
             seg.name.rfind("fb:b", 0) == 0 || seg.name == "head:b")
      ;  // biases start at zero
    else
      m.params.init_glorot(static_cast<int>(s), rng);
  }
  return m;
}

struct TrainStats {
  std::vector<double> loss_per_epoch;
  double final_train_accuracy = 0.0;
};

inline void train_model(GnnModel& model, const HeteroGraph& g, const Database& db,
                        const TaskSpec& task, TrainStats* stats = nullptr) {
  using namespace gnn_detail;
  if (!db.task_attached) fail_validation("gnn: task must be attached before training");
  Plan plan = build_plan(model, g);
  GraphEncoding enc = encode_graph(g, db, model.enc);
  Supervision sup = supervision(g, plan, task);
  if (sup.rows.empty()) fail_validation("gnn: empty training split");
  {
    std::set<int> distinct(sup.labels.begin(), sup.labels.end());
    if (distinct.size() < 2)
      fail_validation("gnn: training split contains a single class; nothing to separate");
  }
  TyingPairs tp = tying_pairs(model);

  std::vector<double> velocity(model.params.size(), 0.0);
  ForwardState st;
  std::vector<double> dlogits;
  for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
    forward(model, plan, enc, st);
    model.params.zero_grad();
    double loss = supervised_loss(model, st, sup, tp, &dlogits);
    if (!std::isfinite(loss))
      fail_runtime("gnn: non-finite loss at epoch " + std::to_string(epoch),
                   {{"epoch", epoch}});
    if (stats) stats->loss_per_epoch.push_back(loss);
    backward(model, plan, enc, st, dlogits, tp);

    auto& theta = model.params.theta();
    auto& grad = model.params.grads();
    for (size_t i = 0; i < theta.size(); ++i) {
      double gi = grad[i] + model.cfg.weight_decay * theta[i];
      velocity[i] = model.cfg.momentum * velocity[i] - model.cfg.lr * gi;
      theta[i] += velocity[i];
    }
  }

  if (stats) {
    forward(model, plan, enc, st);
    size_t C = static_cast<size_t>(model.n_classes());
    size_t hit = 0;
    for (size_t k = 0; k < sup.rows.size(); ++k) {
      const double* lg = st.logits.data() + static_cast<size_t>(sup.rows[k]) * C;
      int best = 0;
      for (size_t c = 1; c < C; ++c)
        if (lg[c] > lg[static_cast<size_t>(best)]) best = static_cast<int>(c);
      if (best == sup.labels[k]) ++hit;
    }
    stats->final_train_accuracy = static_cast<double>(hit) / static_cast<double>(sup.rows.size());
  }
}

inline GnnModel train(const HeteroGraph& g, const Database& db, const TaskSpec& task,
                      const TrainConfig& cfg, TrainStats* stats = nullptr) {
  GnnModel model = init_model(g, db, task, cfg);
  train_model(model, g, db, task, stats);
  return model;
}

inline EvalResult evaluate(const GnnModel& model, const HeteroGraph& g, const Database& db,
                           const TaskSpec& task, Split split) {
  using namespace gnn_detail;
  Plan plan = build_plan(model, g);
  GraphEncoding enc = encode_graph(g, db, model.enc);
  ForwardState st;
  forward(model, plan, enc, st);

  const VertexType& vt = g.vtypes[static_cast<size_t>(plan.target_type)];
  size_t C = static_cast<size_t>(model.n_classes());
  EvalResult res;
  res.split = split_name(split);
  std::vector<double> probs(C);
  for (size_t v = 0; v < vt.ids.size(); ++v) {
    auto it = task.split.find(vt.ids[v]);
    if (it == task.split.end() || it->second != split) continue;
    softmax_row(st.logits.data() + v * C, C, probs.data());
    int pred = 0;
    for (size_t c = 1; c < C; ++c)
      if (probs[c] > probs[static_cast<size_t>(pred)]) pred = static_cast<int>(c);
    res.keys.push_back(vt.ids[v]);
    res.y_true.push_back(task.class_index(task.labels.at(vt.ids[v])));
    res.y_pred.push_back(pred);
    res.probs.push_back(probs);
  }
  if (res.keys.empty())
    fail_validation("gnn: split '" + std::string(split_name(split)) + "' is empty");
  res.count = res.keys.size();
  res.accuracy = metrics::accuracy(res.y_true, res.y_pred);
  res.f1 = metrics::f1_score(res.y_true, res.y_pred, model.n_classes());
  if (model.n_classes() == 2) {
    std::vector<double> pos_scores(res.count);
    for (size_t i = 0; i < res.count; ++i) pos_scores[i] = res.probs[i][1];
    res.roc_auc = metrics::roc_auc(res.y_true, pos_scores);
  }
  return res;
}

// Central-difference check of the full training loss (cross-entropy plus
// tying term; weight decay lives in the optimizer, not the loss). Returns
// the worst relative disagreement across every parameter. Checks the model
// at its current parameters, whatever they are.
inline double gradient_check_at(GnnModel& model, const HeteroGraph& g, const Database& db,
                                const TaskSpec& task, double step = 1e-5) {
  using namespace gnn_detail;
  Plan plan = build_plan(model, g);
  GraphEncoding enc = encode_graph(g, db, model.enc);
  Supervision sup = supervision(g, plan, task);
  if (sup.rows.empty()) fail_validation("gradient check: empty training split");
  TyingPairs tp = tying_pairs(model);

  ForwardState st;
  std::vector<double> dlogits;
  forward(model, plan, enc, st);
  model.params.zero_grad();
  supervised_loss(model, st, sup, tp, &dlogits);
  backward(model, plan, enc, st, dlogits, tp);
  std::vector<double> analytic = model.params.grads();

  auto loss_at = [&]() {
    forward(model, plan, enc, st);
    return supervised_loss(model, st, sup, tp, nullptr);
  };

  double worst = 0.0;
  auto& theta = model.params.theta();
  for (size_t i = 0; i < theta.size(); ++i) {
    double keep = theta[i];
    theta[i] = keep + step;
    double up = loss_at();
    theta[i] = keep - step;
    double down = loss_at();
    theta[i] = keep;
    double numeric = (up - down) / (2.0 * step);
    double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-8);
    double rel = std::abs(analytic[i] - numeric) / denom;
    if (std::abs(analytic[i]) < 1e-10 && std::abs(numeric) < 1e-10) rel = 0.0;
    worst = std::max(worst, rel);
  }
  return worst;
}

inline double gradient_check(const HeteroGraph& g, const Database& db, const TaskSpec& task,
                             const TrainConfig& cfg, double step = 1e-5) {
  GnnModel model = init_model(g, db, task, cfg);
  return gradient_check_at(model, g, db, task, step);
}

}  // namespace augraph
