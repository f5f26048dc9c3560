#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "augraph/common.hpp"
#include "augraph/rng.hpp"

namespace augraph {

// Flat parameter vector with named matrix segments. Keeping every learned
// weight in one contiguous array makes the optimizer, the checkpoint format,
// and finite-difference sweeps trivial.
class ParamStore {
 public:
  struct Segment {
    std::string name;
    size_t offset = 0;
    size_t rows = 0;
    size_t cols = 0;
    size_t count() const { return rows * cols; }
  };

  int add(const std::string& name, size_t rows, size_t cols) {
    if (index_.count(name)) fail_runtime("duplicate parameter segment '" + name + "'");
    Segment seg{name, theta_.size(), rows, cols};
    int id = static_cast<int>(segs_.size());
    index_.emplace(name, id);
    segs_.push_back(seg);
    theta_.resize(theta_.size() + seg.count(), 0.0);
    grad_.resize(theta_.size(), 0.0);
    return id;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  const Segment& seg(int id) const { return segs_[static_cast<size_t>(id)]; }
  size_t segment_count() const { return segs_.size(); }
  size_t size() const { return theta_.size(); }

  double* data(int id) { return theta_.data() + segs_[static_cast<size_t>(id)].offset; }
  const double* data(int id) const { return theta_.data() + segs_[static_cast<size_t>(id)].offset; }
  double* grad(int id) { return grad_.data() + segs_[static_cast<size_t>(id)].offset; }
  const double* grad(int id) const { return grad_.data() + segs_[static_cast<size_t>(id)].offset; }

  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }
  std::vector<double>& grads() { return grad_; }
  const std::vector<double>& grads() const { return grad_; }

  void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

  // Glorot-uniform for matrices acting as linear maps; callers can rescale
  // afterwards for segments that behave like inputs (embeddings, constants).
  void init_glorot(int id, Rng& rng) {
    Segment& s = segs_[static_cast<size_t>(id)];
    double a = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
    double* p = data(id);
    for (size_t i = 0; i < s.count(); ++i) p[i] = rng.next_uniform(-a, a);
  }

  void init_scaled_normal(int id, Rng& rng, double scale) {
    Segment& s = segs_[static_cast<size_t>(id)];
    double* p = data(id);
    for (size_t i = 0; i < s.count(); ++i) p[i] = scale * rng.next_normal();
  }

  json to_json() const {
    json segments = json::array();
    for (size_t i = 0; i < segs_.size(); ++i) {
      const Segment& s = segs_[i];
      json values = json::array();
      const double* p = theta_.data() + s.offset;
      for (size_t k = 0; k < s.count(); ++k) values.push_back(p[k]);
      segments.push_back(
          {{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"values", values}});
    }
    return segments;
  }

  static ParamStore from_json(const json& segments) {
    ParamStore out;
    for (const auto& s : segments) {
      int id = out.add(s.at("name").get<std::string>(), s.at("rows").get<size_t>(),
                       s.at("cols").get<size_t>());
      const auto& values = s.at("values");
      if (values.size() != out.seg(id).count())
        fail_validation("checkpoint segment '" + out.seg(id).name + "' has " +
                        std::to_string(values.size()) + " values, expected " +
                        std::to_string(out.seg(id).count()));
      double* p = out.data(id);
      for (size_t k = 0; k < values.size(); ++k) p[k] = values[k].get<double>();
    }
    return out;
  }

 private:
  std::vector<Segment> segs_;
  std::map<std::string, int> index_;
  std::vector<double> theta_;
  std::vector<double> grad_;
};

// Y (n x out) += X (n x in) * W^T (W is out x in), then + b per row.
// Plain triple loop; widths here are tiny (<= 64).
inline void affine_accumulate(const double* X, size_t n, size_t in, const double* W,
                              const double* b, size_t out, double* Y) {
  for (size_t r = 0; r < n; ++r) {
    const double* x = X + r * in;
    double* y = Y + r * out;
    for (size_t o = 0; o < out; ++o) {
      const double* w = W + o * in;
      double acc = b ? b[o] : 0.0;
      for (size_t i = 0; i < in; ++i) acc += w[i] * x[i];
      y[o] += acc;
    }
  }
}

// Backward pair for the affine above, restricted to rows where mask is true
// (or all rows when mask is null):
//   dX += dY * W;  dW += dY^T * X;  db += column sums of dY.
inline void affine_backward(const double* X, const double* dY, size_t n, size_t in, size_t out,
                            const double* W, const std::vector<char>* mask, double* dX, double* dW,
                            double* db) {
  for (size_t r = 0; r < n; ++r) {
    if (mask && !(*mask)[r]) continue;
    const double* dy = dY + r * out;
    const double* x = X + r * in;
    double* dx = dX ? dX + r * in : nullptr;
    for (size_t o = 0; o < out; ++o) {
      double g = dy[o];
      if (g == 0.0) continue;
      const double* w = W + o * in;
      double* dwrow = dW + o * in;
      if (db) db[o] += g;
      for (size_t i = 0; i < in; ++i) {
        dwrow[i] += g * x[i];
        if (dx) dx[i] += g * w[i];
      }
    }
  }
}

}  // namespace augraph
