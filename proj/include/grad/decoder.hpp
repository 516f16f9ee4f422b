#pragma once

// Fusion of stream embeddings with graph-attention outputs and the
// calibrated cross-entropy decoder head.

#include <grad/tensor.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace grad::dec {

// How the fused representation E is formed from the per-stream embeddings
// and (for `graph`) the graph-attention outputs.
enum class FusionMode { graph, add, concat };

inline const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::graph: return "graph";
    case FusionMode::add: return "add";
    case FusionMode::concat: return "concat";
  }
  return "?";
}

inline FusionMode fusion_mode_from_name(const std::string& name) {
  for (FusionMode m : {FusionMode::graph, FusionMode::add, FusionMode::concat})
    if (name == fusion_mode_name(m)) return m;
  throw std::runtime_error("unknown fusion mode: " + name);
}

namespace detail {

template <class T>
Tensor<T> init_param(Shape shape, int64_t fan_in, Rng& rng) {
  const double s = std::sqrt(1.0 / double(std::max<int64_t>(1, fan_in)));
  std::vector<T> v(size_t(shape_numel(shape)));
  for (auto& x : v) x = T(rng.uniform(-s, s));
  return Tensor<T>::from(std::move(shape), std::move(v), true);
}

}  // namespace detail

template <class T>
struct FusionParams {
  FusionMode mode = FusionMode::graph;
  Tensor<T> we, be;  // over concatenated (or summed) embeddings
  Tensor<T> wg, bg;  // over concatenated graph outputs (graph mode only)

  static FusionParams init(FusionMode mode, int num_streams, int dim, int out_dim, Rng& rng) {
    FusionParams p;
    p.mode = mode;
    const int64_t ein = mode == FusionMode::add ? dim : int64_t(num_streams) * dim;
    p.we = detail::init_param<T>({ein, out_dim}, ein, rng);
    p.be = detail::init_param<T>({out_dim}, ein, rng);
    if (mode == FusionMode::graph) {
      const int64_t gin = int64_t(num_streams) * dim;
      p.wg = detail::init_param<T>({gin, out_dim}, gin, rng);
      p.bg = detail::init_param<T>({out_dim}, gin, rng);
    }
    return p;
  }

  std::vector<Tensor<T>*> params() {
    if (mode == FusionMode::graph) return {&we, &be, &wg, &bg};
    return {&we, &be};
  }
};

// graph:  E = alpha * l(concat emb) + beta * l(concat graph outputs)
// add:    E = l(sum of emb)
// concat: E = l(concat emb)
template <class T>
Tensor<T> fuse(const FusionParams<T>& p, const std::vector<Tensor<T>>& emb,
               const std::vector<Tensor<T>>& graph_out, T alpha, T beta) {
  if (emb.empty()) throw ShapeError("fuse: no embedding streams");
  switch (p.mode) {
    case FusionMode::graph: {
      if (graph_out.size() != emb.size())
        throw ShapeError("fuse: graph mode needs one graph output per stream");
      auto e = linear(concat(emb, 1), p.we, p.be);
      auto g = linear(concat(graph_out, 1), p.wg, p.bg);
      return add(scale(e, alpha), scale(g, beta));
    }
    case FusionMode::add: {
      Tensor<T> s = emb[0];
      for (size_t i = 1; i < emb.size(); ++i) s = add(s, emb[i]);
      return linear(s, p.we, p.be);
    }
    case FusionMode::concat:
      return linear(concat(emb, 1), p.we, p.be);
  }
  throw ShapeError("fuse: bad mode");
}

template <class T>
struct HeadParams {
  Tensor<T> w, b;

  static HeadParams init(int in_dim, int num_classes, Rng& rng) {
    HeadParams p;
    p.w = detail::init_param<T>({in_dim, num_classes}, in_dim, rng);
    p.b = detail::init_param<T>({num_classes}, in_dim, rng);
    return p;
  }

  std::vector<Tensor<T>*> params() { return {&w, &b}; }
};

template <class T>
Tensor<T> head_logits(const HeadParams<T>& p, const Tensor<T>& e) {
  return linear(e, p.w, p.b);
}

// Calibrated cross entropy: L = -(1/T) sum_t (1 + lambda * p_y) * log p_y,
// with p = softmax(logits) and p_y clamped away from zero.
template <class T>
Tensor<T> calibrated_ce(const Tensor<T>& logits, const std::vector<int>& labels, T lambda) {
  if (logits.rank() != 2 || int64_t(labels.size()) != logits.dim(0))
    throw ShapeError("calibrated_ce: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  const int64_t t_len = logits.dim(0), C = logits.dim(1);
  std::vector<T> onehot(size_t(t_len * C), T(0));
  for (int64_t t = 0; t < t_len; ++t) {
    if (labels[size_t(t)] < 0 || labels[size_t(t)] >= C)
      throw ShapeError("calibrated_ce: label out of range");
    onehot[size_t(t * C + labels[size_t(t)])] = T(1);
  }
  auto mask = Tensor<T>::from({t_len, C}, std::move(onehot));
  auto p = softmax(logits, 1);
  auto py = clamp_min(row_sum(mul(p, mask)), T(1e-7));  // [T, 1]
  auto weight = add(Tensor<T>({t_len, 1}, T(1)), scale(py, lambda));
  return neg(mean(mul(weight, log_(py))));
}

// Per-frame argmax class indices.
template <class T>
std::vector<int> predict(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("predict: need [T, C]");
  const int64_t t_len = logits.dim(0), C = logits.dim(1);
  std::vector<int> out(size_t(t_len), 0);
  for (int64_t t = 0; t < t_len; ++t) {
    int best = 0;
    for (int64_t c = 1; c < C; ++c)
      if (logits.data()[t * C + c] > logits.data()[t * C + best]) best = int(c);
    out[size_t(t)] = best;
  }
  return out;
}

}  // namespace grad::dec
