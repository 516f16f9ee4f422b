#pragma once

// Multi-head graph attention over a small fully connected graph of stream
// nodes. Each node carries per-frame features [T, D]; attention is computed
// independently at every time step, over all nodes including self.

#include <grad/tensor.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace grad::gat {

template <class T>
struct GatHeadParams {
  std::vector<Tensor<T>> w;  // one [D, head_dim] per node
  Tensor<T> a_src, a_dst;    // attention vector halves, [head_dim, 1]
};

template <class T>
struct GatParams {
  int num_nodes = 0, in_dim = 0, heads = 0, head_dim = 0;
  double attn_dropout = 0.5;
  std::vector<GatHeadParams<T>> head;

  static GatParams init(int num_nodes, int in_dim, int heads, int head_dim, Rng& rng) {
    GatParams p;
    p.num_nodes = num_nodes;
    p.in_dim = in_dim;
    p.heads = heads;
    p.head_dim = head_dim;
    p.head.resize(size_t(heads));
    const double sw = std::sqrt(1.0 / double(in_dim));
    const double sa = std::sqrt(1.0 / double(head_dim));
    auto make = [&](Shape shape, double s) {
      std::vector<T> v(size_t(shape_numel(shape)));
      for (auto& x : v) x = T(rng.uniform(-s, s));
      return Tensor<T>::from(std::move(shape), std::move(v), true);
    };
    for (auto& h : p.head) {
      for (int u = 0; u < num_nodes; ++u) h.w.push_back(make({in_dim, head_dim}, sw));
      h.a_src = make({head_dim, 1}, sa);
      h.a_dst = make({head_dim, 1}, sa);
    }
    return p;
  }

  std::vector<Tensor<T>*> params() {
    std::vector<Tensor<T>*> v;
    for (auto& h : head) {
      for (auto& w : h.w) v.push_back(&w);
      v.push_back(&h.a_src);
      v.push_back(&h.a_dst);
    }
    return v;
  }
};

// Attention weights for inspection: alphas[k][u] is [T, num_nodes], rows
// summing to 1 (computed without dropout).
template <class T>
struct GatTrace {
  std::vector<std::vector<Tensor<T>>> alphas;
};

// nodes: num_nodes tensors of shape [T, in_dim] -> num_nodes tensors of
// shape [T, heads * head_dim].
template <class T>
std::vector<Tensor<T>> gat_forward(const GatParams<T>& p, const std::vector<Tensor<T>>& nodes,
                                   Rng& rng, bool training, GatTrace<T>* trace = nullptr) {
  const int V = int(nodes.size());
  if (V < 1 || V > p.num_nodes)
    throw ShapeError("gat_forward: got " + std::to_string(V) + " nodes, params hold " +
                     std::to_string(p.num_nodes));
  const int64_t t_len = nodes[0].dim(0);
  for (const auto& n : nodes)
    if (n.rank() != 2 || n.dim(0) != t_len || n.dim(1) != p.in_dim)
      throw ShapeError("gat_forward: node shape " + shape_str(n.shape()));

  if (trace) trace->alphas.assign(size_t(p.heads), {});
  std::vector<std::vector<Tensor<T>>> per_head{size_t(V)};  // [u][k] -> [T, head_dim]
  for (int k = 0; k < p.heads; ++k) {
    const auto& h = p.head[size_t(k)];
    std::vector<Tensor<T>> proj, s_src, s_dst;
    for (int v = 0; v < V; ++v) {
      proj.push_back(matmul(nodes[size_t(v)], h.w[size_t(v)]));  // [T, head_dim]
      s_src.push_back(matmul(proj.back(), h.a_src));             // [T, 1]
      s_dst.push_back(matmul(proj.back(), h.a_dst));
    }
    for (int u = 0; u < V; ++u) {
      std::vector<Tensor<T>> e;
      for (int v = 0; v < V; ++v) e.push_back(leaky_relu(add(s_src[size_t(u)], s_dst[size_t(v)])));
      auto alpha = softmax(concat(e, 1), 1);  // [T, V], rows sum to 1
      if (trace) trace->alphas[size_t(k)].push_back(alpha);
      alpha = dropout(alpha, p.attn_dropout, rng, training);
      Tensor<T> agg;
      for (int v = 0; v < V; ++v) {
        auto w = reshape(slice(alpha, 1, v, 1), {t_len});
        auto term = rowwise_scale(proj[size_t(v)], w);
        agg = v == 0 ? term : add(agg, term);
      }
      per_head[size_t(u)].push_back(agg);
    }
  }
  std::vector<Tensor<T>> out;
  for (int u = 0; u < V; ++u) out.push_back(leaky_relu(concat(per_head[size_t(u)], 1)));
  return out;
}

}  // namespace grad::gat
