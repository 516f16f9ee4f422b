#pragma once

// Stream encoders: a small 3-block CNN for per-frame visual embeddings, a
// temporal convolutional network (TCN), an LSTM, and the combined kinematic
// and visual encoders built from them. All sequence tensors are [T, D].

#include <grad/tensor.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace grad::enc {

inline constexpr int kEmbedDim = 64;

namespace detail {

template <class T>
Tensor<T> init_param(Shape shape, int64_t fan_in, Rng& rng) {
  const double s = std::sqrt(1.0 / double(std::max<int64_t>(1, fan_in)));
  std::vector<T> v(size_t(shape_numel(shape)));
  for (auto& x : v) x = T(rng.uniform(-s, s));
  return Tensor<T>::from(std::move(shape), std::move(v), true);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CNN: 3 x (3x3 conv -> leaky_relu -> 2x2 max pool), channels 8/16/32,
// global average pool, linear projection to kEmbedDim.
// ---------------------------------------------------------------------------

template <class T>
struct CnnParams {
  Tensor<T> w1, b1, w2, b2, w3, b3, pw, pb;
  int in_channels = 0;

  static CnnParams init(int in_channels, Rng& rng) {
    CnnParams p;
    p.in_channels = in_channels;
    p.w1 = detail::init_param<T>({8, in_channels, 3, 3}, int64_t(in_channels) * 9, rng);
    p.b1 = detail::init_param<T>({8}, int64_t(in_channels) * 9, rng);
    p.w2 = detail::init_param<T>({16, 8, 3, 3}, 8 * 9, rng);
    p.b2 = detail::init_param<T>({16}, 8 * 9, rng);
    p.w3 = detail::init_param<T>({32, 16, 3, 3}, 16 * 9, rng);
    p.b3 = detail::init_param<T>({32}, 16 * 9, rng);
    p.pw = detail::init_param<T>({32, kEmbedDim}, 32, rng);
    p.pb = detail::init_param<T>({kEmbedDim}, 32, rng);
    return p;
  }

  std::vector<Tensor<T>*> params() { return {&w1, &b1, &w2, &b2, &w3, &b3, &pw, &pb}; }
};

// x: [N, C, H, W] -> [N, kEmbedDim]
template <class T>
Tensor<T> cnn_forward(const CnnParams<T>& p, const Tensor<T>& x) {
  auto h = conv_lrelu_pool2d(x, p.w1, p.b1);
  h = conv_lrelu_pool2d(h, p.w2, p.b2);
  h = conv_lrelu_pool2d(h, p.w3, p.b3);
  return linear(global_avg_pool2d(h), p.pw, p.pb);
}

// ---------------------------------------------------------------------------
// TCN: conv1d(k=5) -> relu -> pool(2) -> conv1d -> relu -> upsample -> conv1d
// ---------------------------------------------------------------------------

template <class T>
struct TcnParams {
  Tensor<T> w1, b1, w2, b2, w3, b3;
  int in_dim = 0;

  static TcnParams init(int in_dim, Rng& rng) {
    TcnParams p;
    p.in_dim = in_dim;
    p.w1 = detail::init_param<T>({kEmbedDim, in_dim, 5}, int64_t(in_dim) * 5, rng);
    p.b1 = detail::init_param<T>({kEmbedDim}, int64_t(in_dim) * 5, rng);
    p.w2 = detail::init_param<T>({kEmbedDim, kEmbedDim, 5}, kEmbedDim * 5, rng);
    p.b2 = detail::init_param<T>({kEmbedDim}, kEmbedDim * 5, rng);
    p.w3 = detail::init_param<T>({kEmbedDim, kEmbedDim, 5}, kEmbedDim * 5, rng);
    p.b3 = detail::init_param<T>({kEmbedDim}, kEmbedDim * 5, rng);
    return p;
  }

  std::vector<Tensor<T>*> params() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }
};

// x: [T, D] -> [T, kEmbedDim]; needs T >= 4 so the pooled stage is non-trivial.
template <class T>
Tensor<T> tcn_forward(const TcnParams<T>& p, const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(0) < 4)
    throw ShapeError("tcn_forward: need [T>=4, D], got " + shape_str(x.shape()));
  const int64_t t_len = x.dim(0);
  auto h = transpose2d(x);  // [D, T]
  h = max_pool1d(relu(conv1d(h, p.w1, p.b1)));
  h = relu(conv1d(h, p.w2, p.b2));
  h = conv1d(upsample1d(h, t_len), p.w3, p.b3);
  return transpose2d(h);
}

// ---------------------------------------------------------------------------
// LSTM, hidden size kEmbedDim, gate order (i, f, g, o)
// ---------------------------------------------------------------------------

template <class T>
struct LstmParams {
  Tensor<T> wx;  // [D, 4H]
  Tensor<T> wh;  // [H, 4H]
  Tensor<T> b;   // [4H]
  int in_dim = 0;

  static LstmParams init(int in_dim, Rng& rng) {
    LstmParams p;
    p.in_dim = in_dim;
    p.wx = detail::init_param<T>({in_dim, 4 * kEmbedDim}, in_dim, rng);
    p.wh = detail::init_param<T>({kEmbedDim, 4 * kEmbedDim}, kEmbedDim, rng);
    p.b = detail::init_param<T>({4 * kEmbedDim}, kEmbedDim, rng);
    return p;
  }

  std::vector<Tensor<T>*> params() { return {&wx, &wh, &b}; }
};

// x: [T, D] -> hidden states [T, kEmbedDim]
template <class T>
Tensor<T> lstm_forward(const LstmParams<T>& p, const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(0) < 1)
    throw ShapeError("lstm_forward: need [T, D], got " + shape_str(x.shape()));
  const int64_t t_len = x.dim(0);
  const int64_t H = kEmbedDim;
  const Tensor<T> xp = linear(x, p.wx, p.b);  // [T, 4H], batched input projection

  Tensor<T> h({1, H}), c({1, H});
  std::vector<Tensor<T>> hs;
  hs.reserve(size_t(t_len));
  for (int64_t t = 0; t < t_len; ++t) {
    auto g = add(slice(xp, 0, t, 1), matmul(h, p.wh));  // [1, 4H]
    auto i = sigmoid(slice(g, 1, 0, H));
    auto f = sigmoid(slice(g, 1, H, H));
    auto gg = tanh_(slice(g, 1, 2 * H, H));
    auto o = sigmoid(slice(g, 1, 3 * H, H));
    c = add(mul(f, c), mul(i, gg));
    h = mul(o, tanh_(c));
    hs.push_back(h);
  }
  return concat(hs, 0);
}

// ---------------------------------------------------------------------------
// combined encoders
// ---------------------------------------------------------------------------

template <class T>
struct KinEncoderParams {
  LstmParams<T> lstm;
  TcnParams<T> tcn;

  static KinEncoderParams init(int in_dim, Rng& rng) {
    return {LstmParams<T>::init(in_dim, rng), TcnParams<T>::init(in_dim, rng)};
  }

  std::vector<Tensor<T>*> params() {
    auto v = lstm.params();
    for (auto* t : tcn.params()) v.push_back(t);
    return v;
  }
};

// kin: [T, D] -> 0.5 * (LSTM(kin) + TCN(kin)), [T, kEmbedDim]
template <class T>
Tensor<T> encode_kinematics(const KinEncoderParams<T>& p, const Tensor<T>& kin) {
  return scale(add(lstm_forward(p.lstm, kin), tcn_forward(p.tcn, kin)), T(0.5));
}

template <class T>
struct VisualEncoderParams {
  CnnParams<T> cnn;
  TcnParams<T> tcn;
  double dropout_rate = 0.5;

  static VisualEncoderParams init(int in_channels, Rng& rng) {
    return {CnnParams<T>::init(in_channels, rng), TcnParams<T>::init(kEmbedDim, rng), 0.5};
  }

  std::vector<Tensor<T>*> params() {
    auto v = cnn.params();
    for (auto* t : tcn.params()) v.push_back(t);
    return v;
  }
};

// frames: [T, C, H, W] -> TCN(dropout(relu(CNN(frames)))), [T, kEmbedDim]
template <class T>
Tensor<T> encode_visual(const VisualEncoderParams<T>& p, const Tensor<T>& frames, Rng& rng,
                        bool training) {
  auto e = dropout(relu(cnn_forward(p.cnn, frames)), p.dropout_rate, rng, training);
  return tcn_forward(p.tcn, e);
}

}  // namespace grad::enc
