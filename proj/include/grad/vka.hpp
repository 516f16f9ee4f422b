#pragma once

// Vision-kinematic alignment: a small per-time-step discriminator over
// stream embeddings plus the adversarial alignment loss and the
// discriminator's own BCE objective.

#include <grad/tensor.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace grad::vka {

inline constexpr double kProbEps = 1e-7;

// D(x) = sigmoid(l3(tanh(l2(leaky_relu(l1(x)))))), dims in -> 64 -> 16 -> 1
template <class T>
struct DiscParams {
  Tensor<T> w1, b1, w2, b2, w3, b3;
  int in_dim = 0;

  static DiscParams init(int in_dim, Rng& rng) {
    auto make = [&](Shape shape, int64_t fan_in) {
      const double s = std::sqrt(1.0 / double(fan_in));
      std::vector<T> v(size_t(shape_numel(shape)));
      for (auto& x : v) x = T(rng.uniform(-s, s));
      return Tensor<T>::from(std::move(shape), std::move(v), true);
    };
    DiscParams p;
    p.in_dim = in_dim;
    p.w1 = make({in_dim, 64}, in_dim);
    p.b1 = make({64}, in_dim);
    p.w2 = make({64, 16}, 64);
    p.b2 = make({16}, 64);
    p.w3 = make({16, 1}, 16);
    p.b3 = make({1}, 16);
    return p;
  }

  std::vector<Tensor<T>*> params() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }
};

// x: [T, in_dim] -> per-time-step probabilities [T, 1] in (0, 1)
template <class T>
Tensor<T> discriminate(const DiscParams<T>& p, const Tensor<T>& x) {
  auto h = leaky_relu(linear(x, p.w1, p.b1));
  h = tanh_(linear(h, p.w2, p.b2));
  return sigmoid(linear(h, p.w3, p.b3));
}

namespace detail {

// time-averaged log D, probabilities clamped away from {0, 1}
template <class T>
Tensor<T> mean_log_prob(const Tensor<T>& d) {
  return mean(log_(clamp_max(clamp_min(d, T(kProbEps)), T(1.0 - kProbEps))));
}

template <class T>
Tensor<T> mean_log_one_minus(const Tensor<T>& d) {
  auto one_minus = sub(Tensor<T>(d.shape(), T(1)), d);
  return mean_log_prob(one_minus);
}

}  // namespace detail

// L_AL = 0.5 * (sum_t mean log(1 - D(target_t)) + sum_s mean log D(source_s))
template <class T>
Tensor<T> vka_loss(const DiscParams<T>& p, const std::vector<Tensor<T>>& sources,
                   const std::vector<Tensor<T>>& targets) {
  if (sources.empty() || targets.empty())
    throw ShapeError("vka_loss: need at least one source and one target stream");
  Tensor<T> l_tru, l_fal;
  for (size_t i = 0; i < sources.size(); ++i) {
    auto term = detail::mean_log_prob(discriminate(p, sources[i]));
    l_tru = i == 0 ? term : add(l_tru, term);
  }
  for (size_t i = 0; i < targets.size(); ++i) {
    auto term = detail::mean_log_one_minus(discriminate(p, targets[i]));
    l_fal = i == 0 ? term : add(l_fal, term);
  }
  return scale(add(l_fal, l_tru), T(0.5));
}

// Discriminator BCE: real streams labeled 1, fake streams labeled 0.
// Callers pass detached embeddings so generator parameters stay untouched.
template <class T>
Tensor<T> discriminator_bce(const DiscParams<T>& p, const std::vector<Tensor<T>>& real,
                            const std::vector<Tensor<T>>& fake) {
  if (real.empty() || fake.empty())
    throw ShapeError("discriminator_bce: need real and fake streams");
  Tensor<T> loss;
  bool first = true;
  for (const auto& x : real) {
    auto term = neg(detail::mean_log_prob(discriminate(p, x)));
    loss = first ? term : add(loss, term);
    first = false;
  }
  for (const auto& x : fake) loss = add(loss, neg(detail::mean_log_one_minus(discriminate(p, x))));
  return scale(loss, T(1.0 / double(real.size() + fake.size())));
}

// Which streams play source (true) and target (false) in the alignment loss.
enum class VkaMode { vwf_to_k, v_to_k, k_to_v, k_to_vwf };

inline const char* vka_mode_name(VkaMode m) {
  switch (m) {
    case VkaMode::vwf_to_k: return "vwf_to_k";
    case VkaMode::v_to_k: return "v_to_k";
    case VkaMode::k_to_v: return "k_to_v";
    case VkaMode::k_to_vwf: return "k_to_vwf";
  }
  return "?";
}

inline VkaMode vka_mode_from_name(const std::string& name) {
  for (VkaMode m : {VkaMode::vwf_to_k, VkaMode::v_to_k, VkaMode::k_to_v, VkaMode::k_to_vwf})
    if (name == vka_mode_name(m)) return m;
  throw std::runtime_error("unknown vka mode: " + name);
}

// Split the four stream embeddings into (sources, targets) for a mode.
// visual: {spatial, wavelet, fourier} in that order (absent streams omitted).
template <class T>
void split_streams(VkaMode mode, const std::vector<Tensor<T>>& visual, const Tensor<T>& kin,
                   std::vector<Tensor<T>>& sources, std::vector<Tensor<T>>& targets) {
  sources.clear();
  targets.clear();
  switch (mode) {
    case VkaMode::vwf_to_k:
      sources = visual;
      targets = {kin};
      break;
    case VkaMode::v_to_k:
      sources = {visual.front()};
      targets = {kin};
      break;
    case VkaMode::k_to_v:
      sources = {kin};
      targets = {visual.front()};
      break;
    case VkaMode::k_to_vwf:
      sources = {kin};
      targets = visual;
      break;
  }
}

}  // namespace grad::vka
