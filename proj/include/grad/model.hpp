#pragma once

// The full recognition model: frequency-disentangled visual streams, the
// kinematic encoder, graph-attention fusion, the adversarial alignment
// branch and the calibrated decoder, plus its training step.

#include <grad/decoder.hpp>
#include <grad/encoders.hpp>
#include <grad/freq.hpp>
#include <grad/gat.hpp>
#include <grad/synthdata.hpp>
#include <grad/tensor.hpp>
#include <grad/vka.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace grad::model {

struct ModelConfig {
  int num_classes = 6;
  bool enable_vka = true;
  bool enable_calibration = true;
  bool enable_wavelet = true;
  bool enable_fourier = true;
  dec::FusionMode fusion = dec::FusionMode::graph;
  vka::VkaMode vka_mode = vka::VkaMode::vwf_to_k;
  double alpha = 0.3, beta = 0.7;   // embedding vs graph mix
  double gamma = 0.9, delta = 0.1;  // task vs alignment loss mix
  double lambda = 0.02;             // calibration strength
  int heads = 4, head_dim = 16;

  int num_streams() const { return 2 + enable_wavelet + enable_fourier; }
};

// One training window: per-frame stream inputs plus labels.
template <class T>
struct WindowBatch {
  Tensor<T> spatial;  // [T, 3, H, W]
  Tensor<T> wavelet;  // [T, 4, H/2, W/2] (undefined when disabled)
  Tensor<T> fourier;  // [T, 1, H, W]
  Tensor<T> kin;      // [T, kKinDims]
  std::vector<int> labels;
};

// Build a window's stream tensors from a stored sequence.
template <class T>
WindowBatch<T> make_window(const synth::WorkflowSequence& seq, int64_t start, int64_t len,
                           const ModelConfig& cfg) {
  const int64_t H = synth::kFrameSize, W = synth::kFrameSize;
  const int64_t frame_elems = synth::kFrameChannels * H * W;
  if (start < 0 || len < 4 || start + len > seq.t)
    throw ShapeError("make_window: bad range [" + std::to_string(start) + ", +" +
                     std::to_string(len) + ") for T=" + std::to_string(seq.t));
  WindowBatch<T> b;
  std::vector<T> spatial, wavelet, fourier, kin;
  spatial.reserve(size_t(len * frame_elems));
  for (int64_t t = start; t < start + len; ++t) {
    std::vector<T> rgb(size_t(frame_elems), T(0));
    const float* src = seq.frames.data() + t * frame_elems;
    for (int64_t i = 0; i < frame_elems; ++i) rgb[size_t(i)] = T(src[i]);
    auto views = freq::disentangle_frame(rgb.data(), 3, H, W);
    spatial.insert(spatial.end(), views.spatial.begin(), views.spatial.end());
    if (cfg.enable_wavelet) wavelet.insert(wavelet.end(), views.wavelet.begin(), views.wavelet.end());
    if (cfg.enable_fourier) fourier.insert(fourier.end(), views.fourier.begin(), views.fourier.end());
    const float* ks = seq.kinematics.data() + t * synth::kKinDims;
    for (int i = 0; i < synth::kKinDims; ++i) kin.push_back(T(ks[i]));
    b.labels.push_back(seq.labels[size_t(t)]);
  }
  b.spatial = Tensor<T>::from({len, 3, H, W}, std::move(spatial));
  if (cfg.enable_wavelet) b.wavelet = Tensor<T>::from({len, 4, H / 2, W / 2}, std::move(wavelet));
  if (cfg.enable_fourier) b.fourier = Tensor<T>::from({len, 1, H, W}, std::move(fourier));
  b.kin = Tensor<T>::from({len, synth::kKinDims}, std::move(kin));
  return b;
}

template <class T>
struct GradModel {
  ModelConfig cfg;
  enc::VisualEncoderParams<T> enc_spatial, enc_wavelet, enc_fourier;
  enc::KinEncoderParams<T> enc_kin;
  gat::GatParams<T> gat_p;
  dec::FusionParams<T> fusion_p;
  dec::HeadParams<T> head_p;
  vka::DiscParams<T> disc_p;

  static GradModel init(const ModelConfig& cfg, uint64_t seed) {
    GradModel m;
    m.cfg = cfg;
    Rng rng(seed);
    m.enc_spatial = enc::VisualEncoderParams<T>::init(3, rng);
    if (cfg.enable_wavelet) m.enc_wavelet = enc::VisualEncoderParams<T>::init(4, rng);
    if (cfg.enable_fourier) m.enc_fourier = enc::VisualEncoderParams<T>::init(1, rng);
    m.enc_kin = enc::KinEncoderParams<T>::init(synth::kKinDims, rng);
    if (cfg.fusion == dec::FusionMode::graph)
      m.gat_p = gat::GatParams<T>::init(cfg.num_streams(), enc::kEmbedDim, cfg.heads,
                                        cfg.head_dim, rng);
    m.fusion_p = dec::FusionParams<T>::init(cfg.fusion, cfg.num_streams(), enc::kEmbedDim,
                                            enc::kEmbedDim, rng);
    m.head_p = dec::HeadParams<T>::init(enc::kEmbedDim, cfg.num_classes, rng);
    if (cfg.enable_vka) m.disc_p = vka::DiscParams<T>::init(enc::kEmbedDim, rng);
    return m;
  }

  // Deterministic naming; drives both the optimizer and the checkpoint.
  std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    auto push = [&](const std::string& prefix, std::vector<Tensor<T>*> ps) {
      for (size_t i = 0; i < ps.size(); ++i)
        out.emplace_back(prefix + "." + std::to_string(i), ps[i]);
    };
    push("enc_spatial", enc_spatial.params());
    if (cfg.enable_wavelet) push("enc_wavelet", enc_wavelet.params());
    if (cfg.enable_fourier) push("enc_fourier", enc_fourier.params());
    push("enc_kin", enc_kin.params());
    if (cfg.fusion == dec::FusionMode::graph) push("gat", gat_p.params());
    push("fusion", fusion_p.params());
    push("head", head_p.params());
    if (cfg.enable_vka) push("disc", disc_p.params());
    return out;
  }

  std::vector<Tensor<T>*> generator_params() {
    std::vector<Tensor<T>*> out;
    for (auto& [name, t] : named_params())
      if (name.rfind("disc.", 0) != 0) out.push_back(t);
    return out;
  }

  std::vector<Tensor<T>*> discriminator_params() { return disc_p.params(); }

  std::vector<Tensor<T>*> all_params() {
    std::vector<Tensor<T>*> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  int64_t num_parameters() {
    int64_t n = 0;
    for (auto* t : all_params()) n += t->numel();
    return n;
  }
};

template <class T>
struct ForwardResult {
  std::vector<Tensor<T>> visual;  // active visual stream embeddings, [T, 64] each
  Tensor<T> kin;                  // kinematic embedding, [T, 64]
  Tensor<T> logits;               // [T, num_classes]
};

template <class T>
ForwardResult<T> forward(GradModel<T>& m, const WindowBatch<T>& b, Rng& rng, bool training) {
  ForwardResult<T> r;
  r.visual.push_back(enc::encode_visual(m.enc_spatial, b.spatial, rng, training));
  if (m.cfg.enable_wavelet)
    r.visual.push_back(enc::encode_visual(m.enc_wavelet, b.wavelet, rng, training));
  if (m.cfg.enable_fourier)
    r.visual.push_back(enc::encode_visual(m.enc_fourier, b.fourier, rng, training));
  r.kin = enc::encode_kinematics(m.enc_kin, b.kin);

  std::vector<Tensor<T>> emb = r.visual;
  emb.push_back(r.kin);
  std::vector<Tensor<T>> graph_out;
  if (m.cfg.fusion == dec::FusionMode::graph)
    graph_out = gat::gat_forward(m.gat_p, emb, rng, training);
  auto fused = dec::fuse(m.fusion_p, emb, graph_out, T(m.cfg.alpha), T(m.cfg.beta));
  r.logits = dec::head_logits(m.head_p, fused);
  return r;
}

struct StepLosses {
  double task = 0;  // calibrated (or plain) cross entropy
  double align = 0; // adversarial alignment loss (0 when VKA disabled)
  double disc = 0;  // discriminator BCE (0 when VKA disabled)
  double total = 0; // generator objective actually minimized
};

// One alternating training step on a window: discriminator BCE on detached
// embeddings first, then a joint generator step on gamma*L_task + delta*L_AL.
template <class T>
StepLosses train_step(GradModel<T>& m, const WindowBatch<T>& b, Adam<T>& opt_gen,
                      Adam<T>& opt_disc, Rng& rng) {
  StepLosses out;
  Tape<T> tape;
  auto r = forward(m, b, rng, true);
  const T lam = T(m.cfg.enable_calibration ? m.cfg.lambda : 0.0);
  auto task = dec::calibrated_ce(r.logits, b.labels, lam);
  out.task = double(task.item());

  Tensor<T> total = task;
  if (m.cfg.enable_vka) {
    std::vector<Tensor<T>> sources, targets;
    vka::split_streams(m.cfg.vka_mode, r.visual, r.kin, sources, targets);
    {
      // discriminator step on detached embeddings, isolated on its own tape
      std::vector<Tensor<T>> real, fake;
      for (const auto& s : sources) real.push_back(s.detach());
      for (const auto& t : targets) fake.push_back(t.detach());
      Tape<T> disc_tape;
      auto bce = vka::discriminator_bce(m.disc_p, real, fake);
      out.disc = double(bce.item());
      disc_tape.backward(bce);
      opt_disc.step(m.discriminator_params());
      zero_grads(m.discriminator_params());
    }
    auto align = vka::vka_loss(m.disc_p, sources, targets);
    out.align = double(align.item());
    total = add(scale(task, T(m.cfg.gamma)), scale(align, T(m.cfg.delta)));
  }
  out.total = double(total.item());
  tape.backward(total);
  opt_gen.step(m.generator_params());
  zero_grads(m.generator_params());
  // alignment gradients that reached the discriminator are discarded
  if (m.cfg.enable_vka) zero_grads(m.discriminator_params());
  return out;
}

// Full-sequence inference: the whole sequence runs through the network in
// one pass (no windowing at eval time).
template <class T>
std::vector<int> predict_sequence(GradModel<T>& m, const synth::WorkflowSequence& seq) {
  Rng rng(0);  // unused in eval mode
  auto batch = make_window<T>(seq, 0, seq.t, m.cfg);
  auto r = forward(m, batch, rng, false);
  return dec::predict(r.logits);
}

// Same single-pass inference on an already disentangled batch.
template <class T>
std::vector<int> predict_batch(GradModel<T>& m, const WindowBatch<T>& batch) {
  Rng rng(0);
  auto r = forward(m, batch, rng, false);
  return dec::predict(r.logits);
}

}  // namespace grad::model
