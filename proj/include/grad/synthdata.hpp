#pragma once

// Synthetic multimodal workflow sequences (frames + kinematics + per-frame
// phase labels) and the 18-kind x 5-severity frame corruption suite used by
// the robustness benchmark. Everything is deterministic given a seed.

#include <grad/tensor.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace grad::synth {

struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

inline constexpr int kFrameChannels = 3;
inline constexpr int kFrameSize = 64;
inline constexpr int kKinDims = 14;  // two arms x 7 DoF

struct WorkflowSequence {
  int64_t t = 0;
  int num_classes = 0;
  std::vector<float> frames;      // [T, 3, 64, 64], values in [0,1]
  std::vector<float> kinematics;  // [T, 14]
  std::vector<int> labels;        // [T], contiguous monotone phase runs
};

struct Dataset {
  std::vector<WorkflowSequence> sequences;
};

// ---------------------------------------------------------------------------
// phase model and generation
// ---------------------------------------------------------------------------

struct PhaseModel {
  int num_phases = 6;
  int64_t min_duration = 24;
  int64_t max_duration = 56;
  double skip_prob = 0.15;  // phases other than the first may be skipped
  double kin_jitter = 0.01;
};

// Fixed projection of an arm's (x, y) task-space coordinates onto the canvas.
inline void project_to_canvas(double x, double y, int64_t h, int64_t w, double& px, double& py) {
  px = (0.5 + 0.38 * x) * double(w - 1);
  py = (0.5 + 0.38 * y) * double(h - 1);
}

namespace detail {

struct PhaseStyle {
  double radius;
  std::array<double, 3> color_left, color_right;
};

// Per-phase render style: disc radius and arm colors.
inline const std::array<PhaseStyle, 8>& phase_styles() {
  static const std::array<PhaseStyle, 8> styles = {{
      {4.0, {0.95, 0.15, 0.15}, {0.15, 0.35, 0.95}},
      {5.0, {0.15, 0.90, 0.20}, {0.90, 0.85, 0.10}},
      {6.0, {0.85, 0.20, 0.85}, {0.10, 0.85, 0.85}},
      {7.0, {0.95, 0.55, 0.10}, {0.55, 0.15, 0.75}},
      {8.0, {0.30, 0.30, 0.95}, {0.95, 0.30, 0.45}},
      {9.0, {0.20, 0.65, 0.45}, {0.75, 0.75, 0.75}},
      {5.5, {0.60, 0.45, 0.15}, {0.25, 0.55, 0.80}},
      {7.5, {0.45, 0.80, 0.25}, {0.80, 0.25, 0.20}},
  }};
  return styles;
}

struct PhaseMotion {
  // sinusoid parameters per arm: center, amplitude, angular rate, phase
  std::array<double, 2> cx, cy, ax, ay, wx, wy;
};

inline PhaseMotion phase_motion(int phase, Rng& rng) {
  // phase-indexed base pattern plus small per-sequence variation
  PhaseMotion m;
  const double base = 0.25 + 0.1 * (phase % 3);
  for (int arm = 0; arm < 2; ++arm) {
    const double side = arm == 0 ? -1.0 : 1.0;
    m.cx[arm] = side * (0.35 + 0.06 * ((phase + arm) % 4)) + 0.05 * (rng.uniform() - 0.5);
    m.cy[arm] = -0.4 + 0.16 * double(phase) + 0.05 * (rng.uniform() - 0.5);
    m.ax[arm] = base * (0.4 + 0.15 * ((phase + 2 * arm) % 3));
    m.ay[arm] = base * (0.3 + 0.12 * ((phase + arm) % 3));
    m.wx[arm] = 0.08 + 0.03 * double(phase % 4) + 0.01 * arm;
    m.wy[arm] = 0.05 + 0.025 * double((phase + 1) % 4) + 0.01 * arm;
  }
  return m;
}

}  // namespace detail

// Render one frame: textured background plus one disc per arm at the
// projection of that arm's (x, y) kinematics, styled by phase.
inline void render_frame(const float* kin, int phase, uint64_t texture_seed, int64_t frame_index,
                         float* out) {
  const int64_t H = kFrameSize, W = kFrameSize, HW = H * W;
  Rng tex(Rng::mix(texture_seed, 0x7e8a));
  const double fx = 0.05 + 0.04 * tex.uniform(), fy = 0.05 + 0.04 * tex.uniform();
  const double p1 = tex.uniform() * 6.28, p2 = tex.uniform() * 6.28;
  Rng noise(Rng::mix(texture_seed, uint64_t(frame_index) + 0x11));

  const auto& style = detail::phase_styles()[size_t(phase)];
  double cx[2], cy[2];
  project_to_canvas(kin[0], kin[1], H, W, cx[0], cy[0]);
  project_to_canvas(kin[7], kin[8], H, W, cx[1], cy[1]);

  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      const double bg = 0.42 + 0.08 * std::sin(6.2832 * fx * double(x) + p1) *
                                   std::cos(6.2832 * fy * double(y) + p2) +
                        0.02 * (noise.uniform() - 0.5);
      double rgb[3] = {bg, bg, bg};
      for (int arm = 0; arm < 2; ++arm) {
        const double dx = double(x) - cx[arm], dy = double(y) - cy[arm];
        const double dist = std::sqrt(dx * dx + dy * dy);
        const double alpha = std::clamp(style.radius + 0.5 - dist, 0.0, 1.0);
        if (alpha > 0) {
          const auto& col = arm == 0 ? style.color_left : style.color_right;
          for (int c = 0; c < 3; ++c) rgb[c] = (1 - alpha) * rgb[c] + alpha * col[c];
        }
      }
      for (int c = 0; c < 3; ++c) out[c * HW + y * W + x] = float(std::clamp(rgb[c], 0.0, 1.0));
    }
}

inline WorkflowSequence generate_sequence(uint64_t seed, int64_t t_total, const PhaseModel& pm) {
  if (pm.min_duration < 1 || pm.max_duration < pm.min_duration)
    throw DataError("generate_sequence: degenerate phase durations");
  if (pm.num_phases < 1 || pm.num_phases > int(detail::phase_styles().size()))
    throw DataError("generate_sequence: unsupported phase count");
  Rng rng(seed);

  // forward chain with optional skips; first phase always present
  std::vector<int> chain;
  for (int p = 0; p < pm.num_phases; ++p)
    if (p == 0 || rng.uniform() >= pm.skip_prob) chain.push_back(p);
  if (chain.size() < 2 && pm.num_phases >= 2) chain.push_back(pm.num_phases - 1);

  std::vector<int64_t> dur(chain.size());
  int64_t total = 0;
  for (auto& d : dur) {
    d = pm.min_duration + int64_t(rng.below(uint64_t(pm.max_duration - pm.min_duration + 1)));
    total += d;
  }
  // rescale durations to the requested length, fixing rounding on the last
  std::vector<int64_t> scaled(chain.size());
  int64_t acc = 0;
  for (size_t i = 0; i < dur.size(); ++i) {
    scaled[i] = std::max<int64_t>(1, dur[i] * t_total / total);
    acc += scaled[i];
  }
  scaled.back() += t_total - acc;
  if (scaled.back() < 1) throw DataError("generate_sequence: sequence too short for phase chain");

  WorkflowSequence seq;
  seq.t = t_total;
  seq.num_classes = pm.num_phases;
  seq.labels.reserve(size_t(t_total));
  seq.kinematics.resize(size_t(t_total) * kKinDims);
  seq.frames.resize(size_t(t_total) * kFrameChannels * kFrameSize * kFrameSize);

  std::vector<detail::PhaseMotion> motions;
  for (int p = 0; p < pm.num_phases; ++p) motions.push_back(detail::phase_motion(p, rng));

  const uint64_t texture_seed = rng.next_u64();
  Rng jitter(rng.next_u64());

  int64_t t = 0;
  for (size_t ci = 0; ci < chain.size(); ++ci) {
    const int phase = chain[ci];
    const auto& m = motions[size_t(phase)];
    for (int64_t k = 0; k < scaled[ci]; ++k, ++t) {
      seq.labels.push_back(phase);
      float* kin = seq.kinematics.data() + t * kKinDims;
      for (int arm = 0; arm < 2; ++arm) {
        const int o = arm * 7;
        const double tt = double(t);
        kin[o + 0] = float(m.cx[arm] + m.ax[arm] * std::sin(m.wx[arm] * tt));
        kin[o + 1] = float(m.cy[arm] + m.ay[arm] * std::cos(m.wy[arm] * tt));
        kin[o + 2] = float(0.2 * std::sin(0.5 * m.wx[arm] * tt + phase));
        kin[o + 3] = float(0.3 * std::sin(0.07 * tt + phase * 0.9));       // roll
        kin[o + 4] = float(0.3 * std::cos(0.05 * tt + phase * 1.3));       // pitch
        kin[o + 5] = float(0.25 * std::sin(0.04 * tt + phase * 0.5));      // yaw
        kin[o + 6] = float(0.5 + 0.4 * std::sin(0.3 * tt + phase + arm));  // gripper angle
        for (int d = 0; d < 7; ++d) kin[o + d] += float(pm.kin_jitter * jitter.normal());
      }
      render_frame(kin, phase, texture_seed, t,
                   seq.frames.data() + t * kFrameChannels * kFrameSize * kFrameSize);
    }
  }
  return seq;
}

inline Dataset generate_dataset(uint64_t seed, int n_sequences, int64_t t_total,
                                const PhaseModel& pm = {}) {
  if (n_sequences < 1) throw DataError("generate_dataset: need at least one sequence");
  Dataset ds;
  ds.sequences.reserve(size_t(n_sequences));
  for (int i = 0; i < n_sequences; ++i)
    ds.sequences.push_back(generate_sequence(Rng::mix(seed, uint64_t(i)), t_total, pm));
  return ds;
}

// ---------------------------------------------------------------------------
// corruption suite
// ---------------------------------------------------------------------------

enum class Corruption {
  gauss_noise,
  shot,
  impulse,
  speckle,
  defocus,
  motion_blur,
  glass_blur,
  gauss_blur,
  zoom_blur,
  brightness,
  spatter,
  smoke,
  contrast,
  elastic,
  gamma,
  jpeg_like,
  pixelate,
  saturate,
};

inline constexpr int kNumCorruptions = 18;
inline constexpr int kNumSeverities = 5;

struct CorruptionSpec {
  Corruption kind;
  int severity;  // 1..5; 0 is the identity sentinel
};

inline const char* corruption_name(Corruption c) {
  switch (c) {
    case Corruption::gauss_noise: return "gauss_noise";
    case Corruption::shot: return "shot";
    case Corruption::impulse: return "impulse";
    case Corruption::speckle: return "speckle";
    case Corruption::defocus: return "defocus";
    case Corruption::motion_blur: return "motion_blur";
    case Corruption::glass_blur: return "glass_blur";
    case Corruption::gauss_blur: return "gauss_blur";
    case Corruption::zoom_blur: return "zoom_blur";
    case Corruption::brightness: return "brightness";
    case Corruption::spatter: return "spatter";
    case Corruption::smoke: return "smoke";
    case Corruption::contrast: return "contrast";
    case Corruption::elastic: return "elastic";
    case Corruption::gamma: return "gamma";
    case Corruption::jpeg_like: return "jpeg_like";
    case Corruption::pixelate: return "pixelate";
    case Corruption::saturate: return "saturate";
  }
  return "?";
}

inline Corruption corruption_from_name(const std::string& name) {
  for (int i = 0; i < kNumCorruptions; ++i)
    if (name == corruption_name(Corruption(i))) return Corruption(i);
  throw DataError("unknown corruption kind: " + name);
}

inline std::vector<Corruption> all_corruptions() {
  std::vector<Corruption> v;
  for (int i = 0; i < kNumCorruptions; ++i) v.push_back(Corruption(i));
  return v;
}

namespace detail {

// Severity parameter tables, index 0 = severity 1. Constants are rescaled
// for 64x64 frames so the per-kind PSNR ladder decreases with severity
// (matched against the 224x224 convention of the reference 2D benchmark).
inline constexpr double kGaussNoiseSigma[5] = {0.04, 0.06, 0.08, 0.09, 0.10};
inline constexpr double kShotPhotons[5] = {60, 25, 12, 5, 3};
inline constexpr double kImpulseFrac[5] = {0.02, 0.04, 0.07, 0.10, 0.14};
inline constexpr double kSpeckleSigma[5] = {0.08, 0.12, 0.17, 0.22, 0.28};
inline constexpr double kDefocusRadius[5] = {1.0, 1.5, 2.0, 2.5, 3.0};
inline constexpr int kMotionLen[5] = {3, 5, 7, 9, 11};
inline constexpr int kGlassShift[5] = {1, 1, 2, 2, 3};
inline constexpr int kGlassIters[5] = {1, 2, 2, 3, 3};
inline constexpr double kGaussBlurSigma[5] = {0.6, 0.9, 1.3, 1.8, 2.4};
inline constexpr double kZoomMax[5] = {1.06, 1.12, 1.18, 1.24, 1.31};
inline constexpr double kBrightnessAdd[5] = {0.08, 0.14, 0.20, 0.26, 0.32};
inline constexpr double kSpatterThresh[5] = {0.88, 0.84, 0.80, 0.76, 0.72};
inline constexpr double kSmokeAmp[5] = {0.15, 0.25, 0.35, 0.45, 0.55};
inline constexpr double kContrastScale[5] = {0.75, 0.60, 0.45, 0.30, 0.20};
inline constexpr double kElasticMag[5] = {0.8, 1.3, 1.9, 2.6, 3.4};
inline constexpr double kGammaExp[5] = {1.4, 1.8, 2.3, 2.9, 3.6};
inline constexpr double kJpegQuant[5] = {0.04, 0.07, 0.11, 0.16, 0.24};
inline constexpr int kPixelateBlock[5] = {2, 3, 4, 6, 8};
inline constexpr double kSaturateScale[5] = {1.6, 2.2, 3.0, 4.0, 5.2};

inline float bilinear(const float* plane, int64_t h, int64_t w, double y, double x) {
  y = std::clamp(y, 0.0, double(h - 1));
  x = std::clamp(x, 0.0, double(w - 1));
  const int64_t y0 = int64_t(y), x0 = int64_t(x);
  const int64_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - double(y0), fx = x - double(x0);
  return float((1 - fy) * ((1 - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1]) +
               fy * ((1 - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1]));
}

inline void gaussian_blur_plane(float* plane, int64_t h, int64_t w, double sigma) {
  if (sigma <= 0) return;
  const int64_t r = std::max<int64_t>(1, int64_t(std::ceil(3 * sigma)));
  std::vector<double> k(size_t(2 * r + 1));
  double s = 0;
  for (int64_t i = -r; i <= r; ++i) s += k[size_t(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= s;
  std::vector<float> tmp(size_t(h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0;
      for (int64_t i = -r; i <= r; ++i)
        acc += k[size_t(i + r)] * plane[y * w + std::clamp(x + i, int64_t(0), w - 1)];
      tmp[y * w + x] = float(acc);
    }
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0;
      for (int64_t i = -r; i <= r; ++i)
        acc += k[size_t(i + r)] * tmp[std::clamp(y + i, int64_t(0), h - 1) * w + x];
      plane[y * w + x] = float(acc);
    }
}

// generic kernel blur over each channel, kernel given as (dy, dx, weight)
struct KernelTap {
  int64_t dy, dx;
  double wgt;
};

inline void kernel_blur(float* frame, int64_t h, int64_t w, const std::vector<KernelTap>& taps) {
  const int64_t hw = h * w;
  std::vector<float> tmp(size_t(hw), 0.f);
  for (int c = 0; c < kFrameChannels; ++c) {
    float* plane = frame + c * hw;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0;
        for (const auto& t : taps)
          acc += t.wgt *
                 plane[std::clamp(y + t.dy, int64_t(0), h - 1) * w +
                       std::clamp(x + t.dx, int64_t(0), w - 1)];
        tmp[y * w + x] = float(acc);
      }
    std::copy(tmp.begin(), tmp.end(), plane);
  }
}

// smooth random field in [0,1] built from a handful of low-frequency cosines
inline std::vector<float> smooth_field(int64_t h, int64_t w, Rng& rng) {
  std::vector<float> f(size_t(h * w), 0.f);
  for (int k = 0; k < 4; ++k) {
    const double fx = 0.5 + 1.5 * rng.uniform(), fy = 0.5 + 1.5 * rng.uniform();
    const double px = rng.uniform() * 6.2832, py = rng.uniform() * 6.2832;
    const double amp = 1.0 / (k + 1.0);
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        f[y * w + x] += float(amp * std::cos(6.2832 * fx * x / double(w) + px) *
                              std::cos(6.2832 * fy * y / double(h) + py));
  }
  float lo = f[0], hi = f[0];
  for (float v : f) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float span = std::max(1e-6f, hi - lo);
  for (float& v : f) v = (v - lo) / span;
  return f;
}

inline void dct8_1d(const double* in, double* out, int stride) {
  for (int k = 0; k < 8; ++k) {
    double s = 0;
    for (int n = 0; n < 8; ++n) s += in[n * stride] * std::cos(M_PI * (n + 0.5) * k / 8.0);
    out[k * stride] = s * (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0));
  }
}

inline void idct8_1d(const double* in, double* out, int stride) {
  for (int n = 0; n < 8; ++n) {
    double s = in[0] * std::sqrt(1.0 / 8.0);
    for (int k = 1; k < 8; ++k)
      s += in[k * stride] * std::sqrt(2.0 / 8.0) * std::cos(M_PI * (n + 0.5) * k / 8.0);
    out[n * stride] = s;
  }
}

}  // namespace detail

// Apply one corruption to a [3, h, w] frame in place. Deterministic given
// the rng state. Output stays in [0, 1].
inline void corrupt_frame(float* frame, int64_t h, int64_t w, const CorruptionSpec& spec,
                          Rng& rng) {
  if (spec.severity == 0) return;  // identity sentinel
  if (spec.severity < 0 || spec.severity > kNumSeverities)
    throw DataError("corrupt_frame: severity out of range");
  const int s = spec.severity - 1;
  const int64_t hw = h * w;
  const int64_t n = kFrameChannels * hw;
  using namespace detail;

  switch (spec.kind) {
    case Corruption::gauss_noise: {
      const double sg = kGaussNoiseSigma[s];
      for (int64_t i = 0; i < n; ++i) frame[i] += float(sg * rng.normal());
      break;
    }
    case Corruption::shot: {
      const double c = kShotPhotons[s];
      for (int64_t i = 0; i < n; ++i)
        frame[i] += float(std::sqrt(std::max(0.f, frame[i]) / c) * rng.normal());
      break;
    }
    case Corruption::impulse: {
      const double frac = kImpulseFrac[s];
      for (int64_t p = 0; p < hw; ++p)
        if (rng.uniform() < frac) {
          const float v = rng.uniform() < 0.5 ? 0.f : 1.f;
          for (int c = 0; c < kFrameChannels; ++c) frame[c * hw + p] = v;
        }
      break;
    }
    case Corruption::speckle: {
      const double sg = kSpeckleSigma[s];
      for (int64_t i = 0; i < n; ++i) frame[i] += float(frame[i] * sg * rng.normal());
      break;
    }
    case Corruption::defocus: {
      const double r = kDefocusRadius[s];
      std::vector<KernelTap> taps;
      double total = 0;
      const int64_t ir = int64_t(std::ceil(r));
      for (int64_t dy = -ir; dy <= ir; ++dy)
        for (int64_t dx = -ir; dx <= ir; ++dx) {
          const double wgt = std::clamp(r + 0.5 - std::sqrt(double(dy * dy + dx * dx)), 0.0, 1.0);
          if (wgt > 0) {
            taps.push_back({dy, dx, wgt});
            total += wgt;
          }
        }
      for (auto& t : taps) t.wgt /= total;
      kernel_blur(frame, h, w, taps);
      break;
    }
    case Corruption::motion_blur: {
      const int len = kMotionLen[s];
      const double ang = rng.uniform() * M_PI;
      std::vector<KernelTap> taps;
      for (int i = 0; i < len; ++i) {
        const double d = double(i) - double(len - 1) / 2.0;
        taps.push_back({int64_t(std::lround(d * std::sin(ang))),
                        int64_t(std::lround(d * std::cos(ang))), 1.0 / len});
      }
      kernel_blur(frame, h, w, taps);
      break;
    }
    case Corruption::glass_blur: {
      const int shift = kGlassShift[s], iters = kGlassIters[s];
      for (int it = 0; it < iters; ++it)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t x = 0; x < w; ++x) {
            const int64_t dy = int64_t(rng.below(uint64_t(2 * shift + 1))) - shift;
            const int64_t dx = int64_t(rng.below(uint64_t(2 * shift + 1))) - shift;
            const int64_t y2 = std::clamp(y + dy, int64_t(0), h - 1);
            const int64_t x2 = std::clamp(x + dx, int64_t(0), w - 1);
            for (int c = 0; c < kFrameChannels; ++c)
              std::swap(frame[c * hw + y * w + x], frame[c * hw + y2 * w + x2]);
          }
      for (int c = 0; c < kFrameChannels; ++c) gaussian_blur_plane(frame + c * hw, h, w, 0.5);
      break;
    }
    case Corruption::gauss_blur: {
      for (int c = 0; c < kFrameChannels; ++c)
        gaussian_blur_plane(frame + c * hw, h, w, kGaussBlurSigma[s]);
      break;
    }
    case Corruption::zoom_blur: {
      std::vector<float> acc(size_t(n), 0.f);
      int count = 0;
      for (double z = 1.0; z <= kZoomMax[s] + 1e-9; z += 0.03, ++count)
        for (int c = 0; c < kFrameChannels; ++c)
          for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
              const double sy = (double(y) - h / 2.0) / z + h / 2.0;
              const double sx = (double(x) - w / 2.0) / z + w / 2.0;
              acc[c * hw + y * w + x] += bilinear(frame + c * hw, h, w, sy, sx);
            }
      for (int64_t i = 0; i < n; ++i) frame[i] = acc[i] / float(count);
      break;
    }
    case Corruption::brightness: {
      const float add = float(kBrightnessAdd[s]);
      for (int64_t i = 0; i < n; ++i) frame[i] += add;
      break;
    }
    case Corruption::spatter: {
      auto field = smooth_field(h, w, rng);
      const float thresh = float(kSpatterThresh[s]);
      for (int64_t p = 0; p < hw; ++p)
        if (field[size_t(p)] > thresh) {
          const float blob = 0.12f + 0.1f * float(rng.uniform());
          for (int c = 0; c < kFrameChannels; ++c) frame[c * hw + p] = blob;
        }
      break;
    }
    case Corruption::smoke: {
      auto field = smooth_field(h, w, rng);
      const double amp = kSmokeAmp[s];
      for (int c = 0; c < kFrameChannels; ++c)
        for (int64_t p = 0; p < hw; ++p) {
          const double hz = amp * field[size_t(p)];
          frame[c * hw + p] = float((1 - hz) * frame[c * hw + p] + hz * 0.9);
        }
      break;
    }
    case Corruption::contrast: {
      double m = 0;
      for (int64_t i = 0; i < n; ++i) m += frame[i];
      m /= double(n);
      const double c = kContrastScale[s];
      for (int64_t i = 0; i < n; ++i) frame[i] = float((frame[i] - m) * c + m);
      break;
    }
    case Corruption::elastic: {
      const double mag = kElasticMag[s];
      std::vector<float> dy = smooth_field(h, w, rng), dx = smooth_field(h, w, rng);
      std::vector<float> src(frame, frame + n);
      for (int c = 0; c < kFrameChannels; ++c)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t x = 0; x < w; ++x)
            frame[c * hw + y * w + x] =
                bilinear(src.data() + c * hw, h, w, double(y) + mag * (2 * dy[y * w + x] - 1),
                         double(x) + mag * (2 * dx[y * w + x] - 1));
      break;
    }
    case Corruption::gamma: {
      const double g = kGammaExp[s];
      for (int64_t i = 0; i < n; ++i) frame[i] = float(std::pow(std::clamp(frame[i], 0.f, 1.f), g));
      break;
    }
    case Corruption::jpeg_like: {
      // 8x8 block DCT with frequency-weighted quantization
      const double q = kJpegQuant[s];
      double block[64], tmp[64];
      for (int c = 0; c < kFrameChannels; ++c)
        for (int64_t by = 0; by + 8 <= h; by += 8)
          for (int64_t bx = 0; bx + 8 <= w; bx += 8) {
            for (int y = 0; y < 8; ++y)
              for (int x = 0; x < 8; ++x) block[y * 8 + x] = frame[c * hw + (by + y) * w + bx + x];
            for (int y = 0; y < 8; ++y) dct8_1d(block + y * 8, tmp + y * 8, 1);
            for (int x = 0; x < 8; ++x) dct8_1d(tmp + x, block + x, 8);
            for (int y = 0; y < 8; ++y)
              for (int x = 0; x < 8; ++x) {
                const double step = q * (1.0 + 0.35 * double(x + y));
                block[y * 8 + x] = std::round(block[y * 8 + x] / step) * step;
              }
            for (int x = 0; x < 8; ++x) idct8_1d(block + x, tmp + x, 8);
            for (int y = 0; y < 8; ++y) idct8_1d(tmp + y * 8, block + y * 8, 1);
            for (int y = 0; y < 8; ++y)
              for (int x = 0; x < 8; ++x)
                frame[c * hw + (by + y) * w + bx + x] = float(block[y * 8 + x]);
          }
      break;
    }
    case Corruption::pixelate: {
      const int b = kPixelateBlock[s];
      for (int c = 0; c < kFrameChannels; ++c)
        for (int64_t by = 0; by < h; by += b)
          for (int64_t bx = 0; bx < w; bx += b) {
            double acc = 0;
            int64_t cnt = 0;
            for (int64_t y = by; y < std::min<int64_t>(by + b, h); ++y)
              for (int64_t x = bx; x < std::min<int64_t>(bx + b, w); ++x, ++cnt)
                acc += frame[c * hw + y * w + x];
            const float v = float(acc / double(cnt));
            for (int64_t y = by; y < std::min<int64_t>(by + b, h); ++y)
              for (int64_t x = bx; x < std::min<int64_t>(bx + b, w); ++x)
                frame[c * hw + y * w + x] = v;
          }
      break;
    }
    case Corruption::saturate: {
      const double sc = kSaturateScale[s];
      for (int64_t p = 0; p < hw; ++p) {
        const double gray =
            0.299 * frame[p] + 0.587 * frame[hw + p] + 0.114 * frame[2 * hw + p];
        for (int c = 0; c < kFrameChannels; ++c)
          frame[c * hw + p] = float(gray + sc * (frame[c * hw + p] - gray));
      }
      break;
    }
  }
  for (int64_t i = 0; i < n; ++i) frame[i] = std::clamp(frame[i], 0.f, 1.f);
}

// Frames corrupted, kinematics and labels untouched. Per-frame rng streams
// derive from (seed, sequence index, frame index).
inline Dataset corrupt_dataset(const Dataset& ds, const CorruptionSpec& spec, uint64_t seed) {
  Dataset out = ds;
  const int64_t frame_elems = kFrameChannels * kFrameSize * kFrameSize;
  for (size_t si = 0; si < out.sequences.size(); ++si) {
    auto& seq = out.sequences[si];
    for (int64_t t = 0; t < seq.t; ++t) {
      Rng rng(Rng::mix(Rng::mix(seed, uint64_t(si)), uint64_t(t)));
      corrupt_frame(seq.frames.data() + t * frame_elems, kFrameSize, kFrameSize, spec, rng);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// dataset file format "GRD1"
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_raw(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("dataset file truncated");
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for write: " + path);
  os.write("GRD1", 4);
  detail::write_raw(os, uint32_t(ds.sequences.size()));
  for (const auto& seq : ds.sequences) {
    detail::write_raw(os, uint32_t(seq.t));
    detail::write_raw(os, uint32_t(seq.num_classes));
    os.write(reinterpret_cast<const char*>(seq.frames.data()),
             std::streamsize(seq.frames.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(seq.kinematics.data()),
             std::streamsize(seq.kinematics.size() * sizeof(float)));
    for (int l : seq.labels) detail::write_raw(os, uint16_t(l));
  }
  if (!os) throw DataError("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open dataset: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "GRD1", 4) != 0)
    throw DataError("bad dataset magic in " + path);
  uint32_t count = 0;
  detail::read_raw(is, count);
  Dataset ds;
  ds.sequences.resize(count);
  for (auto& seq : ds.sequences) {
    uint32_t t = 0, classes = 0;
    detail::read_raw(is, t);
    detail::read_raw(is, classes);
    seq.t = t;
    seq.num_classes = int(classes);
    seq.frames.resize(size_t(t) * kFrameChannels * kFrameSize * kFrameSize);
    seq.kinematics.resize(size_t(t) * kKinDims);
    is.read(reinterpret_cast<char*>(seq.frames.data()),
            std::streamsize(seq.frames.size() * sizeof(float)));
    is.read(reinterpret_cast<char*>(seq.kinematics.data()),
            std::streamsize(seq.kinematics.size() * sizeof(float)));
    seq.labels.resize(t);
    for (auto& l : seq.labels) {
      uint16_t v = 0;
      detail::read_raw(is, v);
      l = int(v);
    }
    if (!is) throw DataError("dataset file truncated: " + path);
  }
  return ds;
}

// Peak signal-to-noise ratio between two frames, used by the ladder checks.
inline double psnr(const float* a, const float* b, int64_t n) {
  double mse = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    mse += d * d;
  }
  mse /= double(n);
  if (mse <= 0) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace grad::synth
