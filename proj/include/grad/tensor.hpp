#pragma once

// Dense tensors with reverse-mode autodiff. Define-by-run: ops record
// backward closures on the active Tape; no tape active means plain math.
// Scalar type is a template parameter so the whole stack can run at
// float (training) or double (gradient checks).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace grad {

using Shape = std::vector<int64_t>;

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// SplitMix64. One 64-bit word of state, identical streams on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, two draws per call so state stays a single u64.
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  uint64_t state() const { return state_; }

  // Derive an independent stream, e.g. per-sequence seeds.
  static uint64_t mix(uint64_t a, uint64_t b) {
    Rng r(a ^ (b + 0x9E3779B97F4A7C15ull));
    return r.next_u64();
  }

 private:
  uint64_t state_;
};

template <class T>
struct TensorData {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient first flows here
  bool requires_grad = false;
  bool tracked = false;  // participates in the active tape's graph

  int64_t numel() const { return int64_t(value.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : d_(std::make_shared<TensorData<T>>()) {
    d_->shape = std::move(shape);
    d_->value.assign(size_t(shape_numel(d_->shape)), fill);
    d_->requires_grad = requires_grad;
    d_->tracked = requires_grad;
  }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != int64_t(data.size()))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(data);
    t.d_->requires_grad = requires_grad;
    t.d_->tracked = requires_grad;
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  bool defined() const { return bool(d_); }
  const Shape& shape() const { return d_->shape; }
  int64_t numel() const { return d_->numel(); }
  int64_t dim(size_t i) const { return d_->shape[i]; }
  size_t rank() const { return d_->shape.size(); }

  std::vector<T>& data() { return d_->value; }
  const std::vector<T>& data() const { return d_->value; }
  std::vector<T>& grad() { return d_->grad; }
  const std::vector<T>& grad() const { return d_->grad; }
  bool requires_grad() const { return d_->requires_grad; }
  bool tracked() const { return d_->tracked; }

  void set_requires_grad(bool b) {
    d_->requires_grad = b;
    d_->tracked = d_->tracked || b;
  }
  void zero_grad() { d_->grad.clear(); }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return d_->value[0];
  }

  // Same values, no history. Gradients never flow across a detach.
  Tensor detach() const {
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->shape = d_->shape;
    t.d_->value = d_->value;
    return t;
  }

  std::shared_ptr<TensorData<T>>& node() { return d_; }
  const std::shared_ptr<TensorData<T>>& node() const { return d_; }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

// Ordered record of forward ops. Backward walks it once, in reverse; the
// recording order is a topological order by construction.
template <class T>
class Tape {
 public:
  Tape() : prev_(active_ptr()) { active_ptr() = this; }
  ~Tape() { active_ptr() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_ptr(); }

  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

  size_t size() const { return nodes_.size(); }

  void backward(Tensor<T>& loss) {
    if (loss.numel() != 1)
      throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    loss.node()->ensure_grad();
    loss.node()->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  static Tape*& active_ptr() {
    thread_local Tape* p = nullptr;
    return p;
  }
  Tape* prev_;
  std::vector<std::function<void()>> nodes_;
};

namespace detail {

template <class T>
bool track_output(std::initializer_list<const Tensor<T>*> ins) {
  if (!Tape<T>::active()) return false;
  for (const Tensor<T>* t : ins)
    if ((*t).tracked()) return true;
  return false;
}

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
  for (T v : t.data())
    if (!std::isfinite(double(v))) throw NumericError(std::string("non-finite value in ") + op);
#else
  (void)t;
  (void)op;
#endif
}

template <class T>
Tensor<T> make_out(Shape shape, std::initializer_list<const Tensor<T>*> ins) {
  Tensor<T> out(std::move(shape));
  out.node()->tracked = track_output<T>(ins);
  return out;
}

// grad of `out` exists iff something above propagated into it
template <class T>
bool has_grad(const Tensor<T>& t) {
  return !t.node()->grad.empty();
}

using EMat = void;  // placeholder to keep Eigen usage local to functions

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops, trailing-dimension broadcasting for the second operand
// ---------------------------------------------------------------------------

namespace detail {

// b broadcasts against a iff b's shape is a trailing suffix of a's shape
// (or b is a 1-element scalar).
template <class T>
void check_broadcast(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (b.numel() == 1) return;
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() ||
      !std::equal(sb.rbegin(), sb.rend(), sa.rbegin()))
    throw ShapeError(std::string(op) + ": shape " + shape_str(sb) +
                     " does not trailing-broadcast to " + shape_str(sa));
}

template <class T, class FwdFn, class BwdFn>
Tensor<T> binary_broadcast(const Tensor<T>& a, const Tensor<T>& b, const char* name, FwdFn fwd,
                           BwdFn bwd) {
  check_broadcast(a, b, name);
  const int64_t n = a.numel(), m = b.numel();
  Tensor<T> out = make_out<T>(a.shape(), {&a, &b});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  if (m == n) {
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
  } else {
    for (int64_t o = 0; o < n; o += m)
      for (int64_t j = 0; j < m; ++j) po[o + j] = fwd(pa[o + j], pb[j]);
  }
  check_finite(out, name);
  if (out.tracked()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape<T>::active()->record([an, bn, on, n, m, bwd]() {
      if (on->grad.empty()) return;
      an->ensure_grad();
      bn->ensure_grad();
      T* ga_p = an->grad.data();
      T* gb_p = bn->grad.data();
      const T* va = an->value.data();
      const T* vb = bn->value.data();
      const T* go = on->grad.data();
      if (m == n) {
        for (int64_t i = 0; i < n; ++i) {
          T ga, gb;
          bwd(va[i], vb[i], go[i], ga, gb);
          ga_p[i] += ga;
          gb_p[i] += gb;
        }
      } else {
        for (int64_t o = 0; o < n; o += m)
          for (int64_t j = 0; j < m; ++j) {
            T ga, gb;
            bwd(va[o + j], vb[j], go[o + j], ga, gb);
            ga_p[o + j] += ga;
            gb_p[j] += gb;
          }
      }
    });
  }
  return out;
}

// Fixed-order 8-lane sum: vectorizes yet gives the same bits regardless of
// the buffer's address (unlike Eigen reductions, which peel to alignment).
template <class T>
T lane_sum(const T* p, int64_t n) {
  T acc[8] = {};
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) acc[l] += p[i + l];
  T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) s += p[i];
  return s;
}

template <class T, class FwdFn, class BwdFn>
Tensor<T> unary(const Tensor<T>& x, const char* name, FwdFn fwd, BwdFn bwd) {
  const int64_t n = x.numel();
  Tensor<T> out = make_out<T>(x.shape(), {&x});
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  check_finite(out, name);
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, n, bwd]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) xn->grad[i] += bwd(xn->value[i], on->value[i], on->grad[i]);
    });
  }
  return out;
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_broadcast(
      a, b, "add", [](T x, T y) { return x + y; },
      [](T, T, T g, T& ga, T& gb) {
        ga = g;
        gb = g;
      });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_broadcast(
      a, b, "sub", [](T x, T y) { return x - y; },
      [](T, T, T g, T& ga, T& gb) {
        ga = g;
        gb = -g;
      });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_broadcast(
      a, b, "mul", [](T x, T y) { return x * y; },
      [](T x, T y, T g, T& ga, T& gb) {
        ga = g * y;
        gb = g * x;
      });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return detail::unary(
      x, "scale", [c](T v) { return c * v; }, [c](T, T, T g) { return c * g; });
}

template <class T>
Tensor<T> neg(const Tensor<T>& x) {
  return scale(x, T(-1));
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary(
      x, "relu", [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T, T g) { return v > T(0) ? g : T(0); });
}

inline constexpr double kLeakySlope = 0.2;

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(kLeakySlope)) {
  // branchless forms (slope in [0,1)) so the loops vectorize
  const T a = (T(1) + slope) / T(2), b = (T(1) - slope) / T(2);
  return detail::unary(
      x, "leaky_relu", [slope](T v) { return std::max(v, slope * v); },
      [a, b](T v, T, T g) { return g * (a + b * std::copysign(T(1), v)); });
}

template <class T>
Tensor<T> tanh_(const Tensor<T>& x) {
  return detail::unary(
      x, "tanh", [](T v) { return std::tanh(v); },
      [](T, T y, T g) { return g * (T(1) - y * y); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary(
      x, "sigmoid",
      [](T v) { return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); },
      [](T, T y, T g) { return g * y * (T(1) - y); });
}

template <class T>
Tensor<T> log_(const Tensor<T>& x) {
  for (T v : x.data())
    if (v <= T(0)) throw NumericError("log of non-positive value");
  return detail::unary(
      x, "log", [](T v) { return std::log(v); }, [](T v, T, T g) { return g / v; });
}

template <class T>
Tensor<T> exp_(const Tensor<T>& x) {
  for (T v : x.data())
    if (double(v) > 700.0) throw NumericError("exp overflow");
  return detail::unary(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y, T g) { return g * y; });
}

// max(x, c); the subgradient passes only where x > c
template <class T>
Tensor<T> clamp_min(const Tensor<T>& x, T c) {
  return detail::unary(
      x, "clamp_min", [c](T v) { return v > c ? v : c; },
      [c](T v, T, T g) { return v > c ? g : T(0); });
}

template <class T>
Tensor<T> clamp_max(const Tensor<T>& x, T c) {
  return detail::unary(
      x, "clamp_max", [c](T v) { return v < c ? v : c; },
      [c](T v, T, T g) { return v < c ? g : T(0); });
}

// out[r,c] = x[r,c] * s[r]; s has shape [R] or [R,1]
template <class T>
Tensor<T> rowwise_scale(const Tensor<T>& x, const Tensor<T>& s) {
  if (x.rank() != 2) throw ShapeError("rowwise_scale: x must be 2D, got " + shape_str(x.shape()));
  const int64_t R = x.dim(0), C = x.dim(1);
  if (s.numel() != R)
    throw ShapeError("rowwise_scale: scale " + shape_str(s.shape()) + " vs rows " +
                     std::to_string(R));
  Tensor<T> out = detail::make_out<T>(x.shape(), {&x, &s});
  for (int64_t r = 0; r < R; ++r)
    for (int64_t c = 0; c < C; ++c) out.data()[r * C + c] = x.data()[r * C + c] * s.data()[r];
  if (out.tracked()) {
    auto xn = x.node(), sn = s.node(), on = out.node();
    Tape<T>::active()->record([xn, sn, on, R, C]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      sn->ensure_grad();
      for (int64_t r = 0; r < R; ++r) {
        T gs = 0;
        for (int64_t c = 0; c < C; ++c) {
          xn->grad[r * C + c] += on->grad[r * C + c] * sn->value[r];
          gs += on->grad[r * C + c] * xn->value[r * C + c];
        }
        sn->grad[r] += gs;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out = detail::make_out<T>({m, n}, {&a, &b});
  {
    detail::CMatMap<T> A(a.data().data(), m, k), B(b.data().data(), k, n);
    detail::MatMap<T> O(out.data().data(), m, n);
    O.noalias() = A * B;
  }
  detail::check_finite(out, "matmul");
  if (out.tracked()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape<T>::active()->record([an, bn, on, m, k, n]() {
      if (on->grad.empty()) return;
      an->ensure_grad();
      bn->ensure_grad();
      detail::CMatMap<T> A(an->value.data(), m, k), B(bn->value.data(), k, n),
          G(on->grad.data(), m, n);
      detail::MatMap<T> dA(an->grad.data(), m, k), dB(bn->grad.data(), k, n);
      dA.noalias() += G * B.transpose();
      dB.noalias() += A.transpose() * G;
    });
  }
  return out;
}

template <class T>
Tensor<T> transpose2d(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("transpose2d: need 2D, got " + shape_str(x.shape()));
  const int64_t R = x.dim(0), C = x.dim(1);
  Tensor<T> out = detail::make_out<T>({C, R}, {&x});
  for (int64_t r = 0; r < R; ++r)
    for (int64_t c = 0; c < C; ++c) out.data()[c * R + r] = x.data()[r * C + c];
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, R, C]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c) xn->grad[r * C + c] += on->grad[c * R + r];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax, reductions
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  if (axis < 0) axis += int(x.rank());
  if (axis < 0 || axis >= int(x.rank()))
    throw ShapeError("softmax: bad axis for shape " + shape_str(x.shape()));
  const Shape& s = x.shape();
  const int64_t n = s[axis];
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

  Tensor<T> out = detail::make_out<T>(x.shape(), {&x});
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      T mx = px[base];
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, px[base + j * inner]);
      T sum = 0;
      for (int64_t j = 0; j < n; ++j) {
        T e = std::exp(px[base + j * inner] - mx);
        po[base + j * inner] = e;
        sum += e;
      }
      for (int64_t j = 0; j < n; ++j) po[base + j * inner] /= sum;
    }
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, outer, inner, n]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * n * inner + in;
          T dot = 0;
          for (int64_t j = 0; j < n; ++j) dot += on->grad[base + j * inner] * on->value[base + j * inner];
          for (int64_t j = 0; j < n; ++j)
            xn->grad[base + j * inner] +=
                on->value[base + j * inner] * (on->grad[base + j * inner] - dot);
        }
    });
  }
  return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> out = detail::make_out<T>({1}, {&x});
  T s = 0;
  for (T v : x.data()) s += v;
  out.data()[0] = s;
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      const T g = on->grad[0];
      for (auto& gv : xn->grad) gv += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / T(x.numel()));
}

// row sums of a 2D tensor -> [R,1]
template <class T>
Tensor<T> row_sum(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("row_sum: need 2D, got " + shape_str(x.shape()));
  const int64_t R = x.dim(0), C = x.dim(1);
  Tensor<T> out = detail::make_out<T>({R, 1}, {&x});
  for (int64_t r = 0; r < R; ++r) {
    T s = 0;
    for (int64_t c = 0; c < C; ++c) s += x.data()[r * C + c];
    out.data()[r] = s;
  }
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, R, C]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c) xn->grad[r * C + c] += on->grad[r];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// concat / slice / reshape
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& ts, int axis) {
  if (ts.empty()) throw ShapeError("concat: no inputs");
  if (axis < 0) axis += int(ts[0].rank());
  const Shape& s0 = ts[0].shape();
  if (axis < 0 || axis >= int(s0.size())) throw ShapeError("concat: bad axis");
  int64_t cat = 0;
  for (const auto& t : ts) {
    const Shape& s = t.shape();
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (size_t i = 0; i < s.size(); ++i)
      if (int(i) != axis && s[i] != s0[i])
        throw ShapeError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    cat += s[axis];
  }
  Shape so = s0;
  so[axis] = cat;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];

  bool tr = false;
  for (const auto& t : ts) tr = tr || t.tracked();
  Tensor<T> out(so);
  out.node()->tracked = tr && Tape<T>::active();

  int64_t off = 0;
  for (const auto& t : ts) {
    const int64_t na = t.shape()[axis];
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(t.data().data() + o * na * inner, na * inner,
                  out.data().data() + (o * cat + off) * inner);
    off += na;
  }
  if (out.tracked()) {
    std::vector<std::shared_ptr<TensorData<T>>> ins;
    std::vector<int64_t> widths;
    for (const auto& t : ts) {
      ins.push_back(t.node());
      widths.push_back(t.shape()[axis]);
    }
    auto on = out.node();
    Tape<T>::active()->record([ins, widths, on, outer, inner, cat]() {
      if (on->grad.empty()) return;
      int64_t off = 0;
      for (size_t i = 0; i < ins.size(); ++i) {
        ins[i]->ensure_grad();
        const int64_t na = widths[i];
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t j = 0; j < na * inner; ++j)
            ins[i]->grad[o * na * inner + j] += on->grad[(o * cat + off) * inner + j];
        off += na;
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, int axis, int64_t start, int64_t len) {
  if (axis < 0) axis += int(x.rank());
  const Shape& s = x.shape();
  if (axis < 0 || axis >= int(s.size())) throw ShapeError("slice: bad axis");
  if (start < 0 || len < 1 || start + len > s[axis])
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of dim " + std::to_string(s[axis]));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape so = s;
  so[axis] = len;
  Tensor<T> out = detail::make_out<T>(so, {&x});
  const int64_t na = s[axis];
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(x.data().data() + (o * na + start) * inner, len * inner,
                out.data().data() + o * len * inner);
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, outer, inner, na, start, len]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t j = 0; j < len * inner; ++j)
          xn->grad[(o * na + start) * inner + j] += on->grad[o * len * inner + j];
    });
  }
  return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  Tensor<T> out = detail::make_out<T>(shape, {&x});
  out.data() = x.data();
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

// Inverted dropout: survivors scaled by 1/(1-rate). Eval mode is identity.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    throw ShapeError("dropout: rate " + std::to_string(rate) + " outside [0,1)");
  if (!training || rate == 0.0) return detail::unary(
      x, "dropout_id", [](T v) { return v; }, [](T, T, T g) { return g; });
  const int64_t n = x.numel();
  auto mask = std::make_shared<std::vector<T>>(size_t(n));
  const T keep_scale = T(1.0 / (1.0 - rate));
  for (int64_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform() < rate ? T(0) : keep_scale;
  Tensor<T> out = detail::make_out<T>(x.shape(), {&x});
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * (*mask)[i];
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, mask, n]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] * (*mask)[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// 1D sequence ops: conv1d (same padding), max-pool(2), nearest upsample
// ---------------------------------------------------------------------------

// x: [C_in, L], w: [C_out, C_in, k], b: [C_out]; cross-correlation, same padding.
template <class T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 3) throw ShapeError("conv1d: need x[C,L], w[F,C,k]");
  const int64_t C = x.dim(0), L = x.dim(1);
  const int64_t F = w.dim(0), k = w.dim(2);
  if (w.dim(1) != C)
    throw ShapeError("conv1d: channel mismatch x" + shape_str(x.shape()) + " w" +
                     shape_str(w.shape()));
  if (b.numel() != F) throw ShapeError("conv1d: bias size mismatch");
  const int64_t pad = (k - 1) / 2;
  if (k > L + 2 * pad) throw ShapeError("conv1d: kernel larger than padded input");

  Tensor<T> out = detail::make_out<T>({F, L}, {&x, &w, &b});
  // im2col over time: row c*k + j holds x[c, t + j - pad], zero outside
  const int64_t K = C * k;
  std::shared_ptr<T[]> col(new T[size_t(K * L)]);
  {
    const T* px = x.data().data();
    for (int64_t c = 0; c < C; ++c)
      for (int64_t j = 0; j < k; ++j) {
        T* dst = col.get() + (c * k + j) * L;
        const int64_t s = j - pad;
        const int64_t t0 = std::max<int64_t>(0, -s), t1 = std::min(L, L - s);
        if (t0 > 0) std::fill_n(dst, t0, T(0));
        std::copy(px + c * L + s + t0, px + c * L + s + t1, dst + t0);
        if (t1 < L) std::fill_n(dst + t1, L - t1, T(0));
      }
    detail::MatMap<T> On(out.data().data(), F, L);
    On.noalias() = detail::CMatMap<T>(w.data().data(), F, K) * detail::CMatMap<T>(col.get(), K, L);
    for (int64_t f = 0; f < F; ++f) {
      T* o = out.data().data() + f * L;
      const T bias = b.data()[f];
      for (int64_t t = 0; t < L; ++t) o[t] += bias;
    }
  }
  detail::check_finite(out, "conv1d");
  if (out.tracked()) {
    auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
    Tape<T>::active()->record([xn, wn, bn, on, col, C, L, F, k, pad]() {
      if (on->grad.empty()) return;
      wn->ensure_grad();
      bn->ensure_grad();
      const int64_t K = C * k;
      detail::CMatMap<T> G(on->grad.data(), F, L), Cm(col.get(), K, L);
      detail::MatMap<T>(wn->grad.data(), F, K).noalias() += G * Cm.transpose();
      for (int64_t f = 0; f < F; ++f) bn->grad[f] += detail::lane_sum(on->grad.data() + f * L, L);
      if (!xn->tracked) return;  // input is a data leaf: dx is never read
      xn->ensure_grad();
      auto dcol = std::make_unique_for_overwrite<T[]>(size_t(K * L));
      detail::MatMap<T> dCm(dcol.get(), K, L);
      dCm.noalias() = detail::CMatMap<T>(wn->value.data(), F, K).transpose() * G;
      for (int64_t c = 0; c < C; ++c)
        for (int64_t j = 0; j < k; ++j) {
          const T* src = dcol.get() + (c * k + j) * L;
          const int64_t s = j - pad;
          const int64_t t0 = std::max<int64_t>(0, -s), t1 = std::min(L, L - s);
          T* dst = xn->grad.data() + c * L + s;
          for (int64_t t = t0; t < t1; ++t) dst[t] += src[t];
        }
    });
  }
  return out;
}

// x: [C, L] -> [C, floor(L/2)], window 2, stride 2
template <class T>
Tensor<T> max_pool1d(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("max_pool1d: need [C,L]");
  const int64_t C = x.dim(0), L = x.dim(1), Lo = L / 2;
  if (Lo < 1) throw ShapeError("max_pool1d: length too short");
  Tensor<T> out = detail::make_out<T>({C, Lo}, {&x});
  auto argmax = std::make_shared<std::vector<int64_t>>(size_t(C * Lo));
  for (int64_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < Lo; ++t) {
      const int64_t i0 = c * L + 2 * t;
      const bool second = x.data()[i0 + 1] > x.data()[i0];
      (*argmax)[c * Lo + t] = i0 + (second ? 1 : 0);
      out.data()[c * Lo + t] = x.data()[(*argmax)[c * Lo + t]];
    }
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, argmax]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (size_t i = 0; i < argmax->size(); ++i) xn->grad[(*argmax)[i]] += on->grad[i];
    });
  }
  return out;
}

// nearest-neighbor temporal upsample to an explicit target length (out[t] = in[t/2])
template <class T>
Tensor<T> upsample1d(const Tensor<T>& x, int64_t target_len) {
  if (x.rank() != 2) throw ShapeError("upsample1d: need [C,L]");
  const int64_t C = x.dim(0), L = x.dim(1);
  if (target_len < 1 || (target_len + 1) / 2 > L)
    throw ShapeError("upsample1d: bad target length");
  Tensor<T> out = detail::make_out<T>({C, target_len}, {&x});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < target_len; ++t) {
      const int64_t src = std::min(t / 2, L - 1);
      out.data()[c * target_len + t] = x.data()[c * L + src];
    }
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, C, L, target_len]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t c = 0; c < C; ++c)
        for (int64_t t = 0; t < target_len; ++t) {
          const int64_t src = std::min(t / 2, L - 1);
          xn->grad[c * L + src] += on->grad[c * target_len + t];
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2D image ops: conv2d via im2col + GEMM, max-pool(2x2), global average pool
// ---------------------------------------------------------------------------

namespace detail {

// col row `c*kh*kw + dy*kw + dx` holds the shifted image plane over output
// pixels; `rstride` spaces the rows so several images can share one matrix
template <class T>
void im2col(const T* img, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, T* col,
            int64_t rstride) {
  const int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const int64_t HW = H * W;
  int64_t row = 0;
  for (int64_t c = 0; c < C; ++c)
    for (int64_t dy = 0; dy < kh; ++dy)
      for (int64_t dx = 0; dx < kw; ++dx, ++row) {
        T* dst = col + row * rstride;
        const int64_t sy = dy - ph, sx = dx - pw;
        const int64_t x0 = std::max<int64_t>(0, -sx), x1 = std::min(W, W - sx);
        for (int64_t y = 0; y < H; ++y) {
          const int64_t yy = y + sy;
          T* d = dst + y * W;
          if (yy < 0 || yy >= H) {
            std::fill_n(d, W, T(0));
            continue;
          }
          const T* src = img + c * HW + yy * W + sx;
          if (x0 > 0) std::fill_n(d, x0, T(0));
          std::copy(src + x0, src + x1, d + x0);
          if (x1 < W) std::fill_n(d + x1, W - x1, T(0));
        }
      }
}

template <class T>
void col2im_add(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, T* img,
                int64_t rstride) {
  const int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const int64_t HW = H * W;
  int64_t row = 0;
  for (int64_t c = 0; c < C; ++c)
    for (int64_t dy = 0; dy < kh; ++dy)
      for (int64_t dx = 0; dx < kw; ++dx, ++row) {
        const T* src = col + row * rstride;
        const int64_t sy = dy - ph, sx = dx - pw;
        const int64_t x0 = std::max<int64_t>(0, -sx), x1 = std::min(W, W - sx);
        for (int64_t y = 0; y < H; ++y) {
          const int64_t yy = y + sy;
          if (yy < 0 || yy >= H) continue;
          T* dst = img + c * HW + yy * W + sx;
          const T* s = src + y * W;
          for (int64_t x = x0; x < x1; ++x) dst[x] += s[x];
        }
      }
}

}  // namespace detail

// x: [N, C, H, W], w: [F, C, kh, kw], b: [F]; same padding, stride 1.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d: need x[N,C,H,W], w[F,C,kh,kw]");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C)
    throw ShapeError("conv2d: channel mismatch x" + shape_str(x.shape()) + " w" +
                     shape_str(w.shape()));
  if (b.numel() != F) throw ShapeError("conv2d: bias size mismatch");
  const int64_t HW = H * W, K = C * kh * kw;
  if (kh > H + kh - 1 || kw > W + kw - 1) throw ShapeError("conv2d: kernel too large");

  Tensor<T> out = detail::make_out<T>({N, F, H, W}, {&x, &w, &b});

  // all samples share one [K, N*HW] col matrix so both passes run as single
  // large GEMMs; cached for the backward pass
  const int64_t NHW = N * HW;
  std::shared_ptr<T[]> col(new T[size_t(K * NHW)]);
  {
    for (int64_t n = 0; n < N; ++n)
      detail::im2col(x.data().data() + n * C * HW, C, H, W, kh, kw, col.get() + n * HW, NHW);
    auto obig = std::make_unique_for_overwrite<T[]>(size_t(F * NHW));
    detail::CMatMap<T> Wm(w.data().data(), F, K), Cb(col.get(), K, NHW);
    detail::MatMap<T>(obig.get(), F, NHW).noalias() = Wm * Cb;
    const T* pb = b.data().data();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t f = 0; f < F; ++f) {
        const T* s = obig.get() + f * NHW + n * HW;
        T* d = out.data().data() + (n * F + f) * HW;
        const T bias = pb[f];
        for (int64_t i = 0; i < HW; ++i) d[i] = s[i] + bias;
      }
  }
  detail::check_finite(out, "conv2d");
  if (out.tracked()) {
    auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
    Tape<T>::active()->record([xn, wn, bn, on, col, N, C, H, W, F, kh, kw]() {
      if (on->grad.empty()) return;
      wn->ensure_grad();
      bn->ensure_grad();
      const int64_t HW = H * W, K = C * kh * kw, NHW = N * HW;
      auto gbig = std::make_unique_for_overwrite<T[]>(size_t(F * NHW));
      for (int64_t n = 0; n < N; ++n)
        for (int64_t f = 0; f < F; ++f)
          std::copy_n(on->grad.data() + (n * F + f) * HW, HW, gbig.get() + f * NHW + n * HW);
      detail::CMatMap<T> Gb(gbig.get(), F, NHW), Cb(col.get(), K, NHW);
      detail::MatMap<T>(wn->grad.data(), F, K).noalias() += Gb * Cb.transpose();
      for (int64_t f = 0; f < F; ++f)
        bn->grad[f] += detail::lane_sum(gbig.get() + f * NHW, NHW);
      if (!xn->tracked) return;  // input is a data leaf: dX is never read
      xn->ensure_grad();
      auto dcol = std::make_unique_for_overwrite<T[]>(size_t(K * NHW));
      detail::MatMap<T> dC(dcol.get(), K, NHW);
      dC.noalias() = detail::CMatMap<T>(wn->value.data(), F, K).transpose() * Gb;
      for (int64_t n = 0; n < N; ++n)
        detail::col2im_add(dcol.get() + n * HW, C, H, W, kh, kw, xn->grad.data() + n * C * HW,
                           NHW);
    });
  }
  return out;
}

// Fused conv2d -> leaky_relu -> 2x2 max pool, x: [N,C,H,W] -> [N,F,H/2,W/2].
// leaky_relu is increasing, so the pool argmax can be taken over conv
// pre-activations and only the quarter-size output needs to be kept. Samples
// are processed in cache-sized chunks; the col matrix is rebuilt per chunk in
// the backward pass instead of being retained.
template <class T>
Tensor<T> conv_lrelu_pool2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                            T slope = T(kLeakySlope)) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv_lrelu_pool2d: need x[N,C,H,W], w[F,C,kh,kw]");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C)
    throw ShapeError("conv_lrelu_pool2d: channel mismatch x" + shape_str(x.shape()) + " w" +
                     shape_str(w.shape()));
  if (b.numel() != F) throw ShapeError("conv_lrelu_pool2d: bias size mismatch");
  const int64_t Ho = H / 2, Wo = W / 2;
  if (Ho < 1 || Wo < 1) throw ShapeError("conv_lrelu_pool2d: image too small");
  if (!(slope > T(0) && slope < T(1))) throw ShapeError("conv_lrelu_pool2d: bad slope");
  const int64_t HW = H * W, K = C * kh * kw, HWo = Ho * Wo;
  const int64_t ch = std::clamp<int64_t>(int64_t((1 << 20) / sizeof(T)) / ((K + F) * HW), 1, N);

  Tensor<T> out = detail::make_out<T>({N, F, Ho, Wo}, {&x, &w, &b});
  // pool argmax as a position inside the sample's HxW plane
  auto argmax = std::make_shared<std::vector<int32_t>>(size_t(N * F * HWo));
  {
    auto col = std::make_unique_for_overwrite<T[]>(size_t(K * ch * HW));
    auto pre = std::make_unique_for_overwrite<T[]>(size_t(F * ch * HW));
    const T* pb = b.data().data();
    for (int64_t n0 = 0; n0 < N; n0 += ch) {
      const int64_t nc = std::min(ch, N - n0), chHW = nc * HW;
      for (int64_t j = 0; j < nc; ++j)
        detail::im2col(x.data().data() + (n0 + j) * C * HW, C, H, W, kh, kw, col.get() + j * HW,
                       chHW);
      detail::MatMap<T>(pre.get(), F, chHW).noalias() =
          detail::CMatMap<T>(w.data().data(), F, K) * detail::CMatMap<T>(col.get(), K, chHW);
      for (int64_t j = 0; j < nc; ++j)
        for (int64_t f = 0; f < F; ++f) {
          const T* pr = pre.get() + f * chHW + j * HW;
          T* dst = out.data().data() + ((n0 + j) * F + f) * HWo;
          int32_t* am = argmax->data() + ((n0 + j) * F + f) * HWo;
          const T bias = pb[f];
          for (int64_t yo = 0, oi = 0; yo < Ho; ++yo)
            for (int64_t xo = 0; xo < Wo; ++xo, ++oi) {
              int64_t best = 2 * yo * W + 2 * xo;
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                  const int64_t i = (2 * yo + dy) * W + 2 * xo + dx;
                  if (pr[i] > pr[best]) best = i;
                }
              const T m = pr[best] + bias;
              dst[oi] = std::max(m, slope * m);
              am[oi] = int32_t(best);
            }
        }
    }
  }
  detail::check_finite(out, "conv_lrelu_pool2d");
  if (out.tracked()) {
    auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
    Tape<T>::active()->record([xn, wn, bn, on, argmax, N, C, H, W, F, kh, kw, ch, slope]() {
      if (on->grad.empty()) return;
      wn->ensure_grad();
      bn->ensure_grad();
      const int64_t HW = H * W, K = C * kh * kw, Ho = H / 2, Wo = W / 2, HWo = Ho * Wo;
      const bool want_dx = xn->tracked;
      if (want_dx) xn->ensure_grad();
      auto col = std::make_unique_for_overwrite<T[]>(size_t(K * ch * HW));
      auto gpre = std::make_unique_for_overwrite<T[]>(size_t(F * ch * HW));
      auto dcol = want_dx ? std::make_unique_for_overwrite<T[]>(size_t(K * ch * HW)) : nullptr;
      for (int64_t n0 = 0; n0 < N; n0 += ch) {
        const int64_t nc = std::min(ch, N - n0), chHW = nc * HW;
        for (int64_t j = 0; j < nc; ++j)
          detail::im2col(xn->value.data() + (n0 + j) * C * HW, C, H, W, kh, kw,
                         col.get() + j * HW, chHW);
        std::fill_n(gpre.get(), size_t(F * chHW), T(0));
        for (int64_t j = 0; j < nc; ++j)
          for (int64_t f = 0; f < F; ++f) {
            const int64_t plane = ((n0 + j) * F + f) * HWo;
            const T* ov = on->value.data() + plane;
            const T* og = on->grad.data() + plane;
            const int32_t* am = argmax->data() + plane;
            T* gp = gpre.get() + f * chHW + j * HW;
            T bsum = 0;
            for (int64_t i = 0; i < HWo; ++i) {
              const T g = og[i] * (ov[i] > T(0) ? T(1) : slope);
              gp[am[i]] = g;  // 2x2 windows are disjoint: plain assignment
              bsum += g;
            }
            bn->grad[f] += bsum;
          }
        detail::CMatMap<T> Gp(gpre.get(), F, chHW), Cb(col.get(), K, chHW);
        detail::MatMap<T>(wn->grad.data(), F, K).noalias() += Gp * Cb.transpose();
        if (want_dx) {
          detail::MatMap<T> dC(dcol.get(), K, chHW);
          dC.noalias() = detail::CMatMap<T>(wn->value.data(), F, K).transpose() * Gp;
          for (int64_t j = 0; j < nc; ++j)
            detail::col2im_add(dcol.get() + j * HW, C, H, W, kh, kw,
                               xn->grad.data() + (n0 + j) * C * HW, chHW);
        }
      }
    });
  }
  return out;
}

// x: [N, C, H, W] -> [N, C, H/2, W/2]
template <class T>
Tensor<T> max_pool2d(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("max_pool2d: need [N,C,H,W]");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Ho = H / 2, Wo = W / 2;
  if (Ho < 1 || Wo < 1) throw ShapeError("max_pool2d: image too small");
  Tensor<T> out = detail::make_out<T>({N, C, Ho, Wo}, {&x});
  auto argmax = std::make_shared<std::vector<int64_t>>(size_t(N * C * Ho * Wo));
  int64_t oi = 0;
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* img = x.data().data() + nc * H * W;
    for (int64_t y = 0; y < Ho; ++y)
      for (int64_t xq = 0; xq < Wo; ++xq, ++oi) {
        int64_t best = 2 * y * W + 2 * xq;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int64_t i = (2 * y + dy) * W + 2 * xq + dx;
            if (img[i] > img[best]) best = i;
          }
        (*argmax)[oi] = nc * H * W + best;
        out.data()[oi] = x.data()[(*argmax)[oi]];
      }
  }
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, argmax]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (size_t i = 0; i < argmax->size(); ++i) xn->grad[(*argmax)[i]] += on->grad[i];
    });
  }
  return out;
}

// x: [N, C, H, W] -> [N, C]
template <class T>
Tensor<T> global_avg_pool2d(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool2d: need [N,C,H,W]");
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor<T> out = detail::make_out<T>({N, C}, {&x});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    T s = 0;
    for (int64_t i = 0; i < HW; ++i) s += x.data()[nc * HW + i];
    out.data()[nc] = s / T(HW);
  }
  if (out.tracked()) {
    auto xn = x.node(), on = out.node();
    Tape<T>::active()->record([xn, on, N, C, HW]() {
      if (on->grad.empty()) return;
      xn->ensure_grad();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const T g = on->grad[nc] / T(HW);
        for (int64_t i = 0; i < HW; ++i) xn->grad[nc * HW + i] += g;
      }
    });
  }
  return out;
}

// x: [N, in] -> [N, out] with weight [in, out] and bias [out]
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <class T>
class Adam {
 public:
  explicit Adam(T lr = T(1e-4), T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Tensor<T>>& params) {
    ++t_;
    for (auto& p : params) update(p);
  }

  void step(const std::vector<Tensor<T>*>& params) {
    ++t_;
    for (auto* p : params) update(*p);
  }

  void set_lr(T lr) { lr_ = lr; }
  int64_t steps() const { return t_; }

 private:
  struct Slot {
    std::vector<T> m, v;
  };

  void update(Tensor<T>& p) {
    if (p.grad().empty()) return;
    const double b1t = 1.0 - std::pow(double(beta1_), double(t_));
    const double b2t = 1.0 - std::pow(double(beta2_), double(t_));
    auto& slot = slots_[p.node().get()];
    if (slot.m.empty()) {
      slot.m.assign(p.data().size(), T(0));
      slot.v.assign(p.data().size(), T(0));
    }
    for (size_t i = 0; i < p.data().size(); ++i) {
      const T g = p.grad()[i];
      slot.m[i] = beta1_ * slot.m[i] + (T(1) - beta1_) * g;
      slot.v[i] = beta2_ * slot.v[i] + (T(1) - beta2_) * g * g;
      const T mhat = slot.m[i] / T(b1t);
      const T vhat = slot.v[i] / T(b2t);
      p.data()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  T lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  // keyed by node pointer; parameters outlive the optimizer
  std::map<TensorData<T>*, Slot> slots_;
};

template <class T>
void zero_grads(std::vector<Tensor<T>>& params) {
  for (auto& p : params) p.zero_grad();
}

template <class T>
void zero_grads(const std::vector<Tensor<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace grad
