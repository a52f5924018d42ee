#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fscd/rng.hpp"
#include "fscd/tensor.hpp"

namespace fscd {

namespace detail {

template <typename T>
using MatRM =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

template <typename T>
inline void require_same_shape(const char* op, const Tensor<T>& a,
                               const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

template <typename T>
inline void require_rank4(const char* op, const Tensor<T>& t) {
  if (t.shape().size() != 4)
    throw std::invalid_argument(std::string(op) + ": expected a 4-D tensor, got " +
                                shape_str(t.shape()));
}

// Gather one batch item into column form: col is (Cin*kh*kw) x (OH*OW),
// zero-filled where the kernel hangs over the padding.
template <typename T>
void im2col(const T* x, int64_t cin, int64_t h, int64_t w, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, int64_t oh, int64_t ow,
            T* col) {
  for (int64_t c = 0; c < cin; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        T* row = col + ((c * kh + ki) * kw + kj) * (oh * ow);
        for (int64_t i = 0; i < oh; ++i) {
          int64_t yi = i * stride - pad + ki;
          if (yi < 0 || yi >= h) {
            std::fill(row + i * ow, row + (i + 1) * ow, T(0));
            continue;
          }
          const T* src = x + (c * h + yi) * w;
          for (int64_t j = 0; j < ow; ++j) {
            int64_t xj = j * stride - pad + kj;
            row[i * ow + j] = (xj >= 0 && xj < w) ? src[xj] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add of the column gradient back onto the input image.
template <typename T>
void col2im_add(const T* col, int64_t cin, int64_t h, int64_t w, int64_t kh,
                int64_t kw, int64_t stride, int64_t pad, int64_t oh,
                int64_t ow, T* dx) {
  for (int64_t c = 0; c < cin; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const T* row = col + ((c * kh + ki) * kw + kj) * (oh * ow);
        for (int64_t i = 0; i < oh; ++i) {
          int64_t yi = i * stride - pad + ki;
          if (yi < 0 || yi >= h) continue;
          T* dst = dx + (c * h + yi) * w;
          for (int64_t j = 0; j < ow; ++j) {
            int64_t xj = j * stride - pad + kj;
            if (xj >= 0 && xj < w) dst[xj] += row[i * ow + j];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: cross-correlation of x [N,Cin,H,W] with w [Cout,Cin,kh,kw] plus
// bias b [Cout], as an im2col gather and a GEMM per batch item.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b, int64_t stride, int64_t pad) {
  detail::require_rank4("conv2d", x);
  detail::require_rank4("conv2d", w);
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wi = x.dim(3);
  const int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin)
    throw std::invalid_argument(
        "conv2d: kernel input channels (" + std::to_string(w.dim(1)) +
        ") do not match input channels (" + std::to_string(cin) + ")");
  if (b.shape() != Shape{cout})
    throw std::invalid_argument("conv2d: bias shape " + shape_str(b.shape()) +
                                " does not match output channels (" +
                                std::to_string(cout) + ")");
  if (h + 2 * pad < kh || wi + 2 * pad < kw)
    throw std::invalid_argument("conv2d: kernel " + std::to_string(kh) + "x" +
                                std::to_string(kw) +
                                " does not fit padded input " +
                                shape_str(x.shape()));
  if ((h + 2 * pad - kh) % stride != 0 || (wi + 2 * pad - kw) % stride != 0)
    throw std::invalid_argument(
        "conv2d: output size is not exact for input " + shape_str(x.shape()) +
        ", kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
        ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (wi + 2 * pad - kw) / stride + 1;
  const int64_t kdim = cin * kh * kw;

  Tensor<T> out = Tensor<T>::zeros({n, cout, oh, ow});
  // Saved for backward: one column matrix per batch item.
  auto cols = std::make_shared<std::vector<std::vector<T>>>();
  const bool needs_grad =
      tape.recording() &&
      (x.requires_grad() || w.requires_grad() || b.requires_grad());
  detail::CMapRM<T> wm(w.values().data(), cout, kdim);
  std::vector<T> col(kdim * oh * ow);
  for (int64_t i = 0; i < n; ++i) {
    detail::im2col(x.values().data() + i * cin * h * wi, cin, h, wi, kh, kw,
                   stride, pad, oh, ow, col.data());
    detail::MapRM<T> om(out.values().data() + i * cout * oh * ow, cout,
                        oh * ow);
    detail::CMapRM<T> cm(col.data(), kdim, oh * ow);
    om.noalias() = wm * cm;
    for (int64_t c = 0; c < cout; ++c)
      om.row(c).array() += b.values()[c];
    if (needs_grad) cols->push_back(col);
  }

  if (needs_grad) {
    out.set_requires_grad(true);
    tape.record({x, w, b}, out, [=]() mutable {
      auto* xs = x.storage();
      auto* ws = w.storage();
      auto* bs = b.storage();
      auto* os = out.storage();
      detail::CMapRM<T> wmat(ws->values.data(), cout, kdim);
      std::vector<T> dcol(kdim * oh * ow);
      for (int64_t i = 0; i < n; ++i) {
        detail::CMapRM<T> dy(os->grad.data() + i * cout * oh * ow, cout,
                             oh * ow);
        detail::CMapRM<T> cm((*cols)[i].data(), kdim, oh * ow);
        if (ws->requires_grad) {
          detail::MapRM<T> dw(ws->grad.data(), cout, kdim);
          dw.noalias() += dy * cm.transpose();
        }
        if (bs->requires_grad) {
          // Scalar loop: Eigen's redux splits at an address-dependent aligned
          // boundary, which would make the rounding depend on where the heap
          // placed the gradient buffer.
          const T* dyp = os->grad.data() + i * cout * oh * ow;
          for (int64_t c = 0; c < cout; ++c) {
            T s = T(0);
            for (int64_t q = 0; q < oh * ow; ++q) s += dyp[c * oh * ow + q];
            bs->grad[c] += s;
          }
        }
        if (xs->requires_grad) {
          detail::MapRM<T> dc(dcol.data(), kdim, oh * ow);
          dc.noalias() = wmat.transpose() * dy;
          detail::col2im_add(dcol.data(), cin, h, wi, kh, kw, stride, pad, oh,
                             ow, xs->grad.data() + i * cin * h * wi);
        }
      }
    });
  }
  return out;
}

// Each pixel replicated into a 2x2 block; backward sums the block gradients.
template <typename T>
Tensor<T> upsample_nearest2x(Tape<T>& tape, const Tensor<T>& x) {
  detail::require_rank4("upsample_nearest2x", x);
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({n, c, 2 * h, 2 * w});
  const T* xv = x.values().data();
  T* ov = out.values().data();
  for (int64_t p = 0; p < n * c; ++p) {
    const T* xi = xv + p * h * w;
    T* oi = ov + p * 4 * h * w;
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) {
        T v = xi[i * w + j];
        oi[(2 * i) * 2 * w + 2 * j] = v;
        oi[(2 * i) * 2 * w + 2 * j + 1] = v;
        oi[(2 * i + 1) * 2 * w + 2 * j] = v;
        oi[(2 * i + 1) * 2 * w + 2 * j + 1] = v;
      }
  }
  if (tape.recording() && x.requires_grad()) {
    out.set_requires_grad(true);
    tape.record({x}, out, [=]() {
      auto* xs = x.storage();
      auto* os = out.storage();
      for (int64_t p = 0; p < n * c; ++p) {
        const T* gi = os->grad.data() + p * 4 * h * w;
        T* gx = xs->grad.data() + p * h * w;
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < w; ++j)
            gx[i * w + j] += gi[(2 * i) * 2 * w + 2 * j] +
                             gi[(2 * i) * 2 * w + 2 * j + 1] +
                             gi[(2 * i + 1) * 2 * w + 2 * j] +
                             gi[(2 * i + 1) * 2 * w + 2 * j + 1];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (tape.recording() && x.requires_grad()) {
    out.set_requires_grad(true);
    tape.record({x}, out, [=]() {
      auto* xs = x.storage();
      auto* os = out.storage();
      for (size_t i = 0; i < xs->grad.size(); ++i)
        if (xs->values[i] > T(0)) xs->grad[i] += os->grad[i];
    });
  }
  return out;
}

// Numerically stable logistic; output clamped into [1e-7, 1 - 1e-7] so it
// stays strictly inside (0,1) even where single precision would round to 1.
template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  static const T lo = T(1e-7);
  static const T hi = T(1) - T(1e-7);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) {
    T v = xv[i];
    T s;
    if (v >= T(0)) {
      T e = std::exp(-v);
      s = T(1) / (T(1) + e);
    } else {
      T e = std::exp(v);
      s = e / (T(1) + e);
    }
    // min/max would silently launder NaN into the clamp bound and hide a
    // poisoned activation from the trainer's finite-loss guard.
    ov[i] = std::isnan(s) ? s : std::min(hi, std::max(lo, s));
  }
  if (tape.recording() && x.requires_grad()) {
    out.set_requires_grad(true);
    tape.record({x}, out, [=]() {
      auto* xs = x.storage();
      auto* os = out.storage();
      for (size_t i = 0; i < xs->grad.size(); ++i) {
        T s = os->values[i];
        xs->grad[i] += os->grad[i] * s * (T(1) - s);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("add", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
  if (tape.recording() && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape.record({a, b}, out, [=]() {
      auto* as = a.storage();
      auto* bs = b.storage();
      auto* os = out.storage();
      if (as->requires_grad)
        for (size_t i = 0; i < os->grad.size(); ++i) as->grad[i] += os->grad[i];
      if (bs->requires_grad)
        for (size_t i = 0; i < os->grad.size(); ++i) bs->grad[i] += os->grad[i];
    });
  }
  return out;
}

// |a - b| elementwise, with the subgradient at ties taken as 0.
template <typename T>
Tensor<T> sub_abs(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("sub_abs", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = std::abs(av[i] - bv[i]);
  if (tape.recording() && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape.record({a, b}, out, [=]() {
      auto* as = a.storage();
      auto* bs = b.storage();
      auto* os = out.storage();
      for (size_t i = 0; i < os->grad.size(); ++i) {
        T d = as->values[i] - bs->values[i];
        T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        if (as->requires_grad) as->grad[i] += os->grad[i] * s;
        if (bs->requires_grad) bs->grad[i] -= os->grad[i] * s;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a,
                          const Tensor<T>& b) {
  detail::require_rank4("concat_channels", a);
  detail::require_rank4("concat_channels", b);
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw std::invalid_argument(
        "concat_channels: shapes differ outside the channel dimension: " +
        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2),
                w = a.dim(3);
  Tensor<T> out = Tensor<T>::zeros({n, ca + cb, h, w});
  const int64_t plane = h * w;
  for (int64_t i = 0; i < n; ++i) {
    std::copy(a.values().begin() + i * ca * plane,
              a.values().begin() + (i + 1) * ca * plane,
              out.values().begin() + i * (ca + cb) * plane);
    std::copy(b.values().begin() + i * cb * plane,
              b.values().begin() + (i + 1) * cb * plane,
              out.values().begin() + (i * (ca + cb) + ca) * plane);
  }
  if (tape.recording() && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape.record({a, b}, out, [=]() {
      auto* as = a.storage();
      auto* bs = b.storage();
      auto* os = out.storage();
      for (int64_t i = 0; i < n; ++i) {
        if (as->requires_grad)
          for (int64_t k = 0; k < ca * plane; ++k)
            as->grad[i * ca * plane + k] +=
                os->grad[i * (ca + cb) * plane + k];
        if (bs->requires_grad)
          for (int64_t k = 0; k < cb * plane; ++k)
            bs->grad[i * cb * plane + k] +=
                os->grad[(i * (ca + cb) + ca) * plane + k];
      }
    });
  }
  return out;
}

// Inverted dropout. Eval returns the input unchanged (same storage); Train
// and McSample zero each element with probability `rate` and scale survivors
// by 1/(1-rate). The mask comes from `rng` in element order.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate,
                  RngStream& rng, ForwardMode mode) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must lie in [0,1), got " +
                                std::to_string(rate));
  if (mode == ForwardMode::Eval || rate == 0.0) return x;
  const T inv_keep = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  for (auto& m : *mask) m = rng.next_double() < rate ? T(0) : inv_keep;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] * (*mask)[i];
  if (tape.recording() && x.requires_grad()) {
    out.set_requires_grad(true);
    tape.record({x}, out, [=]() {
      auto* xs = x.storage();
      auto* os = out.storage();
      for (size_t i = 0; i < xs->grad.size(); ++i)
        xs->grad[i] += os->grad[i] * (*mask)[i];
    });
  }
  return out;
}

// Mean binary cross-entropy over all elements. Probabilities are clamped to
// [1e-7, 1 - 1e-7] before the logs; clamped positions get zero gradient.
template <typename T>
Tensor<T> bce_loss(Tape<T>& tape, const Tensor<T>& p, const Tensor<T>& target) {
  detail::require_same_shape("bce_loss", p, target);
  static const T lo = T(1e-7);
  static const T hi = T(1) - T(1e-7);
  const auto& pv = p.values();
  const auto& tv = target.values();
  const int64_t n = p.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    T pc = std::isnan(pv[i]) ? pv[i] : std::min(hi, std::max(lo, pv[i]));
    acc -= double(tv[i]) * std::log(double(pc)) +
           (1.0 - double(tv[i])) * std::log(1.0 - double(pc));
  }
  Tensor<T> out = Tensor<T>::scalar(T(acc / double(n)));
  if (tape.recording() && p.requires_grad()) {
    out.set_requires_grad(true);
    tape.record({p, target}, out, [=]() {
      auto* ps = p.storage();
      auto* os = out.storage();
      const T g = os->grad[0] / T(n);
      for (int64_t i = 0; i < n; ++i) {
        T pc = ps->values[i];
        if (pc <= lo || pc >= hi) continue;
        ps->grad[i] += g * (pc - target.values()[i]) / (pc * (T(1) - pc));
      }
    });
  }
  return out;
}

// Sum of all elements to a scalar.
template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  double acc = 0.0;
  for (T v : x.values()) acc += double(v);
  Tensor<T> out = Tensor<T>::scalar(T(acc));
  if (tape.recording() && x.requires_grad()) {
    out.set_requires_grad(true);
    tape.record({x}, out, [=]() {
      auto* xs = x.storage();
      auto* os = out.storage();
      for (size_t i = 0; i < xs->grad.size(); ++i) xs->grad[i] += os->grad[0];
    });
  }
  return out;
}

// x * alpha for a constant factor alpha.
template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T alpha) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] * alpha;
  if (tape.recording() && x.requires_grad()) {
    out.set_requires_grad(true);
    tape.record({x}, out, [=]() {
      auto* xs = x.storage();
      auto* os = out.storage();
      for (size_t i = 0; i < xs->grad.size(); ++i)
        xs->grad[i] += os->grad[i] * alpha;
    });
  }
  return out;
}

// Elementwise product of two same-shape tensors.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("mul", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * bv[i];
  if (tape.recording() && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape.record({a, b}, out, [=]() {
      auto* as = a.storage();
      auto* bs = b.storage();
      auto* os = out.storage();
      for (size_t i = 0; i < os->grad.size(); ++i) {
        if (as->requires_grad) as->grad[i] += os->grad[i] * bs->values[i];
        if (bs->requires_grad) bs->grad[i] += os->grad[i] * as->values[i];
      }
    });
  }
  return out;
}

// Spec-shaped entry point: seed the reverse sweep from `loss`.
template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
  tape.backward(loss);
}

}  // namespace fscd
