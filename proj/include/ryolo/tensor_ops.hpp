#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ryolo/error.hpp"
#include "ryolo/tensor.hpp"

namespace ryolo {

// Weights (c_out, c_in, k, k) plus one bias per output channel, stored as a
// (1, c_out, 1, 1) tensor so both halves go through the same code paths.
struct ConvKernel {
  Tensor4 weight;
  Tensor4 bias;

  ConvKernel() = default;
  ConvKernel(std::size_t c_out, std::size_t c_in, std::size_t k)
      : weight(c_out, c_in, k, k), bias(1, c_out, 1, 1) {
    require(k % 2 == 1, ErrorKind::InvalidArgument,
            "kernel size must be odd, got " + std::to_string(k));
  }

  std::size_t c_out() const { return weight.n(); }
  std::size_t c_in() const { return weight.c(); }
  std::size_t k() const { return weight.h(); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  friend bool operator==(const ConvKernel&, const ConvKernel&) = default;
};

inline std::size_t same_padding(std::size_t k) { return (k - 1) / 2; }

namespace detail {

inline void check_conv_args(const Shape4& in, const Tensor4& weight,
                            const Tensor4& bias, std::size_t padding) {
  require(weight.h() == weight.w(), ErrorKind::InvalidArgument,
          "conv2d: kernel must be square, got " + to_string(weight.shape()));
  require(weight.h() % 2 == 1, ErrorKind::InvalidArgument,
          "conv2d: kernel size must be odd, got " + std::to_string(weight.h()));
  require(weight.c() == in.c, ErrorKind::ShapeMismatch,
          "conv2d: kernel expects " + std::to_string(weight.c()) +
              " input channels but input has " + std::to_string(in.c));
  require(bias.size() == weight.n(), ErrorKind::ShapeMismatch,
          "conv2d: bias length " + std::to_string(bias.size()) +
              " does not match " + std::to_string(weight.n()) +
              " output channels");
  require(in.h + 2 * padding >= weight.h() && in.w + 2 * padding >= weight.h(),
          ErrorKind::ShapeMismatch,
          "conv2d: input " + to_string(in) + " too small for kernel");
}

// Row/column range [lo, hi) of output positions whose tap at offset `tap`
// lands inside the input.
inline void tap_range(std::size_t tap, std::size_t padding, std::size_t in_len,
                      std::size_t out_len, std::size_t& lo, std::size_t& hi) {
  const long off = static_cast<long>(tap) - static_cast<long>(padding);
  long l = std::max(0L, -off);
  long h = std::min(static_cast<long>(out_len), static_cast<long>(in_len) - off);
  lo = static_cast<std::size_t>(l);
  hi = static_cast<std::size_t>(std::max(l, h));
}

}  // namespace detail

inline Tensor4 conv2d(const Tensor4& input, const Tensor4& weight,
                      const Tensor4& bias, std::size_t padding) {
  detail::check_conv_args(input.shape(), weight, bias, padding);
  const std::size_t k = weight.h();
  const std::size_t H = input.h(), W = input.w();
  const std::size_t Ho = H + 2 * padding - k + 1;
  const std::size_t Wo = W + 2 * padding - k + 1;
  Tensor4 out(input.n(), weight.n(), Ho, Wo);
  const long pad = static_cast<long>(padding);

  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t co = 0; co < weight.n(); ++co) {
      double* o = out.plane(n, co);
      std::fill(o, o + Ho * Wo, bias[co]);
      for (std::size_t ci = 0; ci < input.c(); ++ci) {
        const double* in = input.plane(n, ci);
        for (std::size_t ky = 0; ky < k; ++ky) {
          std::size_t y0, y1;
          detail::tap_range(ky, padding, H, Ho, y0, y1);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = weight(co, ci, ky, kx);
            if (wv == 0.0) continue;
            std::size_t x0, x1;
            detail::tap_range(kx, padding, W, Wo, x0, x1);
            const long dy = static_cast<long>(ky) - pad;
            const long dx = static_cast<long>(kx) - pad;
            for (std::size_t y = y0; y < y1; ++y) {
              double* orow = o + y * Wo;
              const double* irow = in + (static_cast<long>(y) + dy) * static_cast<long>(W) + dx;
              for (std::size_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
  return out;
}

inline Tensor4 conv2d(const Tensor4& input, const ConvKernel& kernel,
                      std::size_t padding) {
  return conv2d(input, kernel.weight, kernel.bias, padding);
}

inline Tensor4 conv2d_same(const Tensor4& input, const ConvKernel& kernel) {
  return conv2d(input, kernel, same_padding(kernel.k()));
}

// Gradient of a conv2d output w.r.t. its input.
inline Tensor4 conv2d_backward_input(const Shape4& input_shape,
                                     const Tensor4& weight,
                                     const Tensor4& grad_out,
                                     std::size_t padding) {
  const std::size_t k = weight.h();
  const std::size_t H = input_shape.h, W = input_shape.w;
  const std::size_t Ho = grad_out.h(), Wo = grad_out.w();
  const long pad = static_cast<long>(padding);
  Tensor4 gin(input_shape);
  for (std::size_t n = 0; n < input_shape.n; ++n) {
    for (std::size_t co = 0; co < weight.n(); ++co) {
      const double* g = grad_out.plane(n, co);
      for (std::size_t ci = 0; ci < input_shape.c; ++ci) {
        double* gi = gin.plane(n, ci);
        for (std::size_t ky = 0; ky < k; ++ky) {
          std::size_t y0, y1;
          detail::tap_range(ky, padding, H, Ho, y0, y1);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = weight(co, ci, ky, kx);
            if (wv == 0.0) continue;
            std::size_t x0, x1;
            detail::tap_range(kx, padding, W, Wo, x0, x1);
            const long dy = static_cast<long>(ky) - pad;
            const long dx = static_cast<long>(kx) - pad;
            for (std::size_t y = y0; y < y1; ++y) {
              const double* grow = g + y * Wo;
              double* irow = gi + (static_cast<long>(y) + dy) * static_cast<long>(W) + dx;
              for (std::size_t x = x0; x < x1; ++x) irow[x] += wv * grow[x];
            }
          }
        }
      }
    }
  }
  return gin;
}

// Accumulates weight and bias gradients of a conv2d into grad_weight and
// grad_bias.
inline void conv2d_backward_kernel(const Tensor4& input, const Tensor4& grad_out,
                                   std::size_t padding, Tensor4& grad_weight,
                                   Tensor4& grad_bias) {
  const std::size_t k = grad_weight.h();
  const std::size_t H = input.h(), W = input.w();
  const std::size_t Ho = grad_out.h(), Wo = grad_out.w();
  const long pad = static_cast<long>(padding);
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t co = 0; co < grad_weight.n(); ++co) {
      const double* g = grad_out.plane(n, co);
      double bsum = 0.0;
      for (std::size_t i = 0; i < Ho * Wo; ++i) bsum += g[i];
      grad_bias[co] += bsum;
      for (std::size_t ci = 0; ci < input.c(); ++ci) {
        const double* in = input.plane(n, ci);
        for (std::size_t ky = 0; ky < k; ++ky) {
          std::size_t y0, y1;
          detail::tap_range(ky, padding, H, Ho, y0, y1);
          for (std::size_t kx = 0; kx < k; ++kx) {
            std::size_t x0, x1;
            detail::tap_range(kx, padding, W, Wo, x0, x1);
            const long dy = static_cast<long>(ky) - pad;
            const long dx = static_cast<long>(kx) - pad;
            double acc = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
              const double* grow = g + y * Wo;
              const double* irow = in + (static_cast<long>(y) + dy) * static_cast<long>(W) + dx;
              for (std::size_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            }
            grad_weight(co, ci, ky, kx) += acc;
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <typename Fn>
Tensor4 map(const Tensor4& input, Fn fn) {
  Tensor4 out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = fn(input[i]);
  return out;
}

template <typename Fn>
Tensor4 zip(const Tensor4& a, const Tensor4& b, Fn fn, const char* what) {
  require(a.shape() == b.shape(), ErrorKind::ShapeMismatch,
          std::string(what) + ": dims " + to_string(a.shape()) + " vs " +
              to_string(b.shape()));
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

inline Tensor4 sigmoid(const Tensor4& x) {
  return map(x, [](double v) { return sigmoid(v); });
}
inline Tensor4 tanh(const Tensor4& x) {
  return map(x, [](double v) { return std::tanh(v); });
}
inline Tensor4 leaky_relu(const Tensor4& x, double slope) {
  return map(x, [slope](double v) { return v > 0.0 ? v : slope * v; });
}
inline Tensor4 hadamard(const Tensor4& a, const Tensor4& b) {
  return zip(a, b, [](double x, double y) { return x * y; }, "hadamard");
}
inline Tensor4 add(const Tensor4& a, const Tensor4& b) {
  return zip(a, b, [](double x, double y) { return x + y; }, "add");
}

// ---------------------------------------------------------------------------
// 2x2 stride-2 max pooling; odd trailing rows/cols form a partial window, so
// the output is ceil(h/2) x ceil(w/2).

inline Shape4 max_pool2_shape(const Shape4& in) {
  return {in.n, in.c, (in.h + 1) / 2, (in.w + 1) / 2};
}

namespace detail {
// Flat input index of the first maximum in the window behind output (y, x).
inline std::size_t pool_argmax(const double* in, std::size_t H, std::size_t W,
                               std::size_t y, std::size_t x) {
  std::size_t best = 2 * y * W + 2 * x;
  for (std::size_t yy = 2 * y; yy < std::min(2 * y + 2, H); ++yy) {
    for (std::size_t xx = 2 * x; xx < std::min(2 * x + 2, W); ++xx) {
      if (in[yy * W + xx] > in[best]) best = yy * W + xx;
    }
  }
  return best;
}
}  // namespace detail

inline Tensor4 max_pool2(const Tensor4& input) {
  Tensor4 out(max_pool2_shape(input.shape()));
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t c = 0; c < input.c(); ++c) {
      const double* in = input.plane(n, c);
      double* o = out.plane(n, c);
      for (std::size_t y = 0; y < out.h(); ++y) {
        for (std::size_t x = 0; x < out.w(); ++x) {
          o[y * out.w() + x] = in[detail::pool_argmax(in, input.h(), input.w(), y, x)];
        }
      }
    }
  }
  return out;
}

inline Tensor4 max_pool2_backward(const Tensor4& input, const Tensor4& grad_out) {
  Tensor4 gin(input.shape());
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t c = 0; c < input.c(); ++c) {
      const double* in = input.plane(n, c);
      const double* g = grad_out.plane(n, c);
      double* gi = gin.plane(n, c);
      for (std::size_t y = 0; y < grad_out.h(); ++y) {
        for (std::size_t x = 0; x < grad_out.w(); ++x) {
          gi[detail::pool_argmax(in, input.h(), input.w(), y, x)] += g[y * grad_out.w() + x];
        }
      }
    }
  }
  return gin;
}

// ---------------------------------------------------------------------------
// Batch slicing

inline Tensor4 batch_slice(const Tensor4& t, std::size_t index) {
  require(index < t.n(), ErrorKind::InvalidArgument,
          "batch_slice: index " + std::to_string(index) + " out of range " +
              std::to_string(t.n()));
  const std::size_t len = t.c() * t.h() * t.w();
  const auto src = t.values().subspan(index * len, len);
  return Tensor4(Shape4{1, t.c(), t.h(), t.w()},
                 std::vector<double>(src.begin(), src.end()));
}

inline Tensor4 batch_concat(std::span<const Tensor4* const> parts) {
  require(!parts.empty(), ErrorKind::InvalidArgument, "batch_concat: no parts");
  Shape4 s = parts.front()->shape();
  std::size_t total = 0;
  for (const Tensor4* p : parts) {
    require(p->c() == s.c && p->h() == s.h && p->w() == s.w,
            ErrorKind::ShapeMismatch,
            "batch_concat: part dims " + to_string(p->shape()) + " vs " +
                to_string(s));
    total += p->n();
  }
  std::vector<double> data;
  data.reserve(total * s.c * s.h * s.w);
  for (const Tensor4* p : parts) {
    data.insert(data.end(), p->values().begin(), p->values().end());
  }
  s.n = total;
  return Tensor4(s, std::move(data));
}

// ---------------------------------------------------------------------------
// Central-difference gradient; the reference every analytic gradient in the
// library is checked against.

inline std::vector<double> numeric_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> params, double step) {
  require(step > 0.0, ErrorKind::InvalidArgument,
          "numeric_gradient: step must be positive");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double up = f(p);
    p[i] = orig - step;
    const double down = f(p);
    p[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(ErrorKind::Numeric, "numeric_gradient: non-finite evaluation at coordinate " +
                                   std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor); the floor keeps near-zero
// components from dominating.
inline double max_relative_error(std::span<const double> a,
                                 std::span<const double> b,
                                 double floor = 1e-6) {
  require(a.size() == b.size(), ErrorKind::ShapeMismatch,
          "max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace ryolo
