#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lapsr/parallel.hpp"
#include "lapsr/tensor.hpp"

namespace lapsr {

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
};

struct CharbonnierSpec {
  double epsilon = 1e-3;
};

namespace detail {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RowMajorMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline int conv_out_extent(int in, int kernel, int stride, int pad, const char* who) {
  const int span = in + 2 * pad - kernel;
  if (span < 0 || span % stride != 0)
    throw std::invalid_argument(std::string(who) + ": non-integral output size for extent " +
                                std::to_string(in) + " with kernel " + std::to_string(kernel) +
                                ", stride " + std::to_string(stride) + ", pad " +
                                std::to_string(pad));
  return span / stride + 1;
}

template <typename T>
using MatRow = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gather one sample's zero-padded patches into a row-major
/// (C*k*k) x (oh*ow) block: row r = (c*k + ky)*k + kx, column j = oy*ow + ox.
/// Row-major keeps the inner loop a contiguous run per output row.
template <typename T>
void im2col(const T* src, int channels, int src_h, int src_w, int kernel, int stride, int pad,
            int oh, int ow, T* cols) {
  const std::size_t px = std::size_t(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    const T* plane = src + std::size_t(c) * src_h * src_w;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = cols + ((std::size_t(c) * kernel + ky) * kernel + kx) * px;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * stride - pad + ky;
          T* dst = row + std::size_t(oy) * ow;
          if (y < 0 || y >= src_h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* srow = plane + std::size_t(y) * src_w;
          if (stride == 1) {
            const int shift = kx - pad;  // x = ox + shift
            const int ox0 = std::max(0, -shift);
            const int ox1 = std::min(ow, src_w - shift);
            if (ox0 > 0) std::fill(dst, dst + std::min(ox0, ow), T(0));
            if (ox1 > ox0) std::copy(srow + ox0 + shift, srow + ox1 + shift, dst + ox0);
            if (ox1 < ow) std::fill(dst + std::max(ox0, ox1), dst + ow, T(0));
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int x = ox * stride - pad + kx;
              dst[ox] = (x < 0 || x >= src_w) ? T(0) : srow[x];
            }
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-add a row-major (C*k*k) x (oh*ow) block back
/// into the plane stack.
template <typename T>
void col2im_add(const T* cols, int channels, int src_h, int src_w, int kernel, int stride,
                int pad, int oh, int ow, T* dst) {
  const std::size_t px = std::size_t(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    T* plane = dst + std::size_t(c) * src_h * src_w;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row = cols + ((std::size_t(c) * kernel + ky) * kernel + kx) * px;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * stride - pad + ky;
          if (y < 0 || y >= src_h) continue;
          const T* srow = row + std::size_t(oy) * ow;
          T* drow = plane + std::size_t(y) * src_w;
          if (stride == 1) {
            const int shift = kx - pad;
            const int ox0 = std::max(0, -shift);
            const int ox1 = std::min(ow, src_w - shift);
            for (int ox = ox0; ox < ox1; ++ox) drow[ox + shift] += srow[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int x = ox * stride - pad + kx;
              if (x >= 0 && x < src_w) drow[x] += srow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_args(const Tensor4<T>& input, const Tensor4<T>& weights, const ConvSpec& spec,
                     Shape4 expect_w, const char* who) {
  if (input.shape().c != spec.in_channels)
    throw std::invalid_argument(std::string(who) + ": input has " +
                                std::to_string(input.shape().c) + " channels, spec expects " +
                                std::to_string(spec.in_channels));
  if (!(weights.shape() == expect_w))
    throw std::invalid_argument(std::string(who) + ": weight shape " + weights.shape().str() +
                                " does not match spec " + expect_w.str());
}

}  // namespace detail

/// Cross-correlation (no kernel flip) with zero padding.
/// weights: [outC, inC, k, k]; bias: one value per output channel.
/// Samples are chunked across worker threads; each chunk runs one batched
/// GEMM over its gathered columns.
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& input, const Tensor4<T>& weights, std::span<const T> bias,
                  const ConvSpec& spec) {
  detail::check_conv_args(input, weights, spec,
                          Shape4{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel},
                          "conv2d");
  if (int(bias.size()) != spec.out_channels)
    throw std::invalid_argument("conv2d: bias size " + std::to_string(bias.size()) +
                                " does not match out_channels " +
                                std::to_string(spec.out_channels));
  const Shape4 s = input.shape();
  const int oh = detail::conv_out_extent(s.h, spec.kernel, spec.stride, spec.pad, "conv2d");
  const int ow = detail::conv_out_extent(s.w, spec.kernel, spec.stride, spec.pad, "conv2d");
  Tensor4<T> out(Shape4{s.n, spec.out_channels, oh, ow});

  const Eigen::Index krows = Eigen::Index(spec.in_channels) * spec.kernel * spec.kernel;
  const Eigen::Index px = Eigen::Index(oh) * ow;
  detail::ConstRowMajorMap<T> wmat(weights.data(), spec.out_channels, krows);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.data(), spec.out_channels);
  const std::size_t in_stride = std::size_t(s.c) * s.h * s.w;
  const std::size_t out_stride = std::size_t(spec.out_channels) * oh * ow;

  parallel_for_chunks(s.n, [&](int lo, int hi) {
    detail::MatRow<T> cols(krows, px);
    for (int n = lo; n < hi; ++n) {
      detail::im2col(input.data() + n * in_stride, s.c, s.h, s.w, spec.kernel, spec.stride,
                     spec.pad, oh, ow, cols.data());
      detail::RowMajorMap<T> omat(out.data() + n * out_stride, spec.out_channels, px);
      omat.noalias() = wmat * cols;
      omat.colwise() += bvec;
    }
  });
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor4<T> input;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const Tensor4<T>& weights,
                             const ConvSpec& spec, const Tensor4<T>& upstream) {
  detail::check_conv_args(input, weights, spec,
                          Shape4{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel},
                          "conv2d_backward");
  const Shape4 s = input.shape();
  const int oh = detail::conv_out_extent(s.h, spec.kernel, spec.stride, spec.pad, "conv2d_backward");
  const int ow = detail::conv_out_extent(s.w, spec.kernel, spec.stride, spec.pad, "conv2d_backward");
  if (!(upstream.shape() == Shape4{s.n, spec.out_channels, oh, ow}))
    throw std::invalid_argument("conv2d_backward: upstream shape " + upstream.shape().str() +
                                " does not match output " +
                                Shape4{s.n, spec.out_channels, oh, ow}.str());

  ConvGrads<T> g{Tensor4<T>(s), Tensor4<T>(weights.shape()),
                 std::vector<T>(std::size_t(spec.out_channels), T(0))};
  const Eigen::Index krows = Eigen::Index(spec.in_channels) * spec.kernel * spec.kernel;
  const Eigen::Index px = Eigen::Index(oh) * ow;
  detail::ConstRowMajorMap<T> wmat(weights.data(), spec.out_channels, krows);
  const std::size_t in_stride = std::size_t(s.c) * s.h * s.w;
  const std::size_t out_stride = std::size_t(spec.out_channels) * oh * ow;

  // Per-chunk partials, accumulated sample-by-sample inside the chunk and
  // reduced in chunk order below: bitwise-deterministic for a fixed thread
  // count.
  const auto ranges = chunk_ranges(s.n);
  std::vector<detail::MatX<T>> wpart(ranges.size());
  std::vector<Eigen::Matrix<T, Eigen::Dynamic, 1>> bpart(ranges.size());
  parallel_for_ranges(ranges, [&](std::size_t r, int lo, int hi) {
    wpart[r].setZero(spec.out_channels, krows);
    bpart[r].setZero(spec.out_channels);
    detail::MatRow<T> cols(krows, px);
    detail::MatRow<T> icols(krows, px);
    for (int n = lo; n < hi; ++n) {
      detail::im2col(input.data() + n * in_stride, s.c, s.h, s.w, spec.kernel, spec.stride,
                     spec.pad, oh, ow, cols.data());
      detail::ConstRowMajorMap<T> up(upstream.data() + n * out_stride, spec.out_channels, px);
      wpart[r].noalias() += up * cols.transpose();
      bpart[r] += up.rowwise().sum();
      icols.noalias() = wmat.transpose() * up;
      detail::col2im_add(icols.data(), s.c, s.h, s.w, spec.kernel, spec.stride, spec.pad, oh, ow,
                         g.input.data() + n * in_stride);
    }
  });
  detail::RowMajorMap<T> gwmat(g.weights.data(), spec.out_channels, krows);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gbvec(g.bias.data(), spec.out_channels);
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    gwmat += wpart[r];
    gbvec += bpart[r];
  }
  return g;
}

/// Learned upsampling: each input pixel scatters a weighted k x k footprint
/// (the adjoint of strided cross-correlation). weights: [inC, outC, k, k];
/// no bias. Output extent = (in - 1)*stride - 2*pad + kernel.
template <typename T>
Tensor4<T> transposed_conv2d(const Tensor4<T>& input, const Tensor4<T>& weights,
                             const ConvSpec& spec) {
  detail::check_conv_args(input, weights, spec,
                          Shape4{spec.in_channels, spec.out_channels, spec.kernel, spec.kernel},
                          "transposed_conv2d");
  const Shape4 s = input.shape();
  const int oh = (s.h - 1) * spec.stride - 2 * spec.pad + spec.kernel;
  const int ow = (s.w - 1) * spec.stride - 2 * spec.pad + spec.kernel;
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("transposed_conv2d: degenerate output size for input " + s.str());
  Tensor4<T> out(Shape4{s.n, spec.out_channels, oh, ow});

  const Eigen::Index krows = Eigen::Index(spec.out_channels) * spec.kernel * spec.kernel;
  const Eigen::Index px = Eigen::Index(s.h) * s.w;
  detail::ConstRowMajorMap<T> wmat(weights.data(), spec.in_channels, krows);
  const std::size_t in_stride = std::size_t(s.c) * s.h * s.w;
  const std::size_t out_stride = std::size_t(spec.out_channels) * oh * ow;

  parallel_for_chunks(s.n, [&](int lo, int hi) {
    detail::MatRow<T> cols(krows, px);
    for (int n = lo; n < hi; ++n) {
      detail::ConstRowMajorMap<T> x(input.data() + n * in_stride, spec.in_channels, px);
      cols.noalias() = wmat.transpose() * x;
      detail::col2im_add(cols.data(), spec.out_channels, oh, ow, spec.kernel, spec.stride,
                         spec.pad, s.h, s.w, out.data() + n * out_stride);
    }
  });
  return out;
}

template <typename T>
struct TConvGrads {
  Tensor4<T> input;
  Tensor4<T> weights;
};

template <typename T>
TConvGrads<T> transposed_conv2d_backward(const Tensor4<T>& input, const Tensor4<T>& weights,
                                         const ConvSpec& spec, const Tensor4<T>& upstream) {
  detail::check_conv_args(input, weights, spec,
                          Shape4{spec.in_channels, spec.out_channels, spec.kernel, spec.kernel},
                          "transposed_conv2d_backward");
  const Shape4 s = input.shape();
  const int oh = (s.h - 1) * spec.stride - 2 * spec.pad + spec.kernel;
  const int ow = (s.w - 1) * spec.stride - 2 * spec.pad + spec.kernel;
  if (!(upstream.shape() == Shape4{s.n, spec.out_channels, oh, ow}))
    throw std::invalid_argument("transposed_conv2d_backward: upstream shape " +
                                upstream.shape().str() + " does not match output " +
                                Shape4{s.n, spec.out_channels, oh, ow}.str());

  TConvGrads<T> g{Tensor4<T>(s), Tensor4<T>(weights.shape())};
  const Eigen::Index krows = Eigen::Index(spec.out_channels) * spec.kernel * spec.kernel;
  const Eigen::Index px = Eigen::Index(s.h) * s.w;
  detail::ConstRowMajorMap<T> wmat(weights.data(), spec.in_channels, krows);
  const std::size_t in_stride = std::size_t(s.c) * s.h * s.w;
  const std::size_t out_stride = std::size_t(spec.out_channels) * oh * ow;

  const auto ranges = chunk_ranges(s.n);
  std::vector<detail::MatX<T>> wpart(ranges.size());
  parallel_for_ranges(ranges, [&](std::size_t r, int lo, int hi) {
    wpart[r].setZero(spec.in_channels, krows);
    detail::MatRow<T> cols(krows, px);
    for (int n = lo; n < hi; ++n) {
      detail::im2col(upstream.data() + n * out_stride, spec.out_channels, oh, ow, spec.kernel,
                     spec.stride, spec.pad, s.h, s.w, cols.data());
      detail::RowMajorMap<T> gx(g.input.data() + n * in_stride, spec.in_channels, px);
      gx.noalias() = wmat * cols;
      detail::ConstRowMajorMap<T> x(input.data() + n * in_stride, spec.in_channels, px);
      wpart[r].noalias() += x * cols.transpose();
    }
  });
  detail::RowMajorMap<T> gwmat(g.weights.data(), spec.in_channels, krows);
  for (std::size_t r = 0; r < ranges.size(); ++r) gwmat += wpart[r];
  return g;
}

/// out = x for x >= 0, slope*x otherwise. Subgradient at 0 is 1.
template <typename T>
Tensor4<T> leaky_relu(const Tensor4<T>& input, double slope) {
  if (!std::isfinite(slope)) throw std::invalid_argument("leaky_relu: slope must be finite");
  Tensor4<T> out(input.shape());
  const T k = T(slope);
  out.array() = (input.array() >= T(0)).select(input.array(), k * input.array());
  return out;
}

/// `reference` may be either the pre- or post-activation tensor: for positive
/// slope both have the same sign pattern, which is all the backward pass needs.
template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& reference, const Tensor4<T>& upstream,
                               double slope) {
  if (!(reference.shape() == upstream.shape()))
    throw std::invalid_argument("leaky_relu_backward: shape mismatch " +
                                reference.shape().str() + " vs " + upstream.shape().str());
  Tensor4<T> out(upstream.shape());
  const T k = T(slope);
  out.array() = (reference.array() >= T(0)).select(upstream.array(), k * upstream.array());
  return out;
}

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor4<T> grad;
};

/// Mean over all elements of rho(pred - target), rho(x) = sqrt(x^2 + eps^2);
/// a smooth l1 whose gradient magnitude stays below 1/count per element.
/// The sum is accumulated in double regardless of T.
template <typename T>
LossResult<T> charbonnier_loss(const Tensor4<T>& pred, const Tensor4<T>& target,
                               const CharbonnierSpec& spec) {
  if (!(pred.shape() == target.shape()))
    throw std::invalid_argument("charbonnier_loss: shape mismatch " + pred.shape().str() +
                                " vs " + target.shape().str());
  if (!(spec.epsilon > 0))
    throw std::invalid_argument("charbonnier_loss: epsilon must be > 0");
  LossResult<T> r;
  r.grad = Tensor4<T>(pred.shape());
  const double eps2 = spec.epsilon * spec.epsilon;
  const double inv_count = 1.0 / double(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred[i]) - double(target[i]);
    const double rho = std::sqrt(d * d + eps2);
    total += rho;
    r.grad[i] = T(d / rho * inv_count);
  }
  r.value = total * inv_count;
  return r;
}

/// Mean squared difference; gradient 2*(pred - target)/count.
template <typename T>
LossResult<T> l2_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
  if (!(pred.shape() == target.shape()))
    throw std::invalid_argument("l2_loss: shape mismatch " + pred.shape().str() + " vs " +
                                target.shape().str());
  LossResult<T> r;
  r.grad = Tensor4<T>(pred.shape());
  const double inv_count = 1.0 / double(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred[i]) - double(target[i]);
    total += d * d;
    r.grad[i] = T(2.0 * d * inv_count);
  }
  r.value = total * inv_count;
  return r;
}

/// Per-channel bilinear upsampling kernel for a transposed conv, size = 2*factor:
/// 1D taps t_i = 1 - |i + 0.5 - size/2| / factor, 2D kernel = outer product,
/// channel i feeds channel i only. For factor 2 the taps are (.25,.75,.75,.25).
template <typename T>
Tensor4<T> bilinear_kernel(int size, int factor, int channels) {
  if (factor < 1 || size != 2 * factor)
    throw std::invalid_argument("bilinear_kernel: need size == 2*factor, got size " +
                                std::to_string(size) + ", factor " + std::to_string(factor));
  if (channels < 1) throw std::invalid_argument("bilinear_kernel: channels must be >= 1");
  std::vector<double> taps(static_cast<std::size_t>(size));
  const double center = size / 2.0;
  for (int i = 0; i < size; ++i)
    taps[std::size_t(i)] = 1.0 - std::fabs(i + 0.5 - center) / factor;
  Tensor4<T> k(Shape4{channels, channels, size, size});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        k.at(c, c, y, x) = T(taps[std::size_t(y)] * taps[std::size_t(x)]);
  return k;
}

}  // namespace lapsr
