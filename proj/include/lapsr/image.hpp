#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lapsr/tensor.hpp"

namespace lapsr {

/// Planar-free image: row-major H -> W -> C, values in [0, 1], 1 or 3 channels.
struct ImageBuffer {
  int h = 0, w = 0, channels = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int h_, int w_, int c_) : h(h_), w(w_), channels(c_) {
    if (h < 1 || w < 1 || (c_ != 1 && c_ != 3))
      throw std::invalid_argument("ImageBuffer: bad dims " + std::to_string(h_) + "x" +
                                  std::to_string(w_) + "x" + std::to_string(c_));
    data.assign(std::size_t(h) * w * channels, 0.0f);
  }

  std::size_t index(int y, int x, int c) const {
    return (std::size_t(y) * w + x) * channels + c;
  }
  float& at(int y, int x, int c = 0) { return data[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data[index(y, x, c)]; }
};

/// ITU-R BT.601 studio-swing transform with R,G,B in [0,1]:
/// Y = (16 + 65.481 R + 128.553 G + 24.966 B)/255, Cb/Cr offset at 128/255.
ImageBuffer rgb_to_ycbcr(const ImageBuffer& img);
ImageBuffer ycbcr_to_rgb(const ImageBuffer& img);

/// Luminance channel; a 1-channel input passes through unchanged.
ImageBuffer extract_y(const ImageBuffer& img);

/// Separable Keys cubic (a = -0.5) with source mapping
/// src = (dst + 0.5)*(in/out) - 0.5, clamp-replicated edges, and taps
/// renormalized to sum 1. When downscaling with antialias the kernel support
/// is stretched by the scale ratio (the SR literature's reference-resizer
/// convention); without that the bicubic baselines land >0.5 dB off.
ImageBuffer bicubic_resize(const ImageBuffer& img, int out_h, int out_w, bool antialias);

/// Top-left crop to the largest dims divisible by m.
ImageBuffer crop_to_multiple(const ImageBuffer& img, int m);
ImageBuffer crop(const ImageBuffer& img, int y0, int x0, int h, int w);

ImageBuffer rotate90(const ImageBuffer& img, int quarter_turns);
ImageBuffer flip_horizontal(const ImageBuffer& img);
ImageBuffer flip_vertical(const ImageBuffer& img);

namespace detail {
/// Keys bicubic kernel, a = -0.5.
inline double cubic_keys(double x) {
  x = std::fabs(x);
  if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

struct ResampleTaps {
  std::vector<int> first;              // leftmost source index per output pixel
  std::vector<std::vector<double>> w;  // normalized weights, clamp applied at sample time
};
ResampleTaps compute_taps(int in, int out, bool antialias);
}  // namespace detail

template <typename T>
Tensor4<T> image_to_tensor(const ImageBuffer& img) {
  Tensor4<T> t(Shape4{1, img.channels, img.h, img.w});
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) t.at(0, c, y, x) = T(img.at(y, x, c));
  return t;
}

template <typename T>
ImageBuffer tensor_to_image(const Tensor4<T>& t, int sample = 0) {
  const Shape4 s = t.shape();
  ImageBuffer img(s.h, s.w, s.c);
  for (int c = 0; c < s.c; ++c)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        img.at(y, x, c) = float(std::clamp(double(t.at(sample, c, y, x)), 0.0, 1.0));
  return img;
}

}  // namespace lapsr
