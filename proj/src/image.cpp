#include "lapsr/image.hpp"

namespace lapsr {

namespace {

inline float clamp01(double v) { return float(std::clamp(v, 0.0, 1.0)); }

}  // namespace

ImageBuffer rgb_to_ycbcr(const ImageBuffer& img) {
  if (img.channels != 3)
    throw std::invalid_argument("rgb_to_ycbcr: expected 3 channels, got " +
                                std::to_string(img.channels));
  ImageBuffer out(img.h, img.w, 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
      out.at(y, x, 0) = clamp01((16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0);
      out.at(y, x, 1) = clamp01((128.0 - 37.797 * r - 74.203 * g + 112.0 * b) / 255.0);
      out.at(y, x, 2) = clamp01((128.0 + 112.0 * r - 93.786 * g - 18.214 * b) / 255.0);
    }
  }
  return out;
}

ImageBuffer ycbcr_to_rgb(const ImageBuffer& img) {
  if (img.channels != 3)
    throw std::invalid_argument("ycbcr_to_rgb: expected 3 channels, got " +
                                std::to_string(img.channels));
  ImageBuffer out(img.h, img.w, 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double yy = img.at(y, x, 0) * 255.0 - 16.0;
      const double cb = img.at(y, x, 1) * 255.0 - 128.0;
      const double cr = img.at(y, x, 2) * 255.0 - 128.0;
      out.at(y, x, 0) = clamp01((0.00456621 * yy + 0.00625893 * cr));
      out.at(y, x, 1) = clamp01((0.00456621 * yy - 0.00153632 * cb - 0.00318811 * cr));
      out.at(y, x, 2) = clamp01((0.00456621 * yy + 0.00791071 * cb));
    }
  }
  return out;
}

ImageBuffer extract_y(const ImageBuffer& img) {
  if (img.channels == 1) return img;
  const ImageBuffer ycc = rgb_to_ycbcr(img);
  ImageBuffer out(img.h, img.w, 1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) out.at(y, x, 0) = ycc.at(y, x, 0);
  return out;
}

namespace detail {

ResampleTaps compute_taps(int in, int out, bool antialias) {
  ResampleTaps taps;
  taps.first.resize(std::size_t(out));
  taps.w.resize(std::size_t(out));
  const double src_step = double(in) / double(out);
  const bool shrink = out < in;
  const double kscale = (antialias && shrink) ? double(out) / double(in) : 1.0;
  const double support = 2.0 / kscale;
  for (int j = 0; j < out; ++j) {
    const double center = (j + 0.5) * src_step - 0.5;
    const int lo = int(std::ceil(center - support));
    const int hi = int(std::floor(center + support));
    std::vector<double> w(std::size_t(hi - lo + 1));
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double v = cubic_keys((center - i) * kscale);
      w[std::size_t(i - lo)] = v;
      sum += v;
    }
    for (double& v : w) v /= sum;
    taps.first[std::size_t(j)] = lo;
    taps.w[std::size_t(j)] = std::move(w);
  }
  return taps;
}

}  // namespace detail

ImageBuffer bicubic_resize(const ImageBuffer& img, int out_h, int out_w, bool antialias) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bicubic_resize: output dims must be >= 1, got " +
                                std::to_string(out_h) + "x" + std::to_string(out_w));
  if (out_h == img.h && out_w == img.w) return img;

  const int c = img.channels;
  // Vertical pass into a double-precision intermediate, then horizontal.
  std::vector<double> mid(std::size_t(out_h) * img.w * c, 0.0);
  {
    const detail::ResampleTaps taps = detail::compute_taps(img.h, out_h, antialias);
    for (int y = 0; y < out_h; ++y) {
      const auto& w = taps.w[std::size_t(y)];
      const int first = taps.first[std::size_t(y)];
      for (int x = 0; x < img.w; ++x) {
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::size_t t = 0; t < w.size(); ++t) {
            const int sy = std::clamp(first + int(t), 0, img.h - 1);
            acc += w[t] * img.at(sy, x, ch);
          }
          mid[(std::size_t(y) * img.w + x) * c + ch] = acc;
        }
      }
    }
  }
  ImageBuffer out(out_h, out_w, c);
  {
    const detail::ResampleTaps taps = detail::compute_taps(img.w, out_w, antialias);
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        const auto& w = taps.w[std::size_t(x)];
        const int first = taps.first[std::size_t(x)];
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::size_t t = 0; t < w.size(); ++t) {
            const int sx = std::clamp(first + int(t), 0, img.w - 1);
            acc += w[t] * mid[(std::size_t(y) * img.w + sx) * c + ch];
          }
          out.at(y, x, ch) = clamp01(acc);
        }
      }
    }
  }
  return out;
}

ImageBuffer crop(const ImageBuffer& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > img.h || x0 + w > img.w)
    throw std::invalid_argument("crop: window " + std::to_string(h) + "x" + std::to_string(w) +
                                "+" + std::to_string(y0) + "+" + std::to_string(x0) +
                                " outside image " + std::to_string(img.h) + "x" +
                                std::to_string(img.w));
  ImageBuffer out(h, w, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < img.channels; ++ch) out.at(y, x, ch) = img.at(y0 + y, x0 + x, ch);
  return out;
}

ImageBuffer crop_to_multiple(const ImageBuffer& img, int m) {
  if (m < 1) throw std::invalid_argument("crop_to_multiple: multiple must be >= 1");
  const int h = (img.h / m) * m;
  const int w = (img.w / m) * m;
  if (h < 1 || w < 1)
    throw std::invalid_argument("crop_to_multiple: image " + std::to_string(img.h) + "x" +
                                std::to_string(img.w) + " smaller than multiple " +
                                std::to_string(m));
  if (h == img.h && w == img.w) return img;
  return crop(img, 0, 0, h, w);
}

ImageBuffer rotate90(const ImageBuffer& img, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return img;
  const bool swap = (k % 2) == 1;
  ImageBuffer out(swap ? img.w : img.h, swap ? img.h : img.w, img.channels);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      int sy = 0, sx = 0;
      switch (k) {  // clockwise quarter turns
        case 1: sy = img.h - 1 - x; sx = y; break;
        case 2: sy = img.h - 1 - y; sx = img.w - 1 - x; break;
        case 3: sy = x; sx = img.w - 1 - y; break;
      }
      for (int ch = 0; ch < img.channels; ++ch) out.at(y, x, ch) = img.at(sy, sx, ch);
    }
  }
  return out;
}

ImageBuffer flip_horizontal(const ImageBuffer& img) {
  ImageBuffer out(img.h, img.w, img.channels);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.channels; ++ch) out.at(y, x, ch) = img.at(y, img.w - 1 - x, ch);
  return out;
}

ImageBuffer flip_vertical(const ImageBuffer& img) {
  ImageBuffer out(img.h, img.w, img.channels);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.channels; ++ch) out.at(y, x, ch) = img.at(img.h - 1 - y, x, ch);
  return out;
}

}  // namespace lapsr
