#include "lapsr/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lapsr {

namespace {

void check_pair(const ImageBuffer& a, const ImageBuffer& b, const char* who) {
  if (a.h != b.h || a.w != b.w || a.channels != b.channels)
    throw std::invalid_argument(std::string(who) + ": dimension mismatch " +
                                std::to_string(a.h) + "x" + std::to_string(a.w) + "x" +
                                std::to_string(a.channels) + " vs " + std::to_string(b.h) + "x" +
                                std::to_string(b.w) + "x" + std::to_string(b.channels));
  if (a.channels != 1)
    throw std::invalid_argument(std::string(who) + ": expected single-channel (luminance) images");
}

constexpr int kWin = 11;

const std::array<double, kWin * kWin>& gaussian_window() {
  static const std::array<double, kWin * kWin> win = [] {
    std::array<double, kWin * kWin> w{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y)
      for (int x = 0; x < kWin; ++x) {
        const double dy = y - (kWin - 1) / 2.0, dx = x - (kWin - 1) / 2.0;
        w[std::size_t(y) * kWin + x] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        sum += w[std::size_t(y) * kWin + x];
      }
    for (double& v : w) v /= sum;
    return w;
  }();
  return win;
}

}  // namespace

double psnr(const ImageBuffer& ref, const ImageBuffer& test, int shave) {
  check_pair(ref, test, "psnr");
  if (shave < 0 || 2 * shave >= std::min(ref.h, ref.w))
    throw std::invalid_argument("psnr: shave " + std::to_string(shave) +
                                " leaves no pixels in a " + std::to_string(ref.h) + "x" +
                                std::to_string(ref.w) + " image");
  double sq = 0.0;
  std::size_t count = 0;
  for (int y = shave; y < ref.h - shave; ++y) {
    for (int x = shave; x < ref.w - shave; ++x) {
      const double d = double(ref.at(y, x)) - double(test.at(y, x));
      sq += d * d;
      ++count;
    }
  }
  const double mse = sq / double(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageBuffer& ref, const ImageBuffer& test) {
  check_pair(ref, test, "ssim");
  if (ref.h < kWin || ref.w < kWin)
    throw std::invalid_argument("ssim: image " + std::to_string(ref.h) + "x" +
                                std::to_string(ref.w) + " smaller than the " +
                                std::to_string(kWin) + "x" + std::to_string(kWin) + " window");
  const auto& win = gaussian_window();
  const double c1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  const double c2 = 0.03 * 0.03;

  double total = 0.0;
  std::size_t count = 0;
  for (int y0 = 0; y0 + kWin <= ref.h; ++y0) {
    for (int x0 = 0; x0 + kWin <= ref.w; ++x0) {
      double mu1 = 0, mu2 = 0, m11 = 0, m22 = 0, m12 = 0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          const double w = win[std::size_t(y) * kWin + x];
          const double a = ref.at(y0 + y, x0 + x);
          const double b = test.at(y0 + y, x0 + x);
          mu1 += w * a;
          mu2 += w * b;
          m11 += w * a * a;
          m22 += w * b * b;
          m12 += w * a * b;
        }
      }
      const double var1 = m11 - mu1 * mu1;
      const double var2 = m22 - mu2 * mu2;
      const double cov = m12 - mu1 * mu2;
      total += ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) /
               ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
      ++count;
    }
  }
  return total / double(count);
}

}  // namespace lapsr
