#pragma once

#include "lapsr/image.hpp"

namespace lapsr {

/// 10*log10(1/MSE) over the region left after cropping `shave` pixels from
/// all four borders; +infinity for identical crops. Peak = 1 (images in [0,1]).
double psnr(const ImageBuffer& ref, const ImageBuffer& test, int shave);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 = 0.01,
/// K2 = 0.03, dynamic range 1). No padding: only fully interior positions
/// contribute.
double ssim(const ImageBuffer& ref, const ImageBuffer& test);

}  // namespace lapsr
