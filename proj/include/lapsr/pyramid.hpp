#pragma once

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lapsr/image.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor.hpp"

namespace lapsr {

/// Per-level supervision targets y_1..y_L: level s has size H/2^(L-s), each
/// produced by ONE direct antialiased bicubic resize of the HR original
/// (iterated halving blurs differently and is deliberately not used).
/// lr is the level-0 network input at 1/scale.
struct GroundTruthPyramid {
  std::vector<ImageBuffer> levels;
  ImageBuffer lr;
};

inline GroundTruthPyramid build_gt_pyramid(const ImageBuffer& hr, int scale) {
  if (hr.channels != 1)
    throw std::invalid_argument("build_gt_pyramid: expected single-channel image");
  if (scale != 2 && scale != 4 && scale != 8)
    throw std::invalid_argument("build_gt_pyramid: scale must be one of {2, 4, 8}");
  if (hr.h % scale != 0 || hr.w % scale != 0)
    throw std::invalid_argument("build_gt_pyramid: dims " + std::to_string(hr.h) + "x" +
                                std::to_string(hr.w) + " not divisible by scale " +
                                std::to_string(scale) + " (crop_to_multiple first)");
  GroundTruthPyramid p;
  int level_count = 0;
  for (int s = scale; s > 1; s /= 2) ++level_count;
  for (int s = 1; s <= level_count; ++s) {
    const int div = 1 << (level_count - s);
    p.levels.push_back(div == 1 ? hr : bicubic_resize(hr, hr.h / div, hr.w / div, true));
  }
  p.lr = bicubic_resize(hr, hr.h / scale, hr.w / scale, true);
  return p;
}

/// Sampled augmentation: downscale by u ~ U[0.5, 1.0], rotate by a uniform
/// quarter turn, then horizontal / vertical flips each with probability 0.5.
struct AugmentOps {
  double scale_u = 1.0;
  int rot_quarters = 0;
  bool flip_h = false;
  bool flip_v = false;
};

inline AugmentOps draw_augment_ops(Rng& rng) {
  AugmentOps ops;
  ops.scale_u = rng.uniform(0.5, 1.0);
  ops.rot_quarters = int(rng.uniform_index(4));
  ops.flip_h = rng.bernoulli(0.5);
  ops.flip_v = rng.bernoulli(0.5);
  return ops;
}

inline ImageBuffer apply_augment(const ImageBuffer& img, const AugmentOps& ops) {
  ImageBuffer out = img;
  const int nh = int(std::llround(ops.scale_u * img.h));
  const int nw = int(std::llround(ops.scale_u * img.w));
  if (nh != img.h || nw != img.w) out = bicubic_resize(out, nh, nw, true);
  if (ops.rot_quarters != 0) out = rotate90(out, ops.rot_quarters);
  if (ops.flip_h) out = flip_horizontal(out);
  if (ops.flip_v) out = flip_vertical(out);
  return out;
}

inline ImageBuffer augment(const ImageBuffer& img, Rng& rng) {
  return apply_augment(img, draw_augment_ops(rng));
}

struct SampleConfig {
  int batch_n = 64;
  int patch = 128;
  int scale = 4;
};

/// One training batch: LR inputs plus the per-level target stack matching the
/// network's multi-scale outputs.
template <typename T>
struct TrainBatch {
  Tensor4<T> lr;
  std::vector<Tensor4<T>> targets;
};

/// Owns the eligible slice of the corpus. Images that could fall below the
/// patch size under the worst-case 0.5 augmentation downscale are skipped
/// with a warning at construction.
class PatchSampler {
 public:
  PatchSampler(std::vector<ImageBuffer> corpus, const SampleConfig& cfg) : cfg_(cfg) {
    if (cfg.batch_n < 1 || cfg.patch < 1)
      throw std::invalid_argument("PatchSampler: batch_n and patch must be >= 1");
    if (cfg.patch % cfg.scale != 0)
      throw std::invalid_argument("PatchSampler: patch " + std::to_string(cfg.patch) +
                                  " not divisible by scale " + std::to_string(cfg.scale));
    int skipped = 0;
    for (auto& img : corpus) {
      ImageBuffer y = extract_y(img);
      const int worst = std::min(int(std::llround(0.5 * y.h)), int(std::llround(0.5 * y.w)));
      if (worst < cfg.patch) {
        ++skipped;
        continue;
      }
      corpus_.push_back(std::move(y));
    }
    if (skipped > 0)
      std::cerr << "warning: skipped " << skipped << " corpus image(s) smaller than "
                << 2 * cfg.patch << "x" << 2 * cfg.patch << " (patch " << cfg.patch
                << " with worst-case 0.5 downscale)\n";
    if (corpus_.empty())
      throw std::invalid_argument("PatchSampler: no usable corpus images for patch size " +
                                  std::to_string(cfg.patch));
  }

  const SampleConfig& config() const { return cfg_; }
  std::size_t corpus_size() const { return corpus_.size(); }

  /// Draw order per patch: image index, augment ops, crop row, crop col.
  template <typename T>
  TrainBatch<T> sample(Rng& rng) const {
    const int p = cfg_.patch, s = cfg_.scale, n = cfg_.batch_n;
    int level_count = 0;
    for (int f = s; f > 1; f /= 2) ++level_count;

    TrainBatch<T> batch;
    batch.lr = Tensor4<T>(Shape4{n, 1, p / s, p / s});
    for (int lvl = 1; lvl <= level_count; ++lvl) {
      const int size = p >> (level_count - lvl);
      batch.targets.push_back(Tensor4<T>(Shape4{n, 1, size, size}));
    }
    for (int i = 0; i < n; ++i) {
      const auto& src = corpus_[rng.uniform_index(corpus_.size())];
      const ImageBuffer aug = apply_augment(src, draw_augment_ops(rng));
      const int oy = int(rng.uniform_index(std::uint64_t(aug.h - p + 1)));
      const int ox = int(rng.uniform_index(std::uint64_t(aug.w - p + 1)));
      const GroundTruthPyramid pyr = build_gt_pyramid(crop(aug, oy, ox, p, p), s);
      copy_plane(batch.lr, i, pyr.lr);
      for (int lvl = 0; lvl < level_count; ++lvl)
        copy_plane(batch.targets[std::size_t(lvl)], i, pyr.levels[std::size_t(lvl)]);
    }
    return batch;
  }

 private:
  template <typename T>
  static void copy_plane(Tensor4<T>& dst, int sample, const ImageBuffer& src) {
    for (int y = 0; y < src.h; ++y)
      for (int x = 0; x < src.w; ++x) dst.at(sample, 0, y, x) = T(src.at(y, x, 0));
  }

  std::vector<ImageBuffer> corpus_;
  SampleConfig cfg_;
};

template <typename T>
TrainBatch<T> sample_batch(const PatchSampler& sampler, Rng& rng) {
  return sampler.sample<T>(rng);
}

}  // namespace lapsr
