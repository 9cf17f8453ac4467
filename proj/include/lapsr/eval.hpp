#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "lapsr/image.hpp"
#include "lapsr/metrics.hpp"
#include "lapsr/model.hpp"

namespace lapsr {

struct EvalProtocol {
  int shave = -1;  // -1: default to the scale factor
};

struct EvalRecord {
  std::string image;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double ms = 0.0;
};

struct EvalSummary {
  std::vector<EvalRecord> records;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_ms = 0.0;
  bool complete = true;  // false when manifest entries were skipped
};

/// Produces the HR luminance prediction for one LR luminance input.
using UpscaleFn = std::function<ImageBuffer(const ImageBuffer& lr_y, int out_h, int out_w)>;

UpscaleFn bicubic_upscaler();
/// Truncates an oversized pyramid to the requested scale; throws
/// invalid_argument naming the model's maximum when asked beyond it.
UpscaleFn model_upscaler(const LapSRNModel<float>& model, int scale);

/// Shared super-resolution path used by both `sr` and `eval`: Y through the
/// given upscaler; for color inputs Cb/Cr are bicubic-upscaled and recombined.
ImageBuffer super_resolve(const ImageBuffer& input, const UpscaleFn& up, int scale);

/// Per image: crop HR to a multiple of scale, bicubic-downscale to LR,
/// upscale, then PSNR/SSIM on luminance with the protocol's border shave.
/// Missing files are skipped with a warning (IoError when strict).
EvalSummary evaluate_dataset(const UpscaleFn& up, const std::vector<std::filesystem::path>& images,
                             int scale, const EvalProtocol& protocol, bool strict = false);

/// Plain text manifest: one relative path per line, '#' comments allowed.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);

/// CSV `image,psnr_db,ssim,ms` plus a MEAN row; infinity prints as "inf".
void write_eval_csv(std::ostream& out, const EvalSummary& summary);
void write_eval_json(std::ostream& out, const EvalSummary& summary);

}  // namespace lapsr
