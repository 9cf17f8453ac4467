#include "lapsr/eval.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "lapsr/image_io.hpp"

namespace lapsr {

namespace {

std::string format_metric(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

nlohmann::json metric_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

UpscaleFn bicubic_upscaler() {
  return [](const ImageBuffer& lr, int out_h, int out_w) {
    return bicubic_resize(lr, out_h, out_w, true);
  };
}

UpscaleFn model_upscaler(const LapSRNModel<float>& model, int scale) {
  const int max_scale = model.config.scale;
  if (scale > max_scale || scale < 2 || (scale & (scale - 1)) != 0)
    throw std::invalid_argument("model_upscaler: requested scale " + std::to_string(scale) +
                                " unsupported; checkpoint provides up to " +
                                std::to_string(max_scale) + "x");
  if (!model.config.use_pyramid && scale != max_scale)
    throw std::invalid_argument("model_upscaler: no-pyramid checkpoint only provides " +
                                std::to_string(max_scale) + "x");
  int level = 0;
  for (int s = scale; s > 1; s /= 2) ++level;
  const int run_level = model.config.use_pyramid ? level : 1;
  return [&model, run_level, scale](const ImageBuffer& lr, int out_h, int out_w) {
    MultiScaleOutput<float> out = forward(model, image_to_tensor<float>(lr), run_level);
    ImageBuffer sr = tensor_to_image(out.outputs.back());
    if (sr.h != out_h || sr.w != out_w)
      throw std::invalid_argument("model_upscaler: output " + std::to_string(sr.h) + "x" +
                                  std::to_string(sr.w) + " does not match requested " +
                                  std::to_string(out_h) + "x" + std::to_string(out_w));
    (void)scale;
    return sr;
  };
}

ImageBuffer super_resolve(const ImageBuffer& input, const UpscaleFn& up, int scale) {
  const int out_h = input.h * scale, out_w = input.w * scale;
  if (input.channels == 1) return up(input, out_h, out_w);
  const ImageBuffer ycc = rgb_to_ycbcr(input);
  ImageBuffer y(input.h, input.w, 1), cb(input.h, input.w, 1), cr(input.h, input.w, 1);
  for (int yy = 0; yy < input.h; ++yy)
    for (int xx = 0; xx < input.w; ++xx) {
      y.at(yy, xx) = ycc.at(yy, xx, 0);
      cb.at(yy, xx) = ycc.at(yy, xx, 1);
      cr.at(yy, xx) = ycc.at(yy, xx, 2);
    }
  const ImageBuffer y_sr = up(y, out_h, out_w);
  const ImageBuffer cb_sr = bicubic_resize(cb, out_h, out_w, true);
  const ImageBuffer cr_sr = bicubic_resize(cr, out_h, out_w, true);
  ImageBuffer ycc_sr(out_h, out_w, 3);
  for (int yy = 0; yy < out_h; ++yy)
    for (int xx = 0; xx < out_w; ++xx) {
      ycc_sr.at(yy, xx, 0) = y_sr.at(yy, xx);
      ycc_sr.at(yy, xx, 1) = cb_sr.at(yy, xx);
      ycc_sr.at(yy, xx, 2) = cr_sr.at(yy, xx);
    }
  return ycbcr_to_rgb(ycc_sr);
}

EvalSummary evaluate_dataset(const UpscaleFn& up, const std::vector<std::filesystem::path>& images,
                             int scale, const EvalProtocol& protocol, bool strict) {
  if (scale < 1) throw std::invalid_argument("evaluate_dataset: scale must be >= 1");
  const int shave = protocol.shave >= 0 ? protocol.shave : scale;
  EvalSummary summary;
  for (const auto& path : images) {
    if (!std::filesystem::exists(path)) {
      if (strict) throw IoError("evaluate_dataset: missing image '" + path.string() + "'");
      std::cerr << "warning: skipping missing image '" << path.string() << "'\n";
      summary.complete = false;
      continue;
    }
    const ImageBuffer hr_y = crop_to_multiple(extract_y(load_image(path)), scale);
    const ImageBuffer lr =
        scale == 1 ? hr_y : bicubic_resize(hr_y, hr_y.h / scale, hr_y.w / scale, true);
    const auto t0 = std::chrono::steady_clock::now();
    const ImageBuffer sr = up(lr, hr_y.h, hr_y.w);
    const auto t1 = std::chrono::steady_clock::now();

    EvalRecord rec;
    rec.image = path.filename().string();
    rec.ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.psnr_db = psnr(hr_y, sr, shave);
    const ImageBuffer ref_c = shave > 0 ? crop(hr_y, shave, shave, hr_y.h - 2 * shave,
                                               hr_y.w - 2 * shave)
                                        : hr_y;
    const ImageBuffer sr_c = shave > 0 ? crop(sr, shave, shave, sr.h - 2 * shave,
                                              sr.w - 2 * shave)
                                       : sr;
    rec.ssim = ssim(ref_c, sr_c);
    summary.records.push_back(std::move(rec));
  }
  if (!summary.records.empty()) {
    double p = 0, s = 0, ms = 0;
    for (const auto& r : summary.records) {
      p += r.psnr_db;
      s += r.ssim;
      ms += r.ms;
    }
    const double n = double(summary.records.size());
    summary.mean_psnr = p / n;
    summary.mean_ssim = s / n;
    summary.mean_ms = ms / n;
  }
  return summary;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("read_manifest: cannot open '" + manifest.string() + "'");
  const std::filesystem::path base = manifest.parent_path();
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto end = line.find_last_not_of(" \t");
    std::filesystem::path p = line.substr(start, end - start + 1);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  if (out.empty())
    throw std::invalid_argument("read_manifest: no entries in '" + manifest.string() + "'");
  return out;
}

void write_eval_csv(std::ostream& out, const EvalSummary& summary) {
  out << "image,psnr_db,ssim,ms\n";
  for (const auto& r : summary.records) {
    char ms[32];
    std::snprintf(ms, sizeof(ms), "%.3f", r.ms);
    out << r.image << "," << format_metric(r.psnr_db) << "," << format_metric(r.ssim) << ","
        << ms << "\n";
  }
  char ms[32];
  std::snprintf(ms, sizeof(ms), "%.3f", summary.mean_ms);
  out << "MEAN," << format_metric(summary.mean_psnr) << "," << format_metric(summary.mean_ssim)
      << "," << ms << "\n";
}

void write_eval_json(std::ostream& out, const EvalSummary& summary) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : summary.records)
    arr.push_back({{"image", r.image},
                   {"psnr_db", metric_json(r.psnr_db)},
                   {"ssim", metric_json(r.ssim)},
                   {"ms", r.ms}});
  arr.push_back({{"image", "MEAN"},
                 {"psnr_db", metric_json(summary.mean_psnr)},
                 {"ssim", metric_json(summary.mean_ssim)},
                 {"ms", summary.mean_ms},
                 {"complete", summary.complete}});
  out << arr.dump(2) << "\n";
}

}  // namespace lapsr
