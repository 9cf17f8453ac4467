#include <CLI11.hpp>

#include <atomic>
#include <cinttypes>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "lapsr/checkpoint.hpp"
#include "lapsr/config.hpp"
#include "lapsr/eval.hpp"
#include "lapsr/gradcheck.hpp"
#include "lapsr/image_io.hpp"
#include "lapsr/model.hpp"
#include "lapsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace lapsr;

namespace {

// Exit-code contract: 0 ok, 1 check failure, 2 usage/config, 3 data, 4 numeric.
constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::atomic<bool> g_interrupted{false};
void handle_sigint(int) { g_interrupted.store(true); }

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && has_image_extension(entry.path())) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

struct TrainArgs {
  std::string config_path, data_dir, out_dir;
  int scale = 0;
  int depth = 0;
  int channels = 0;
  std::string loss;
  bool no_residual = false, no_pyramid = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int epochs = 0, iters = 0, batch = 0, patch = 0;
  double lr = 0.0;
};

int run_train(const TrainArgs& args) {
  LapSRNConfig mc;
  TrainConfig tc;
  bool depth_given = false;
  if (!args.config_path.empty()) {
    const KvConfig kv = KvConfig::parse_file(args.config_path);
    depth_given = kv.values.count("depth_d") > 0;
    apply_config(kv, mc, tc);
  }
  if (args.scale) mc.scale = args.scale;
  if (args.depth) {
    mc.depth_d = args.depth;
    depth_given = true;
  }
  if (args.channels) mc.channels = args.channels;
  if (!args.loss.empty()) mc.loss_kind = loss_kind_from_name(args.loss);
  if (args.no_residual) mc.use_residual = false;
  if (args.no_pyramid) mc.use_pyramid = false;
  if (args.seed_set) tc.seed = args.seed;
  if (args.epochs) tc.max_epochs = args.epochs;
  if (args.iters) tc.iters_per_epoch = args.iters;
  if (args.batch) tc.batch_n = args.batch;
  if (args.patch) tc.patch = args.patch;
  if (args.lr > 0) tc.lr_init = args.lr;
  if (!depth_given) mc.depth_d = (mc.scale == 8) ? 5 : 10;
  mc.validate();
  tc.validate();

  std::vector<ImageBuffer> corpus;
  for (const auto& path : list_images(args.data_dir)) {
    try {
      corpus.push_back(load_image(path));
    } catch (const IoError& e) {
      std::cerr << "warning: " << e.what() << "\n";
    }
  }
  // Pre-filter so the sampler's eligibility pass cannot leave us with nothing.
  std::erase_if(corpus, [&](const ImageBuffer& img) {
    const int worst = std::min(int(std::llround(0.5 * img.h)), int(std::llround(0.5 * img.w)));
    if (worst < tc.patch) {
      std::cerr << "warning: skipping corpus image smaller than " << 2 * tc.patch << "x"
                << 2 * tc.patch << "\n";
      return true;
    }
    return false;
  });
  if (corpus.empty())
    throw IoError("no usable training images in '" + args.data_dir + "' for patch size " +
                  std::to_string(tc.patch));

  fs::create_directories(args.out_dir);
  std::ofstream csv(fs::path(args.out_dir) / "train.csv");
  if (!csv) throw IoError("cannot write train.csv under '" + args.out_dir + "'");
  csv << "epoch,iter,loss,lr,wall_ms\n";

  LapSRNModel<float> model = build_model<float>(mc, tc.seed);
  std::signal(SIGINT, handle_sigint);

  TrainHooks hooks;
  hooks.on_iteration = [&](const TrainLogRecord& r) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%d,%.10g,%.10g,%.3f", r.epoch, r.iter, r.loss, r.lr,
                  r.wall_ms);
    csv << line << "\n" << std::flush;
  };
  hooks.on_epoch_end = [&](int, int epochs_done) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%04d.lpsr", epochs_done);
    save_checkpoint(model, fs::path(args.out_dir) / name);
    std::cout << "epoch " << epochs_done << " done, checkpoint " << name << "\n";
  };
  hooks.interrupted = [] { return g_interrupted.load(); };

  const TrainResult result = train(model, corpus, tc, hooks);
  csv.flush();
  if (result.interrupted) {
    save_checkpoint(model, fs::path(args.out_dir) / "interrupt.lpsr");
    std::cout << "interrupted: wrote interrupt.lpsr after " << result.log.size()
              << " iterations\n";
    return kExitOk;
  }
  std::cout << "training complete: " << result.epochs_run << " epoch(s), " << result.log.size()
            << " iterations\n";
  return kExitOk;
}

struct SrArgs {
  std::string model_path, input, output;
  int scale = 0;
  bool all_scales = false;
};

int run_sr(const SrArgs& args) {
  const LapSRNModel<float> model = load_checkpoint(args.model_path);
  const int scale = args.scale ? args.scale : model.config.scale;

  std::vector<fs::path> inputs;
  if (fs::is_directory(args.input))
    inputs = list_images(args.input);
  else
    inputs.push_back(args.input);
  if (inputs.empty()) throw IoError("no input images found at '" + args.input + "'");
  fs::create_directories(args.output);

  std::vector<int> scales;
  if (args.all_scales) {
    for (int s = 2; s <= model.config.scale; s *= 2) scales.push_back(s);
    if (!model.config.use_pyramid) scales = {model.config.scale};
  } else {
    scales.push_back(scale);
  }

  for (const auto& in_path : inputs) {
    const ImageBuffer img = load_image(in_path);
    for (int s : scales) {
      const UpscaleFn up = model_upscaler(model, s);
      const ImageBuffer sr = super_resolve(img, up, s);
      const fs::path out_path =
          fs::path(args.output) / (in_path.stem().string() + "_x" + std::to_string(s) + ".png");
      save_image(sr, out_path);
      std::cout << out_path.string() << "\n";
    }
  }
  return kExitOk;
}

struct EvalArgs {
  std::string model_path, baseline, manifest, out_path;
  int scale = 0;
  int shave = -1;
  bool json = false, strict = false;
};

int run_eval(const EvalArgs& args) {
  if (args.model_path.empty() == args.baseline.empty())
    throw std::invalid_argument("eval: pass exactly one of --model or --baseline");
  if (!args.baseline.empty() && args.baseline != "bicubic")
    throw std::invalid_argument("eval: unknown baseline '" + args.baseline + "'");

  const std::vector<fs::path> images = read_manifest(args.manifest);
  LapSRNModel<float> model;
  UpscaleFn up;
  if (!args.baseline.empty()) {
    up = bicubic_upscaler();
  } else {
    model = load_checkpoint(args.model_path);
    up = model_upscaler(model, args.scale);
  }
  const EvalSummary summary =
      evaluate_dataset(up, images, args.scale, EvalProtocol{args.shave}, args.strict);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!args.out_path.empty()) {
    file.open(args.out_path);
    if (!file) throw IoError("cannot write '" + args.out_path + "'");
    out = &file;
  }
  if (args.json)
    write_eval_json(*out, summary);
  else
    write_eval_csv(*out, summary);
  if (!summary.complete) std::cerr << "warning: aggregate incomplete, images were skipped\n";
  return kExitOk;
}

struct DownsampleArgs {
  std::string input, output;
  int scale = 0;
};

int run_downsample(const DownsampleArgs& args) {
  const auto inputs = list_images(args.input);
  if (inputs.empty()) throw IoError("no images in '" + args.input + "'");
  fs::create_directories(args.output);
  for (const auto& in_path : inputs) {
    const ImageBuffer img = crop_to_multiple(load_image(in_path), args.scale);
    const ImageBuffer lr = bicubic_resize(img, img.h / args.scale, img.w / args.scale, true);
    const fs::path out_path = fs::path(args.output) / (in_path.stem().string() + ".png");
    save_image(lr, out_path);
    std::cout << out_path.string() << "\n";
  }
  return kExitOk;
}

int run_gradcheck(std::uint64_t seed, bool corrupt) {
  const auto results = run_gradcheck_suite(seed, corrupt);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-28s max_rel_err=%.3e  %s\n", r.name.c_str(), r.max_rel_err,
                r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  if (!all_pass) {
    for (const auto& r : results)
      if (!r.pass)
        std::printf("gradcheck FAILED: %s (max relative error %.3e, tolerance %.0e)\n",
                    r.name.c_str(), r.max_rel_err, kGradCheckTolerance);
    return kExitCheckFailure;
  }
  std::printf("gradcheck: all %zu checks passed\n", results.size());
  return kExitOk;
}

int run_info(const std::string& model_path) {
  const LapSRNModel<float> model = load_checkpoint(model_path);
  const LapSRNConfig& c = model.config;
  std::printf("scale = %d\n", c.scale);
  std::printf("levels = %d\n", c.levels());
  std::printf("depth_d = %d\n", c.depth_d);
  std::printf("channels = %d\n", c.channels);
  std::printf("lrelu_slope = %g\n", c.lrelu_slope);
  std::printf("use_pyramid = %s\n", c.use_pyramid ? "true" : "false");
  std::printf("use_residual = %s\n", c.use_residual ? "true" : "false");
  std::printf("loss_kind = %s\n", loss_kind_name(c.loss_kind).c_str());
  std::printf("charbonnier_eps = %g\n", c.charbonnier_eps);
  const auto layers = describe_architecture(c);
  std::printf("layers = %d\n", count_layers(c));
  for (const auto& l : layers)
    std::printf("  %-18s %-5s %3d->%-3d k%d s%d p%d %-6s %-6s <- %s\n", l.name.c_str(),
                l.kind.c_str(), l.in_channels, l.out_channels, l.kernel, l.stride, l.pad,
                l.has_bias ? "bias" : "nobias", l.activation.c_str(), l.input.c_str());
  std::printf("parameters = %zu\n", model.parameter_count());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplacian-pyramid super-resolution toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a directory of images");
  train_cmd->add_option("--config", train_args.config_path, "key = value config file");
  train_cmd->add_option("--data", train_args.data_dir, "training image directory")->required();
  train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();
  train_cmd->add_option("--scale", train_args.scale, "upscaling factor (2, 4, 8)");
  train_cmd->add_option("--depth", train_args.depth, "convs per pyramid level");
  train_cmd->add_option("--channels", train_args.channels, "feature channels");
  train_cmd->add_option("--loss", train_args.loss, "charbonnier | l2");
  train_cmd->add_flag("--no-residual", train_args.no_residual, "predict HR directly");
  train_cmd->add_flag("--no-pyramid", train_args.no_pyramid, "single-step upsampling");
  auto* seed_opt = train_cmd->add_option("--seed", train_args.seed, "RNG seed");
  train_cmd->add_option("--epochs", train_args.epochs, "max epochs");
  train_cmd->add_option("--iters", train_args.iters, "iterations per epoch");
  train_cmd->add_option("--batch", train_args.batch, "patches per batch");
  train_cmd->add_option("--patch", train_args.patch, "HR patch size");
  train_cmd->add_option("--lr", train_args.lr, "initial learning rate");

  SrArgs sr_args;
  auto* sr_cmd = app.add_subcommand("sr", "Super-resolve an image or directory of frames");
  sr_cmd->add_option("--model", sr_args.model_path, "checkpoint path")->required();
  sr_cmd->add_option("--input", sr_args.input, "image file or directory")->required();
  sr_cmd->add_option("--output", sr_args.output, "output directory")->required();
  sr_cmd->add_option("--scale", sr_args.scale, "requested scale (defaults to model scale)");
  sr_cmd->add_flag("--all-scales", sr_args.all_scales, "write every pyramid level");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate PSNR/SSIM over a manifest");
  eval_cmd->add_option("--model", eval_args.model_path, "checkpoint path");
  eval_cmd->add_option("--baseline", eval_args.baseline, "bicubic");
  eval_cmd->add_option("--manifest", eval_args.manifest, "manifest file")->required();
  eval_cmd->add_option("--scale", eval_args.scale, "scale factor")->required();
  eval_cmd->add_option("--shave", eval_args.shave, "border shave (default: scale)");
  eval_cmd->add_flag("--json", eval_args.json, "emit JSON instead of CSV");
  eval_cmd->add_flag("--strict", eval_args.strict, "fail on missing images");
  eval_cmd->add_option("--out", eval_args.out_path, "write results to file");

  DownsampleArgs down_args;
  auto* down_cmd = app.add_subcommand("downsample", "Bicubic-downscale a directory (dataset prep)");
  down_cmd->add_option("--input", down_args.input, "input directory")->required();
  down_cmd->add_option("--output", down_args.output, "output directory")->required();
  down_cmd->add_option("--scale", down_args.scale, "downscale factor")->required();

  std::uint64_t gc_seed = 1;
  bool gc_corrupt = false;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  gc_cmd->add_option("--seed", gc_seed, "RNG seed");
  gc_cmd->add_flag("--corrupt", gc_corrupt, "inject a backward-pass error (negative control)");

  std::string info_model;
  auto* info_cmd = app.add_subcommand("info", "Describe a checkpoint");
  info_cmd->add_option("--model", info_model, "checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  train_args.seed_set = seed_opt->count() > 0;

  try {
    if (train_cmd->parsed()) return run_train(train_args);
    if (sr_cmd->parsed()) return run_sr(sr_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (down_cmd->parsed()) return run_downsample(down_args);
    if (gc_cmd->parsed()) return run_gradcheck(gc_seed, gc_corrupt);
    if (info_cmd->parsed()) return run_info(info_model);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
