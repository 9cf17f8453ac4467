#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lapsr/model.hpp"
#include "lapsr/pyramid.hpp"

namespace lapsr {

struct TrainConfig {
  double lr_init = 1e-5;
  double lr_gamma = 0.5;
  int lr_step_epochs = 50;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int iters_per_epoch = 1000;
  int batch_n = 64;
  double lr_floor = 1e-6;
  std::uint64_t seed = 0;
  int max_epochs = 200;
  int patch = 128;
  double grad_clip = 0.0;       // global-norm clip, 0 disables
  bool loss_sum_reduction = false;  // fallback: per-level sum over pixels instead of mean

  void validate() const {
    if (!(lr_init > lr_floor) || !(lr_floor > 0))
      throw std::invalid_argument("train config: need lr_init > lr_floor > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw std::invalid_argument("train config: need 0 <= momentum < 1");
    if (!(lr_gamma > 0.0 && lr_gamma <= 1.0))
      throw std::invalid_argument("train config: need 0 < lr_gamma <= 1");
    if (lr_step_epochs < 1 || iters_per_epoch < 1 || batch_n < 1 || max_epochs < 1 || patch < 1)
      throw std::invalid_argument("train config: counts must be >= 1");
    if (grad_clip < 0) throw std::invalid_argument("train config: grad_clip must be >= 0");
  }
};

struct TrainLogRecord {
  int epoch = 0;
  int iter = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

inline double lr_schedule_unfloored(int epoch, const TrainConfig& cfg) {
  return cfg.lr_init * std::pow(cfg.lr_gamma, double(epoch / cfg.lr_step_epochs));
}

/// Staircase decay clamped at the floor; training stops once the unfloored
/// value drops below the floor.
inline double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
  return std::max(cfg.lr_floor, lr_schedule_unfloored(epoch, cfg));
}

inline bool lr_stop_reached(int epoch, const TrainConfig& cfg) {
  return lr_schedule_unfloored(epoch, cfg) < cfg.lr_floor;
}

template <typename T>
struct MultiScaleLoss {
  double value = 0.0;
  std::vector<Tensor4<T>> grads;
};

/// Deep-supervision objective: sum over levels of the per-level penalty, each
/// term mean-reduced (sum-reduced with the fallback switch).
template <typename T>
MultiScaleLoss<T> multiscale_loss(const MultiScaleOutput<T>& outputs,
                                  const std::vector<Tensor4<T>>& targets, LossKind kind,
                                  double charbonnier_eps, bool sum_reduction = false) {
  if (outputs.outputs.size() != targets.size())
    throw std::invalid_argument("multiscale_loss: " + std::to_string(outputs.outputs.size()) +
                                " outputs vs " + std::to_string(targets.size()) + " targets");
  MultiScaleLoss<T> total;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    LossResult<T> r = (kind == LossKind::charbonnier)
                          ? charbonnier_loss(outputs.outputs[s], targets[s],
                                             CharbonnierSpec{charbonnier_eps})
                          : l2_loss(outputs.outputs[s], targets[s]);
    if (sum_reduction) {
      // Per-sample pixel sum, batch mean: mean * (elements per sample).
      const double per_sample = double(targets[s].size()) / double(targets[s].shape().n);
      r.value *= per_sample;
      r.grad.array() *= T(per_sample);
    }
    total.value += r.value;
    total.grads.push_back(std::move(r.grad));
  }
  return total;
}

/// SGD with momentum and decoupled-by-name weight decay: parameters named
/// "*.b" (biases) are not decayed; everything else, including the
/// bilinear-initialized image upsamplers, is. Gradients are zeroed after the
/// step. A non-finite gradient aborts before any parameter is touched.
template <typename T>
void sgd_step(LapSRNModel<T>& model, const TrainConfig& cfg, double lr) {
  for (const auto& entry : model.params)
    if (!entry.param.grad.all_finite())
      throw NumericError("sgd_step: non-finite gradient in parameter '" + entry.name + "'");

  double clip_factor = 1.0;
  if (cfg.grad_clip > 0) {
    double sq = 0.0;
    for (const auto& entry : model.params) {
      const auto g = entry.param.grad.array();
      sq += double((g.template cast<double>() * g.template cast<double>()).sum());
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) clip_factor = cfg.grad_clip / norm;
  }

  for (auto& entry : model.params) {
    const bool is_bias = entry.name.size() >= 2 &&
                         entry.name.compare(entry.name.size() - 2, 2, ".b") == 0;
    Parameter<T>& p = entry.param;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = double(p.grad[i]) * clip_factor;
      if (!is_bias) g += cfg.weight_decay * double(p.value[i]);
      const double m = cfg.momentum * double(p.momentum[i]) + g;
      p.momentum[i] = T(m);
      p.value[i] = T(double(p.value[i]) - lr * m);
    }
    p.zero_grad();
  }
}

struct TrainHooks {
  std::function<void(const TrainLogRecord&)> on_iteration;
  std::function<void(int epoch, int epochs_done)> on_epoch_end;  // called after checkpointable state
  std::function<bool()> interrupted;
};

struct TrainResult {
  std::vector<TrainLogRecord> log;
  int epochs_run = 0;
  bool interrupted = false;
};

/// Epoch loop: sample -> forward -> deep-supervised loss -> backward -> SGD.
/// Deterministic given seed and thread cap. Stops at the lr floor or the
/// epoch cap; the interrupted hook is polled once per iteration.
template <typename T>
TrainResult train(LapSRNModel<T>& model, const std::vector<ImageBuffer>& corpus,
                  const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  model.config.validate();
  PatchSampler sampler(corpus, SampleConfig{cfg.batch_n, cfg.patch, model.config.scale});
  Rng rng(cfg.seed);
  TrainResult result;

  for (int epoch = 0; epoch < cfg.max_epochs && !lr_stop_reached(epoch, cfg); ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    for (int iter = 1; iter <= cfg.iters_per_epoch; ++iter) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainBatch<T> batch = sampler.sample<T>(rng);
      ForwardWorkspace<T> ws;
      MultiScaleOutput<T> out = forward(model, batch.lr, 0, &ws);
      MultiScaleLoss<T> loss = multiscale_loss(out, batch.targets, model.config.loss_kind,
                                               model.config.charbonnier_eps,
                                               cfg.loss_sum_reduction);
      if (!std::isfinite(loss.value))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           " iter " + std::to_string(iter));
      backward(model, ws, loss.grads);
      sgd_step(model, cfg, lr);
      const auto t1 = std::chrono::steady_clock::now();
      TrainLogRecord rec{epoch, iter, loss.value, lr,
                         std::chrono::duration<double, std::milli>(t1 - t0).count()};
      result.log.push_back(rec);
      if (hooks.on_iteration) hooks.on_iteration(rec);
      if (hooks.interrupted && hooks.interrupted()) {
        result.interrupted = true;
        return result;
      }
    }
    ++result.epochs_run;
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, result.epochs_run);
  }
  return result;
}

}  // namespace lapsr
