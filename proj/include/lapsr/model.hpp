#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lapsr/layers.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor.hpp"

namespace lapsr {

enum class LossKind { charbonnier, l2 };

inline std::string loss_kind_name(LossKind k) {
  return k == LossKind::charbonnier ? "charbonnier" : "l2";
}
inline LossKind loss_kind_from_name(const std::string& s) {
  if (s == "charbonnier") return LossKind::charbonnier;
  if (s == "l2") return LossKind::l2;
  throw std::invalid_argument("loss_kind: expected 'charbonnier' or 'l2', got '" + s + "'");
}

/// Architecture descriptor. In pyramid mode the network runs log2(scale)
/// levels of depth_d feature convs plus one 2x transposed-conv upsampler per
/// branch; with use_pyramid off a single level upsamples by the full scale in
/// one step (kernel 2S, stride S, pad S/2).
struct LapSRNConfig {
  int scale = 4;
  int depth_d = 10;
  int channels = 64;
  double lrelu_slope = 0.2;
  bool use_pyramid = true;
  bool use_residual = true;
  LossKind loss_kind = LossKind::charbonnier;
  double charbonnier_eps = 1e-3;

  int levels() const {
    if (!use_pyramid) return 1;
    int l = 0, s = scale;
    while (s > 1) {
      s /= 2;
      ++l;
    }
    return l;
  }

  void validate() const {
    if (scale != 2 && scale != 4 && scale != 8)
      throw std::invalid_argument("config.scale: must be one of {2, 4, 8}, got " +
                                  std::to_string(scale));
    if (use_pyramid && (1 << levels()) != scale)
      throw std::invalid_argument("config.scale: not a power of two");
    if (depth_d < 1)
      throw std::invalid_argument("config.depth_d: must be >= 1, got " + std::to_string(depth_d));
    if (channels < 1)
      throw std::invalid_argument("config.channels: must be >= 1, got " +
                                  std::to_string(channels));
    if (!std::isfinite(lrelu_slope))
      throw std::invalid_argument("config.lrelu_slope: must be finite");
    if (!(charbonnier_eps > 0))
      throw std::invalid_argument("config.charbonnier_eps: must be > 0");
  }

  /// Paper-default depth per scale: d = 10 for 2x/4x, d = 5 for 8x.
  static LapSRNConfig for_scale(int s) {
    LapSRNConfig c;
    c.scale = s;
    c.depth_d = (s == 8) ? 5 : 10;
    c.validate();
    return c;
  }
};

/// Number of weight-bearing layers (convs + transposed convs).
/// Pyramid: levels*(depth_d+3) + 1 (27 for scale 4, d = 10);
/// no-pyramid: depth_d + 1 plus the residual/image heads.
inline int count_layers(const LapSRNConfig& cfg) {
  cfg.validate();
  const int heads = cfg.use_residual ? 2 : 1;  // residual conv + image upsampler
  if (cfg.use_pyramid) return cfg.levels() * (cfg.depth_d + 1 + heads) + 1;
  return cfg.depth_d + 1 + heads;
}

template <typename T>
struct NamedParam {
  std::string name;
  Parameter<T> param;
};

/// One prediction per pyramid level, coarse to fine; level s is 2^s x input.
template <typename T>
struct MultiScaleOutput {
  std::vector<Tensor4<T>> outputs;
};

template <typename T>
class LapSRNModel {
 public:
  struct LevelIndex {
    std::vector<int> conv_w, conv_b;
    int feat_up_w = -1;
    int res_w = -1, res_b = -1;
    int img_up_w = -1;
  };

  LapSRNConfig config;
  std::vector<NamedParam<T>> params;
  int embed_w = -1, embed_b = -1;
  std::vector<LevelIndex> levels;

  Parameter<T>& param(int idx) { return params[std::size_t(idx)].param; }
  const Parameter<T>& param(int idx) const { return params[std::size_t(idx)].param; }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) return int(i);
    return -1;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.param.value.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params) p.param.zero_grad();
  }

  ConvSpec conv_spec(int in_c, int out_c) const { return {in_c, out_c, 3, 1, 1}; }
  ConvSpec feat_up_spec() const {
    const int f = config.use_pyramid ? 2 : config.scale;
    return {config.channels, config.channels, 2 * f, f, f / 2};
  }
  ConvSpec img_up_spec() const {
    const int f = config.use_pyramid ? 2 : config.scale;
    return {1, 1, 2 * f, f, f / 2};
  }
};

namespace detail {

template <typename T>
Tensor4<T> he_tensor(Shape4 s, int fan_in, Rng& rng) {
  Tensor4<T> t(s);
  const double stddev = std::sqrt(2.0 / double(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = T(rng.normal() * stddev);
  return t;
}

template <typename T>
int push_param(LapSRNModel<T>& m, const std::string& name, Tensor4<T> value) {
  m.params.push_back({name, Parameter<T>(std::move(value))});
  return int(m.params.size()) - 1;
}

}  // namespace detail

/// He-initialized convs (std = sqrt(2/fan_in), fan_in = k*k*in_c), zero biases,
/// bilinear-initialized image-branch upsamplers. Deterministic given seed.
template <typename T>
LapSRNModel<T> build_model(const LapSRNConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  LapSRNModel<T> m;
  m.config = cfg;
  Rng rng(seed);
  const int ch = cfg.channels;

  auto he_conv = [&](const std::string& name, int in_c, int out_c, int k) {
    const int w = detail::push_param(
        m, name + ".w", detail::he_tensor<T>({out_c, in_c, k, k}, k * k * in_c, rng));
    const int b = detail::push_param(m, name + ".b", Tensor4<T>(Shape4{out_c, 1, 1, 1}));
    return std::pair<int, int>{w, b};
  };
  auto he_tconv = [&](const std::string& name, int c, int k) {
    return detail::push_param(m, name + ".w",
                              detail::he_tensor<T>({c, c, k, k}, k * k * c, rng));
  };

  if (cfg.use_pyramid) {
    std::tie(m.embed_w, m.embed_b) = he_conv("embed", 1, ch, 3);
    const int up_k = 4, up_f = 2;
    for (int s = 1; s <= cfg.levels(); ++s) {
      typename LapSRNModel<T>::LevelIndex li;
      const std::string prefix = "level" + std::to_string(s) + ".";
      for (int j = 0; j < cfg.depth_d; ++j) {
        auto [w, b] = he_conv(prefix + "conv" + std::to_string(j), ch, ch, 3);
        li.conv_w.push_back(w);
        li.conv_b.push_back(b);
      }
      li.feat_up_w = he_tconv(prefix + "feat_up", ch, up_k);
      std::tie(li.res_w, li.res_b) = he_conv(prefix + "res", ch, 1, 3);
      if (cfg.use_residual)
        li.img_up_w =
            detail::push_param(m, prefix + "img_up.w", bilinear_kernel<T>(up_k, up_f, 1));
      m.levels.push_back(std::move(li));
    }
  } else {
    typename LapSRNModel<T>::LevelIndex li;
    for (int j = 0; j < cfg.depth_d; ++j) {
      auto [w, b] = he_conv("conv" + std::to_string(j), j == 0 ? 1 : ch, ch, 3);
      li.conv_w.push_back(w);
      li.conv_b.push_back(b);
    }
    const int k = 2 * cfg.scale;
    li.feat_up_w = he_tconv("feat_up", ch, k);
    std::tie(li.res_w, li.res_b) = he_conv("res", ch, 1, 3);
    if (cfg.use_residual)
      li.img_up_w = detail::push_param(m, "img_up.w", bilinear_kernel<T>(k, cfg.scale, 1));
    m.levels.push_back(std::move(li));
  }
  return m;
}

/// Post-activation tensors cached by a training forward pass; positions the
/// backward pass reads from. Outputs double as the image-branch chain.
template <typename T>
struct ForwardWorkspace {
  Tensor4<T> input;
  Tensor4<T> embed_post;
  std::vector<std::vector<Tensor4<T>>> conv_post;  // [level][j]
  std::vector<Tensor4<T>> feat_post;               // [level]
  std::vector<Tensor4<T>> outputs;                 // [level]
  int levels_run = 0;
};

namespace detail {

template <typename T>
std::span<const T> bias_span(const LapSRNModel<T>& m, int idx) {
  const Tensor4<T>& b = m.param(idx).value;
  return {b.data(), b.size()};
}

}  // namespace detail

/// Runs levels 1..max_level (0 = all). Truncation computes exactly the same
/// tensors as the prefix of a full pass, so an 8x model serves 2x and 4x
/// requests by stopping early.
template <typename T>
MultiScaleOutput<T> forward(const LapSRNModel<T>& m, const Tensor4<T>& lr_image,
                            int max_level = 0, ForwardWorkspace<T>* ws = nullptr) {
  if (lr_image.shape().c != 1)
    throw std::invalid_argument("forward: expected single-channel input, got " +
                                std::to_string(lr_image.shape().c) + " channels");
  if (lr_image.shape().h < 3 || lr_image.shape().w < 3)
    throw std::invalid_argument("forward: input spatial dims must be >= 3, got " +
                                lr_image.shape().str());
  const LapSRNConfig& cfg = m.config;
  const int total_levels = cfg.levels();
  const int run = (max_level <= 0) ? total_levels : std::min(max_level, total_levels);
  const double slope = cfg.lrelu_slope;

  if (ws) {
    ws->input = lr_image;
    ws->conv_post.assign(std::size_t(run), {});
    ws->feat_post.assign(std::size_t(run), Tensor4<T>());
    ws->outputs.assign(std::size_t(run), Tensor4<T>());
    ws->levels_run = run;
  }

  MultiScaleOutput<T> out;
  Tensor4<T> feat;
  if (cfg.use_pyramid) {
    feat = leaky_relu(conv2d(lr_image, m.param(m.embed_w).value, detail::bias_span(m, m.embed_b),
                             m.conv_spec(1, cfg.channels)),
                      slope);
    if (ws) ws->embed_post = feat;
  } else {
    feat = lr_image;
  }

  Tensor4<T> image = lr_image;
  for (int s = 0; s < run; ++s) {
    const auto& li = m.levels[std::size_t(s)];
    Tensor4<T> h = std::move(feat);
    for (int j = 0; j < cfg.depth_d; ++j) {
      const int in_c = (!cfg.use_pyramid && j == 0) ? 1 : cfg.channels;
      h = leaky_relu(conv2d(h, m.param(li.conv_w[std::size_t(j)]).value,
                            detail::bias_span(m, li.conv_b[std::size_t(j)]),
                            m.conv_spec(in_c, cfg.channels)),
                     slope);
      if (ws) ws->conv_post[std::size_t(s)].push_back(h);
    }
    feat = leaky_relu(transposed_conv2d(h, m.param(li.feat_up_w).value, m.feat_up_spec()), slope);
    if (ws) ws->feat_post[std::size_t(s)] = feat;

    Tensor4<T> residual = conv2d(feat, m.param(li.res_w).value, detail::bias_span(m, li.res_b),
                                 m.conv_spec(cfg.channels, 1));
    Tensor4<T> y;
    if (cfg.use_residual) {
      Tensor4<T> upscaled = transposed_conv2d(image, m.param(li.img_up_w).value, m.img_up_spec());
      y = elementwise_add(upscaled, residual);
    } else {
      y = std::move(residual);
    }
    if (ws) ws->outputs[std::size_t(s)] = y;
    image = y;
    out.outputs.push_back(std::move(y));
  }
  return out;
}

/// Accumulates parameter gradients for the cached forward pass given one
/// upstream gradient per produced level; returns the gradient w.r.t. the input
/// image (embedding branch + level-1 image branch combined).
template <typename T>
Tensor4<T> backward(LapSRNModel<T>& m, const ForwardWorkspace<T>& ws,
                    const std::vector<Tensor4<T>>& output_grads) {
  const LapSRNConfig& cfg = m.config;
  const int run = ws.levels_run;
  if (int(output_grads.size()) != run)
    throw std::invalid_argument("backward: expected " + std::to_string(run) +
                                " output gradients, got " + std::to_string(output_grads.size()));
  const double slope = cfg.lrelu_slope;

  auto add_into = [](Tensor4<T>& acc, const Tensor4<T>& g) {
    if (acc.empty())
      acc = g;
    else
      acc.array() += g.array();
  };
  auto accumulate_param = [&](int idx, const Tensor4<T>& g) {
    m.param(idx).grad.array() += g.array();
  };

  Tensor4<T> d_image_next;  // gradient flowing into y_{s} from level s+1's image branch
  Tensor4<T> d_feat_next;   // gradient flowing into feat_post[s] from level s+1's conv stack
  Tensor4<T> d_input;       // gradient w.r.t. the network input

  for (int s = run - 1; s >= 0; --s) {
    const auto& li = m.levels[std::size_t(s)];
    Tensor4<T> dy = output_grads[std::size_t(s)];
    if (!d_image_next.empty()) dy.array() += d_image_next.array();
    d_image_next = Tensor4<T>();

    // y_s = img_up(prev image) + residual, or just the residual head.
    Tensor4<T> d_residual = dy;
    if (cfg.use_residual) {
      const Tensor4<T>& img_in = (s == 0) ? ws.input : ws.outputs[std::size_t(s - 1)];
      auto g = transposed_conv2d_backward(img_in, m.param(li.img_up_w).value, m.img_up_spec(), dy);
      accumulate_param(li.img_up_w, g.weights);
      if (s == 0)
        add_into(d_input, g.input);
      else
        d_image_next = std::move(g.input);
    }

    // residual head
    Tensor4<T> d_feat;
    {
      auto g = conv2d_backward(ws.feat_post[std::size_t(s)], m.param(li.res_w).value,
                               m.conv_spec(cfg.channels, 1), d_residual);
      accumulate_param(li.res_w, g.weights);
      Tensor4<T>& bgrad = m.param(li.res_b).grad;
      for (std::size_t i = 0; i < bgrad.size(); ++i) bgrad[i] += g.bias[i];
      d_feat = std::move(g.input);
    }
    if (!d_feat_next.empty()) d_feat.array() += d_feat_next.array();
    d_feat_next = Tensor4<T>();

    // feature upsampler
    Tensor4<T> d_h;
    {
      Tensor4<T> d_pre = leaky_relu_backward(ws.feat_post[std::size_t(s)], d_feat, slope);
      const Tensor4<T>& up_in = ws.conv_post[std::size_t(s)].back();
      auto g = transposed_conv2d_backward(up_in, m.param(li.feat_up_w).value, m.feat_up_spec(),
                                          d_pre);
      accumulate_param(li.feat_up_w, g.weights);
      d_h = std::move(g.input);
    }

    // conv stack, deepest first
    for (int j = cfg.depth_d - 1; j >= 0; --j) {
      const int in_c = (!cfg.use_pyramid && j == 0) ? 1 : cfg.channels;
      Tensor4<T> d_pre =
          leaky_relu_backward(ws.conv_post[std::size_t(s)][std::size_t(j)], d_h, slope);
      const Tensor4<T>* conv_in;
      if (j > 0)
        conv_in = &ws.conv_post[std::size_t(s)][std::size_t(j - 1)];
      else if (s > 0)
        conv_in = &ws.feat_post[std::size_t(s - 1)];
      else
        conv_in = cfg.use_pyramid ? &ws.embed_post : &ws.input;
      auto g = conv2d_backward(*conv_in, m.param(li.conv_w[std::size_t(j)]).value,
                               m.conv_spec(in_c, cfg.channels), d_pre);
      accumulate_param(li.conv_w[std::size_t(j)], g.weights);
      Tensor4<T>& bgrad = m.param(li.conv_b[std::size_t(j)]).grad;
      for (std::size_t i = 0; i < bgrad.size(); ++i) bgrad[i] += g.bias[i];
      d_h = std::move(g.input);
    }

    if (s > 0)
      d_feat_next = std::move(d_h);
    else if (cfg.use_pyramid) {
      Tensor4<T> d_pre = leaky_relu_backward(ws.embed_post, d_h, slope);
      auto g = conv2d_backward(ws.input, m.param(m.embed_w).value, m.conv_spec(1, cfg.channels),
                               d_pre);
      accumulate_param(m.embed_w, g.weights);
      Tensor4<T>& bgrad = m.param(m.embed_b).grad;
      for (std::size_t i = 0; i < bgrad.size(); ++i) bgrad[i] += g.bias[i];
      add_into(d_input, g.input);
    } else {
      add_into(d_input, d_h);
    }
  }
  if (d_input.empty()) d_input = Tensor4<T>(ws.input.shape());
  return d_input;
}

/// Flat wiring description, one entry per weight layer; used by `info` and
/// by structural tests of the ablation variants.
struct LayerDesc {
  std::string name;
  std::string kind;        // "conv" | "tconv"
  int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, pad = 0;
  bool has_bias = false;
  std::string activation;  // "lrelu" | "none"
  std::string input;       // producing layer, "input" for the LR image
};

inline std::vector<LayerDesc> describe_architecture(const LapSRNConfig& cfg) {
  cfg.validate();
  std::vector<LayerDesc> out;
  const int ch = cfg.channels;
  const int up_f = cfg.use_pyramid ? 2 : cfg.scale;
  const int up_k = 2 * up_f;

  std::string feat_src = "input";
  if (cfg.use_pyramid) {
    out.push_back({"embed", "conv", 1, ch, 3, 1, 1, true, "lrelu", "input"});
    feat_src = "embed";
  }
  std::string img_src = "input";
  const int level_count = cfg.use_pyramid ? cfg.levels() : 1;
  for (int s = 1; s <= level_count; ++s) {
    const std::string prefix = cfg.use_pyramid ? "level" + std::to_string(s) + "." : "";
    for (int j = 0; j < cfg.depth_d; ++j) {
      const int in_c = (!cfg.use_pyramid && j == 0) ? 1 : ch;
      out.push_back({prefix + "conv" + std::to_string(j), "conv", in_c, ch, 3, 1, 1, true,
                     "lrelu", feat_src});
      feat_src = out.back().name;
    }
    out.push_back({prefix + "feat_up", "tconv", ch, ch, up_k, up_f, up_f / 2, false, "lrelu",
                   feat_src});
    feat_src = out.back().name;
    out.push_back({prefix + "res", "conv", ch, 1, 3, 1, 1, true, "none", feat_src});
    if (cfg.use_residual) {
      out.push_back({prefix + "img_up", "tconv", 1, 1, up_k, up_f, up_f / 2, false, "none",
                     img_src});
      img_src = prefix + "img_up + " + prefix + "res";
    } else {
      img_src = prefix + "res";
    }
  }
  return out;
}

}  // namespace lapsr
