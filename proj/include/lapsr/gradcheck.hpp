#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lapsr/layers.hpp"
#include "lapsr/model.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor.hpp"
#include "lapsr/trainer.hpp"

namespace lapsr {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

constexpr double kGradCheckStep = 1e-5;
constexpr double kGradCheckTolerance = 1e-4;

namespace detail {

inline Tensor4<double> random_tensor(Shape4 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4<double> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline double project(const Tensor4<double>& t, const Tensor4<double>& p) {
  return double((t.array().template cast<double>() * p.array().template cast<double>()).sum());
}

}  // namespace detail

/// End-to-end check: perturbs every parameter element (and the input) of a
/// model under the deep-supervised loss and compares against the analytic
/// gradients from one backward pass.
inline GradCheckResult gradcheck_model(LapSRNModel<double>& model, const Tensor4<double>& input,
                                       const std::vector<Tensor4<double>>& targets,
                                       double h = kGradCheckStep) {
  auto loss_value = [&]() {
    MultiScaleOutput<double> out = forward(model, input);
    return multiscale_loss(out, targets, model.config.loss_kind, model.config.charbonnier_eps)
        .value;
  };

  model.zero_grads();
  ForwardWorkspace<double> ws;
  MultiScaleOutput<double> out = forward(model, input, 0, &ws);
  MultiScaleLoss<double> loss =
      multiscale_loss(out, targets, model.config.loss_kind, model.config.charbonnier_eps);
  Tensor4<double> input_grad = backward(model, ws, loss.grads);

  GradCheckResult r{"model/end_to_end", 0.0, false};
  for (auto& entry : model.params) {
    Tensor4<double>& v = entry.param.value;
    Tensor4<double> numeric(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + h;
      const double fp = loss_value();
      v[i] = orig - h;
      const double fm = loss_value();
      v[i] = orig;
      numeric[i] = (fp - fm) / (2 * h);
    }
    r.max_rel_err = std::max(r.max_rel_err, grad_rel_error(entry.param.grad, numeric));
  }
  const Tensor4<double> numeric_input = finite_difference_grad<double>(
      [&](const Tensor4<double>& x) {
        MultiScaleOutput<double> o = forward(model, x);
        return multiscale_loss(o, targets, model.config.loss_kind, model.config.charbonnier_eps)
            .value;
      },
      input, h);
  r.max_rel_err = std::max(r.max_rel_err, grad_rel_error(input_grad, numeric_input));
  r.pass = r.max_rel_err < kGradCheckTolerance;
  return r;
}

/// The full finite-difference suite over every layer plus a small end-to-end
/// model, all in double. `corrupt` injects a deliberate error into the conv2d
/// weight gradient as a negative control.
inline std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, bool corrupt = false) {
  Rng rng(seed);
  const double h = kGradCheckStep;
  std::vector<GradCheckResult> results;
  auto record = [&](const std::string& name, double err) {
    results.push_back({name, err, err < kGradCheckTolerance});
  };

  {  // conv2d, kernel 3 stride 1 pad 1
    const ConvSpec spec{2, 3, 3, 1, 1};
    const Tensor4<double> x = detail::random_tensor({1, 2, 5, 5}, rng);
    const Tensor4<double> w = detail::random_tensor({3, 2, 3, 3}, rng);
    const Tensor4<double> b = detail::random_tensor({3, 1, 1, 1}, rng);
    const Tensor4<double> p = detail::random_tensor({1, 3, 5, 5}, rng);
    auto bias = [&] { return std::span<const double>(b.data(), b.size()); };
    ConvGrads<double> g = conv2d_backward(x, w, spec, p);
    if (corrupt) g.weights[0] += 1e-3;

    record("conv2d/input",
           grad_rel_error(g.input, finite_difference_grad<double>(
                                       [&](const Tensor4<double>& t) {
                                         return detail::project(conv2d(t, w, bias(), spec), p);
                                       },
                                       x, h)));
    record("conv2d/weights",
           grad_rel_error(g.weights, finite_difference_grad<double>(
                                         [&](const Tensor4<double>& t) {
                                           return detail::project(conv2d(x, t, bias(), spec), p);
                                         },
                                         w, h)));
    Tensor4<double> gb(Shape4{3, 1, 1, 1});
    for (int i = 0; i < 3; ++i) gb[std::size_t(i)] = g.bias[std::size_t(i)];
    record("conv2d/bias",
           grad_rel_error(gb, finite_difference_grad<double>(
                                  [&](const Tensor4<double>& t) {
                                    return detail::project(
                                        conv2d(x, w, std::span<const double>(t.data(), t.size()),
                                               spec),
                                        p);
                                  },
                                  b, h)));
  }

  {  // transposed conv, kernel 4 stride 2 pad 1
    const ConvSpec spec{2, 3, 4, 2, 1};
    const Tensor4<double> x = detail::random_tensor({1, 2, 4, 4}, rng);
    const Tensor4<double> w = detail::random_tensor({2, 3, 4, 4}, rng);
    const Tensor4<double> p = detail::random_tensor({1, 3, 8, 8}, rng);
    const TConvGrads<double> g = transposed_conv2d_backward(x, w, spec, p);
    record("transposed_conv2d/input",
           grad_rel_error(g.input, finite_difference_grad<double>(
                                       [&](const Tensor4<double>& t) {
                                         return detail::project(transposed_conv2d(t, w, spec), p);
                                       },
                                       x, h)));
    record("transposed_conv2d/weights",
           grad_rel_error(g.weights,
                          finite_difference_grad<double>(
                              [&](const Tensor4<double>& t) {
                                return detail::project(transposed_conv2d(x, t, spec), p);
                              },
                              w, h)));
  }

  {  // leaky relu, slope 0.2
    const double slope = 0.2;
    const Tensor4<double> x = detail::random_tensor({1, 2, 4, 4}, rng);
    const Tensor4<double> p = detail::random_tensor({1, 2, 4, 4}, rng);
    record("leaky_relu",
           grad_rel_error(leaky_relu_backward(x, p, slope),
                          finite_difference_grad<double>(
                              [&](const Tensor4<double>& t) {
                                return detail::project(leaky_relu(t, slope), p);
                              },
                              x, h)));
  }

  {  // elementwise addition: gradient passes unchanged to both inputs
    const Tensor4<double> a = detail::random_tensor({1, 1, 3, 3}, rng);
    const Tensor4<double> b = detail::random_tensor({1, 1, 3, 3}, rng);
    const Tensor4<double> p = detail::random_tensor({1, 1, 3, 3}, rng);
    record("elementwise_add",
           grad_rel_error(p, finite_difference_grad<double>(
                                 [&](const Tensor4<double>& t) {
                                   return detail::project(elementwise_add(t, b), p);
                                 },
                                 a, h)));
  }

  {  // losses
    const Tensor4<double> x = detail::random_tensor({1, 1, 4, 4}, rng);
    const Tensor4<double> target = detail::random_tensor({1, 1, 4, 4}, rng);
    const CharbonnierSpec cs{1e-3};
    record("charbonnier_loss",
           grad_rel_error(charbonnier_loss(x, target, cs).grad,
                          finite_difference_grad<double>(
                              [&](const Tensor4<double>& t) {
                                return charbonnier_loss(t, target, cs).value;
                              },
                              x, h)));
    record("l2_loss", grad_rel_error(l2_loss(x, target).grad,
                                     finite_difference_grad<double>(
                                         [&](const Tensor4<double>& t) {
                                           return l2_loss(t, target).value;
                                         },
                                         x, h)));
  }

  {  // end-to-end scale-2, d = 2 model (narrow channels keep this quick)
    LapSRNConfig cfg;
    cfg.scale = 2;
    cfg.depth_d = 2;
    cfg.channels = 8;
    LapSRNModel<double> model = build_model<double>(cfg, rng.raw());
    const Tensor4<double> input = detail::random_tensor({1, 1, 6, 6}, rng, 0.0, 1.0);
    std::vector<Tensor4<double>> targets{detail::random_tensor({1, 1, 12, 12}, rng, 0.0, 1.0)};
    results.push_back(gradcheck_model(model, input, targets, h));
  }
  return results;
}

}  // namespace lapsr
