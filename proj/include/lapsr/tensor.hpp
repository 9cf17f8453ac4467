#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lapsr {

/// Thrown when a numeric routine produces or receives non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape4 {
  int n = 0, c = 0, h = 0, w = 0;

  std::size_t count() const {
    return std::size_t(n) * std::size_t(c) * std::size_t(h) * std::size_t(w);
  }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

/// Dense rank-4 array in row-major N->C->H->W order. The universal value type
/// for activations, images and gradients. Scalar is double in gradient-check
/// builds and float in training/inference builds.
template <typename T>
class Tensor4 {
 public:
  using Scalar = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 s) : shape_(s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
      throw std::invalid_argument("Tensor4: shape components must be >= 1, got " + s.str());
    data_.assign(s.count(), T(0));
  }
  Tensor4(int n, int c, int h, int w) : Tensor4(Shape4{n, c, h, w}) {}

  static Tensor4 zeros(Shape4 s) { return Tensor4(s); }
  static Tensor4 full(Shape4 s, T v) {
    Tensor4 t(s);
    t.fill(v);
    return t;
  }

  const Shape4& shape() const { return shape_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  std::size_t index(int n, int c, int h, int w) const {
    return ((std::size_t(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  T at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  /// Flat Eigen view over all elements.
  auto array() {
    return Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(data_.data(), Eigen::Index(data_.size()));
  }
  auto array() const {
    return Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(data_.data(), Eigen::Index(data_.size()));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(T(0)); }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

/// A learnable tensor: value plus accumulated gradient and momentum buffer,
/// all of identical shape.
template <typename T>
class Parameter {
 public:
  Parameter() = default;
  explicit Parameter(Tensor4<T> v)
      : value(std::move(v)), grad(value.shape()), momentum(value.shape()) {}

  Tensor4<T> value, grad, momentum;

  void zero_grad() { grad.set_zero(); }
};

template <typename T>
Tensor4<T> elementwise_add(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!(a.shape() == b.shape()))
    throw std::invalid_argument("elementwise_add: shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  Tensor4<T> out(a.shape());
  out.array() = a.array() + b.array();
  return out;
}

/// Central-difference gradient of a scalar-valued function, elementwise:
/// out[i] = (f(x + h e_i) - f(x - h e_i)) / (2h). The oracle every analytic
/// backward pass is validated against; meaningful only in double precision.
template <typename T>
Tensor4<T> finite_difference_grad(const std::function<double(const Tensor4<T>&)>& f,
                                  const Tensor4<T>& x, double h) {
  if (!(h > 0)) throw std::invalid_argument("finite_difference_grad: step h must be > 0");
  Tensor4<T> grad(x.shape());
  Tensor4<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = probe[i];
    probe[i] = T(double(orig) + h);
    const double fp = f(probe);
    probe[i] = T(double(orig) - h);
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_difference_grad: non-finite function value");
    grad[i] = T((fp - fm) / (2.0 * h));
  }
  return grad;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)
template <typename T>
double grad_rel_error(const Tensor4<T>& analytic, const Tensor4<T>& numeric) {
  if (!(analytic.shape() == numeric.shape()))
    throw std::invalid_argument("grad_rel_error: shape mismatch " + analytic.shape().str() +
                                " vs " + numeric.shape().str());
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = double(analytic[i]), n = double(numeric[i]);
    const double denom = std::max({std::fabs(a), std::fabs(n), 1e-8});
    worst = std::max(worst, std::fabs(a - n) / denom);
  }
  return worst;
}

}  // namespace lapsr
