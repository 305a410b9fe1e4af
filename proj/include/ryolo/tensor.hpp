#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ryolo/error.hpp"

namespace ryolo {

struct Shape4 {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t size() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
  std::ostringstream os;
  os << "(" << s.n << ", " << s.c << ", " << s.h << ", " << s.w << ")";
  return os.str();
}

// Dense rank-4 array in row-major (n, c, h, w) order.
class Tensor4 {
 public:
  Tensor4() : Tensor4(Shape4{}) {}

  explicit Tensor4(Shape4 shape, double fill = 0.0) : shape_(shape) {
    require(shape.n >= 1 && shape.c >= 1 && shape.h >= 1 && shape.w >= 1,
            ErrorKind::InvalidArgument,
            "tensor dims must all be >= 1, got " + to_string(shape));
    data_.assign(shape.size(), fill);
  }

  Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
          double fill = 0.0)
      : Tensor4(Shape4{n, c, h, w}, fill) {}

  Tensor4(Shape4 shape, std::vector<double> values) : shape_(shape) {
    require(shape.n >= 1 && shape.c >= 1 && shape.h >= 1 && shape.w >= 1,
            ErrorKind::InvalidArgument,
            "tensor dims must all be >= 1, got " + to_string(shape));
    require(values.size() == shape.size(), ErrorKind::ShapeMismatch,
            "tensor data length " + std::to_string(values.size()) +
                " does not match dims " + to_string(shape));
    data_ = std::move(values);
  }

  const Shape4& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y,
                    std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  double& operator()(std::size_t n, std::size_t c, std::size_t y,
                     std::size_t x) {
    return data_[index(n, c, y, x)];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t y,
                    std::size_t x) const {
    return data_[index(n, c, y, x)];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double* plane(std::size_t n, std::size_t c) {
    return data_.data() + index(n, c, 0, 0);
  }
  const double* plane(std::size_t n, std::size_t c) const {
    return data_.data() + index(n, c, 0, 0);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

inline Tensor4 zeros_like(const Tensor4& t) { return Tensor4(t.shape()); }

inline double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  require(a.shape() == b.shape(), ErrorKind::ShapeMismatch,
          "max_abs_diff: " + to_string(a.shape()) + " vs " +
              to_string(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace ryolo
