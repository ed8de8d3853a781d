#ifndef WEEDPILOT_NN_TENSOR_HPP
#define WEEDPILOT_NN_TENSOR_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "weedpilot/core.hpp"

namespace weedpilot::nn {

// Dense shape, rank 1..4. Activations are (N,C,H,W) or (N,F); parameters
// use whatever rank fits the op (conv weights are (OC,C,KH,KW)).
struct Shape {
  std::array<int, 4> d{0, 0, 0, 0};
  int rank = 0;

  static Shape of(int a) { return {{a, 0, 0, 0}, 1}; }
  static Shape of(int a, int b) { return {{a, b, 0, 0}, 2}; }
  static Shape of(int a, int b, int c) { return {{a, b, c, 0}, 3}; }
  static Shape of(int a, int b, int c, int e) { return {{a, b, c, e}, 4}; }

  long long numel() const {
    long long n = 1;
    for (int i = 0; i < rank; ++i) n *= d[i];
    return rank == 0 ? 0 : n;
  }

  bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < rank; ++i) s += (i ? "," : "") + std::to_string(d[i]);
    return s + ")";
  }
};

template <typename S>
class Tensor {
 public:
  using Scalar = S;
  template <int R, int C>
  using MapRM = Eigen::Map<Eigen::Matrix<S, R, C, Eigen::RowMajor>>;
  using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatMap =
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using VecMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
  using ConstVecMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(static_cast<std::size_t>(shape.numel()), S(0)) {}

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  static Tensor full(Shape shape, S v) {
    Tensor t(shape);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  long long size() const { return static_cast<long long>(data_.size()); }
  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& vec() { return data_; }
  const std::vector<S>& vec() const { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  S operator[](std::size_t i) const { return data_[i]; }

  // NCHW element access.
  S& at4(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_.d[1] + c) * shape_.d[2] + h) * shape_.d[3] + w];
  }
  S at4(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_.d[1] + c) * shape_.d[2] + h) * shape_.d[3] + w];
  }

  // Whole buffer viewed as a rows x cols row-major matrix.
  MatMap mat(long long rows, long long cols) {
    if (rows * cols != size()) throw Error("tensor view mismatch " + shape_.str());
    return MatMap(data_.data(), rows, cols);
  }
  ConstMatMap mat(long long rows, long long cols) const {
    if (rows * cols != size()) throw Error("tensor view mismatch " + shape_.str());
    return ConstMatMap(data_.data(), rows, cols);
  }
  VecMap array() { return VecMap(data_.data(), size()); }
  ConstVecMap array() const { return ConstVecMap(data_.data(), size()); }

  bool finite() const {
    for (S v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
    return out;
  }

 private:
  Shape shape_;
  std::vector<S> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace weedpilot::nn

#endif
