// Dense row-major tensor, templated on scalar. The one numeric carrier for
// activations, parameters and gradients.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "mdt/common.hpp"

namespace mdt {

template <typename Scalar>
struct Tensor {
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<int> shape;
  std::vector<Scalar> data;  // row-major, size == prod(shape)

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    for (int e : shape)
      if (e <= 0) throw DimensionError("tensor extents must be positive");
    data.assign(numel_of(shape), Scalar(0));
  }

  Tensor(std::initializer_list<int> s) : Tensor(std::vector<int>(s)) {}

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int e : s) n *= static_cast<std::size_t>(e);
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int extent(int d) const { return shape[static_cast<std::size_t>(d)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  Scalar* ptr() { return data.data(); }
  const Scalar* ptr() const { return data.data(); }

  Scalar& operator[](std::size_t i) { return data[i]; }
  Scalar operator[](std::size_t i) const { return data[i]; }

  Scalar& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
  Scalar operator()(int i) const { return data[static_cast<std::size_t>(i)]; }

  Scalar& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  Scalar operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

  Scalar& operator()(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  Scalar operator()(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  Scalar& operator()(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  Scalar operator()(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  void fill(Scalar v) { std::fill(data.begin(), data.end(), v); }
  void set_zero() { fill(Scalar(0)); }

  /// Same data viewed under a new shape; element count must match.
  Tensor reshaped(std::vector<int> s) const {
    if (numel_of(s) != numel()) throw DimensionError("reshape changes element count");
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  bool all_finite() const {
    for (Scalar v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  /// Map onto an Eigen row-major matrix of the given dimensions.
  Eigen::Map<MatrixType> mat(int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != numel()) throw DimensionError("matrix view size mismatch");
    return Eigen::Map<MatrixType>(data.data(), rows, cols);
  }
  Eigen::Map<const MatrixType> mat(int rows, int cols) const {
    if (static_cast<std::size_t>(rows) * cols != numel()) throw DimensionError("matrix view size mismatch");
    return Eigen::Map<const MatrixType>(data.data(), rows, cols);
  }

  Eigen::Map<VectorType> vec() { return Eigen::Map<VectorType>(data.data(), static_cast<Eigen::Index>(numel())); }
  Eigen::Map<const VectorType> vec() const {
    return Eigen::Map<const VectorType>(data.data(), static_cast<Eigen::Index>(numel()));
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

  static Tensor full(std::vector<int> s, Scalar v) {
    Tensor t(std::move(s));
    t.fill(v);
    return t;
  }

  static Tensor random_uniform(std::vector<int> s, Rng& rng, Scalar lo = Scalar(-1), Scalar hi = Scalar(1)) {
    Tensor t(std::move(s));
    for (auto& v : t.data) v = static_cast<Scalar>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }
};

using Tensord = Tensor<double>;
using Tensorf = Tensor<float>;

template <typename Scalar>
void check_finite(const Tensor<Scalar>& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + " contains non-finite values");
}

}  // namespace mdt
