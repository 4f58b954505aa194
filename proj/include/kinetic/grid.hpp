#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kinetic {

struct UniformAxis {
  double lo = 0.0;
  double hi = 1.0;
  int n = 2;  // node count, >= 1
  double step() const { return n > 1 ? (hi - lo) / (n - 1) : 0.0; }
  double node(int i) const { return n > 1 ? lo + (hi - lo) * i / (n - 1) : lo; }
};

// Tensor product of uniform axes, row-major with the last axis fastest.
class TensorGrid {
 public:
  TensorGrid() = default;
  explicit TensorGrid(std::vector<UniformAxis> axes);

  int rank() const { return static_cast<int>(axes_.size()); }
  size_t size() const { return size_; }
  const UniformAxis& axis(int k) const { return axes_[k]; }
  const std::vector<UniformAxis>& axes() const { return axes_; }

  void node(size_t flat, std::span<double> out) const;
  std::vector<double> node(size_t flat) const;
  size_t flat_index(std::span<const int> idx) const;
  void multi_index(size_t flat, std::span<int> idx) const;

 private:
  std::vector<UniformAxis> axes_;
  std::vector<size_t> strides_;
  size_t size_ = 0;
};

// Values with `components` entries per node; multilinear interpolation,
// clamped to the boundary outside the box.
class GridValues {
 public:
  GridValues() = default;
  GridValues(TensorGrid grid, int components);

  const TensorGrid& grid() const { return grid_; }
  int components() const { return components_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double& at(size_t flat, int c) { return data_[flat * components_ + c]; }
  double at(size_t flat, int c) const { return data_[flat * components_ + c]; }

  void interpolate(std::span<const double> x, std::span<double> out) const;
  double interpolate_component(std::span<const double> x, int c) const;

 private:
  TensorGrid grid_;
  int components_ = 1;
  std::vector<double> data_;
};

}  // namespace kinetic
