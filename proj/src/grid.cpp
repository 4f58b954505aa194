#include "kinetic/grid.hpp"

#include <algorithm>
#include <cmath>

#include "kinetic/errors.hpp"

namespace kinetic {

TensorGrid::TensorGrid(std::vector<UniformAxis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw ArgumentError("TensorGrid: at least one axis required");
  strides_.assign(axes_.size(), 1);
  size_ = 1;
  for (int k = rank() - 1; k >= 0; --k) {
    if (axes_[k].n < 1) throw ArgumentError("TensorGrid: axis needs >= 1 node");
    if (axes_[k].n > 1 && !(axes_[k].hi > axes_[k].lo)) throw ArgumentError("TensorGrid: empty axis range");
    strides_[k] = size_;
    size_ *= static_cast<size_t>(axes_[k].n);
  }
}

void TensorGrid::multi_index(size_t flat, std::span<int> idx) const {
  for (int k = 0; k < rank(); ++k) {
    idx[k] = static_cast<int>(flat / strides_[k]);
    flat %= strides_[k];
  }
}

void TensorGrid::node(size_t flat, std::span<double> out) const {
  for (int k = 0; k < rank(); ++k) {
    const int i = static_cast<int>(flat / strides_[k]);
    flat %= strides_[k];
    out[k] = axes_[k].node(i);
  }
}

std::vector<double> TensorGrid::node(size_t flat) const {
  std::vector<double> out(axes_.size());
  node(flat, out);
  return out;
}

size_t TensorGrid::flat_index(std::span<const int> idx) const {
  size_t f = 0;
  for (int k = 0; k < rank(); ++k) f += strides_[k] * static_cast<size_t>(idx[k]);
  return f;
}

GridValues::GridValues(TensorGrid grid, int components)
    : grid_(std::move(grid)), components_(components), data_(grid_.size() * components, 0.0) {
  if (components < 1) throw ArgumentError("GridValues: components must be >= 1");
}

void GridValues::interpolate(std::span<const double> x, std::span<double> out) const {
  const int r = grid_.rank();
  int base[16];
  double frac[16];
  if (r > 16) throw ArgumentError("GridValues: rank above 16 unsupported");
  size_t base_flat = 0;
  size_t stride[16];
  {
    size_t s = 1;
    for (int k = r - 1; k >= 0; --k) {
      stride[k] = s;
      s *= static_cast<size_t>(grid_.axis(k).n);
    }
  }
  for (int k = 0; k < r; ++k) {
    const UniformAxis& a = grid_.axis(k);
    if (a.n == 1) {
      base[k] = 0;
      frac[k] = 0.0;
      continue;
    }
    double u = (x[k] - a.lo) / a.step();
    u = std::clamp(u, 0.0, static_cast<double>(a.n - 1));
    int i = static_cast<int>(u);
    if (i >= a.n - 1) i = a.n - 2;
    base[k] = i;
    frac[k] = u - i;
  }
  for (int k = 0; k < r; ++k) base_flat += stride[k] * static_cast<size_t>(base[k]);
  for (int c = 0; c < components_; ++c) out[c] = 0.0;
  const int corners = 1 << r;
  for (int m = 0; m < corners; ++m) {
    double w = 1.0;
    size_t f = base_flat;
    bool skip = false;
    for (int k = 0; k < r; ++k) {
      const bool up = (m >> k) & 1;
      if (grid_.axis(k).n == 1) {
        if (up) {
          skip = true;
          break;
        }
        continue;
      }
      w *= up ? frac[k] : 1.0 - frac[k];
      if (up) f += stride[k];
    }
    if (skip || w == 0.0) continue;
    for (int c = 0; c < components_; ++c) out[c] += w * data_[f * components_ + c];
  }
}

double GridValues::interpolate_component(std::span<const double> x, int c) const {
  double buf[16];
  std::vector<double> heap;
  double* out = buf;
  if (components_ > 16) {
    heap.resize(components_);
    out = heap.data();
  }
  interpolate(x, {out, static_cast<size_t>(components_)});
  return out[c];
}

}  // namespace kinetic
