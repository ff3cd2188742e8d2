// Copyright (c) 2026 mammodet authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MAMMODET_TENSOR_HPP
#define MAMMODET_TENSOR_HPP

#include <cstddef>
#include <vector>

namespace mammodet {

// Dense row-major tensor of doubles, rank 1..4 with NCHW axis semantics.
// Value type: copy/move freely, no shared buffers, safe across threads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);

  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // rank-checked multi-index access
  double& at(int i0);
  double& at(int i0, int i1);
  double& at(int i0, int i1, int i2);
  double& at(int i0, int i1, int i2, int i3);
  double at(int i0) const;
  double at(int i0, int i1) const;
  double at(int i0, int i1, int i2) const;
  double at(int i0, int i1, int i2, int i3) const;

  void fill(double value);
  void zero() { fill(0.0); }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Real-valued pixel coordinate. row/col must be finite where an op says so.
struct Point2 {
  double row = 0.0;
  double col = 0.0;
};

// ---- elementwise / reduction suite ----

Tensor add(const Tensor& a, const Tensor& b);          // shape-checked
void add_inplace(Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor relu_grad(const Tensor& x);                     // 1 where x > 0 else 0
double sum_all(const Tensor& x);
double mean_all(const Tensor& x);
// sums a [C,H,W] map over the spatial axes into out[C]
void spatial_sum_chw(const Tensor& x, std::vector<double>& out);

// ---- bilinear sampling ----

// Samples a single-channel H x W map at fractional coordinates with the
// product-of-triangle-kernels weighting and zero padding outside the map.
// Throws std::invalid_argument for non-finite coordinates.
double bilinear_sample(const Tensor& x, Point2 p);

// Raw-pointer variant for inner loops (no validation).
double bilinear_sample_raw(const double* x, int height, int width, double row,
                           double col);

struct BilinearGrad {
  // corner contributions, <= 4 entries of (row, col, weight * upstream)
  int n = 0;
  int rows[4];
  int cols[4];
  double values[4];
  Point2 grad_p;  // upstream times d(sample)/d(row, col)
};

// Analytic backward of bilinear_sample. Coordinate derivatives use the
// right-sided limit at integer coordinates (floor-cell convention).
BilinearGrad bilinear_sample_grad(const Tensor& x, Point2 p, double upstream);
BilinearGrad bilinear_sample_grad_raw(const double* x, int height, int width,
                                      double row, double col, double upstream);

}  // namespace mammodet

#endif  // MAMMODET_TENSOR_HPP
