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

#include "mammodet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mammodet/kernels.hpp"

namespace mammodet {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw std::invalid_argument("tensor: rank must be 1..4, got " +
                                std::to_string(shape.size()));
  }
  std::size_t n = 1;
  for (int e : shape) {
    if (e < 1) throw std::invalid_argument("tensor: extents must be >= 1");
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

void check_rank(const std::vector<int>& shape, int want) {
  if (static_cast<int>(shape.size()) != want) {
    throw std::invalid_argument("tensor: rank mismatch, have " +
                                std::to_string(shape.size()) + " want " +
                                std::to_string(want));
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(checked_numel(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size()) {
    throw std::invalid_argument("tensor: data length does not match shape");
  }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

double& Tensor::at(int i0) {
  check_rank(shape_, 1);
  return data_[static_cast<std::size_t>(i0)];
}
double& Tensor::at(int i0, int i1) {
  check_rank(shape_, 2);
  return data_[static_cast<std::size_t>(i0) * shape_[1] + i1];
}
double& Tensor::at(int i0, int i1, int i2) {
  check_rank(shape_, 3);
  return data_[(static_cast<std::size_t>(i0) * shape_[1] + i1) * shape_[2] + i2];
}
double& Tensor::at(int i0, int i1, int i2, int i3) {
  check_rank(shape_, 4);
  return data_[((static_cast<std::size_t>(i0) * shape_[1] + i1) * shape_[2] + i2) *
                   shape_[3] +
               i3];
}
double Tensor::at(int i0) const { return const_cast<Tensor*>(this)->at(i0); }
double Tensor::at(int i0, int i1) const {
  return const_cast<Tensor*>(this)->at(i0, i1);
}
double Tensor::at(int i0, int i1, int i2) const {
  return const_cast<Tensor*>(this)->at(i0, i1, i2);
}
double Tensor::at(int i0, int i1, int i2, int i3) const {
  return const_cast<Tensor*>(this)->at(i0, i1, i2, i3);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  kernels::active().axpy(a.numel(), 1.0, b.data(), a.data());
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = a;
  kernels::active().scale(out.numel(), s, out.data());
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  kernels::active().relu(x.numel(), x.data(), out.data());
  return out;
}

Tensor relu_grad(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

double sum_all(const Tensor& x) {
  return kernels::active().reduce_sum(x.numel(), x.data());
}

double mean_all(const Tensor& x) {
  return sum_all(x) / static_cast<double>(x.numel());
}

void spatial_sum_chw(const Tensor& x, std::vector<double>& out) {
  if (x.rank() != 3) throw std::invalid_argument("spatial_sum_chw: want rank 3");
  const int channels = x.extent(0);
  const std::size_t plane = static_cast<std::size_t>(x.extent(1)) * x.extent(2);
  out.assign(static_cast<std::size_t>(channels), 0.0);
  const auto& k = kernels::active();
  for (int c = 0; c < channels; ++c) {
    out[static_cast<std::size_t>(c)] = k.reduce_sum(plane, x.data() + c * plane);
  }
}

double bilinear_sample_raw(const double* x, int height, int width, double row,
                           double col) {
  if (row <= -1.0 || row >= static_cast<double>(height) || col <= -1.0 ||
      col >= static_cast<double>(width)) {
    return 0.0;
  }
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const int r1 = r0 + 1;
  const int c1 = c0 + 1;
  const double fr = row - r0;
  const double fc = col - c0;

  auto pick = [&](int r, int c) -> double {
    if (r < 0 || r >= height || c < 0 || c >= width) return 0.0;
    return x[static_cast<std::size_t>(r) * width + c];
  };

  const double v00 = pick(r0, c0);
  const double v01 = pick(r0, c1);
  const double v10 = pick(r1, c0);
  const double v11 = pick(r1, c1);
  return (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) +
         fr * ((1.0 - fc) * v10 + fc * v11);
}

double bilinear_sample(const Tensor& x, Point2 p) {
  if (x.rank() != 2) throw std::invalid_argument("bilinear_sample: want a 2-D map");
  if (!std::isfinite(p.row) || !std::isfinite(p.col)) {
    throw std::invalid_argument("bilinear_sample: non-finite coordinate");
  }
  return bilinear_sample_raw(x.data(), x.extent(0), x.extent(1), p.row, p.col);
}

BilinearGrad bilinear_sample_grad_raw(const double* x, int height, int width,
                                      double row, double col, double upstream) {
  BilinearGrad g;
  if (row <= -1.0 || row >= static_cast<double>(height) || col <= -1.0 ||
      col >= static_cast<double>(width)) {
    return g;
  }
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0;
  const double fc = col - c0;

  auto pick = [&](int r, int c) -> double {
    if (r < 0 || r >= height || c < 0 || c >= width) return 0.0;
    return x[static_cast<std::size_t>(r) * width + c];
  };

  const double v00 = pick(r0, c0);
  const double v01 = pick(r0, c0 + 1);
  const double v10 = pick(r0 + 1, c0);
  const double v11 = pick(r0 + 1, c0 + 1);

  const double wr[2] = {1.0 - fr, fr};
  const double wc[2] = {1.0 - fc, fc};
  for (int dr = 0; dr < 2; ++dr) {
    for (int dc = 0; dc < 2; ++dc) {
      const int r = r0 + dr;
      const int c = c0 + dc;
      if (r < 0 || r >= height || c < 0 || c >= width) continue;
      g.rows[g.n] = r;
      g.cols[g.n] = c;
      g.values[g.n] = upstream * wr[dr] * wc[dc];
      ++g.n;
    }
  }
  g.grad_p.row = upstream * ((1.0 - fc) * (v10 - v00) + fc * (v11 - v01));
  g.grad_p.col = upstream * ((1.0 - fr) * (v01 - v00) + fr * (v11 - v10));
  return g;
}

BilinearGrad bilinear_sample_grad(const Tensor& x, Point2 p, double upstream) {
  if (x.rank() != 2) throw std::invalid_argument("bilinear_sample_grad: want a 2-D map");
  if (!std::isfinite(p.row) || !std::isfinite(p.col)) {
    throw std::invalid_argument("bilinear_sample_grad: non-finite coordinate");
  }
  return bilinear_sample_grad_raw(x.data(), x.extent(0), x.extent(1), p.row,
                                  p.col, upstream);
}

}  // namespace mammodet
