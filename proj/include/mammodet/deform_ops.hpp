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

#ifndef MAMMODET_DEFORM_OPS_HPP
#define MAMMODET_DEFORM_OPS_HPP

#include "mammodet/bbox.hpp"
#include "mammodet/tensor.hpp"

namespace mammodet {

// Weights [C_out, C_in, k_h, k_w] + bias [C_out]. Kernel extents must be odd
// so the tap grid is centered on the output location.
struct ConvParams {
  Tensor weights;
  Tensor bias;
  int stride = 1;
  int pad = 0;

  int out_channels() const { return weights.extent(0); }
  int in_channels() const { return weights.extent(1); }
  int kernel_h() const { return weights.extent(2); }
  int kernel_w() const { return weights.extent(3); }
};

// Per-output-location, per-tap (row, col) displacements in input pixels:
// offsets [2 * k_h * k_w, H_out, W_out], channel 2*t = row shift of tap t,
// channel 2*t + 1 = col shift. One deformable group: the field is shared
// across input channels.
struct OffsetField {
  Tensor offsets;
};

// ROI for position-sensitive pooling. The box lives in input-image pixels;
// `spatial_scale` arguments below map it onto the score-map grid. Bin
// offsets, when present, are [2, k, k] normalized displacements.
struct Roi {
  BBox box;
  int bins = 1;  // k: pooling grid is k x k
  bool has_offsets = false;
  Tensor offsets;
};

int conv_out_extent(int in, int kernel, int stride, int pad);

// Plain cross-correlation with zero padding (the zero-offset case of the
// deformable op). x is [C_in, H, W].
Tensor conv2d(const Tensor& x, const ConvParams& params);
void conv2d_backward(const Tensor& x, const ConvParams& params,
                     const Tensor& grad_y, Tensor* grad_x, Tensor* grad_w,
                     Tensor* grad_b);

// Deformable convolution: every tap samples x at its regular position plus
// its learned offset, through bilinear interpolation with zero padding.
Tensor deform_conv_forward(const Tensor& x, const ConvParams& params,
                           const OffsetField& off);
void deform_conv_backward(const Tensor& x, const ConvParams& params,
                          const OffsetField& off, const Tensor& grad_y,
                          Tensor* grad_x, Tensor* grad_w, Tensor* grad_b,
                          Tensor* grad_off);

// Position-sensitive ROI pooling over score maps [k^2 * C, H, W]. Channel
// layout is bank-major: channel = (i*k + j) * C + c for bin (i, j). Each bin
// averages a fixed 2x2 grid of bilinear samples at its quarter points.
// Returns [C, k, k]. Throws std::invalid_argument on non-positive ROI area
// or channel-count mismatch.
Tensor ps_roi_pool(const Tensor& score_maps, const Roi& roi, int class_banks,
                   double spatial_scale = 1.0);
void ps_roi_pool_backward(const Tensor& score_maps, const Roi& roi,
                          int class_banks, double spatial_scale,
                          const Tensor& grad_out, Tensor* grad_maps);

// Deformable variant: bin (i, j)'s sampling window is translated by
// offset_scale * (roi height, roi width) * roi.offsets[:, i, j], sizes taken
// on the score-map grid. Zero offsets reduce it to ps_roi_pool bit-for-bit.
Tensor deform_ps_roi_pool(const Tensor& score_maps, const Roi& roi,
                          int class_banks, double spatial_scale = 1.0,
                          double offset_scale = 0.1);
void deform_ps_roi_pool_backward(const Tensor& score_maps, const Roi& roi,
                                 int class_banks, double spatial_scale,
                                 double offset_scale, const Tensor& grad_out,
                                 Tensor* grad_maps, Tensor* grad_offsets);

// im2col support for the GEMM-backed convolution path. cols is
// [C_in * k_h * k_w, H_out * W_out].
void im2col(const Tensor& x, int kernel_h, int kernel_w, int stride, int pad,
            Tensor* cols);
void col2im(const Tensor& cols, int channels, int height, int width,
            int kernel_h, int kernel_w, int stride, int pad, Tensor* x);

}  // namespace mammodet

#endif  // MAMMODET_DEFORM_OPS_HPP
