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

#include "mammodet/deform_ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mammodet/kernels.hpp"

namespace mammodet {

namespace {

void check_conv_inputs(const Tensor& x, const ConvParams& params) {
  if (x.rank() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W]");
  if (params.weights.rank() != 4) {
    throw std::invalid_argument("conv2d: weights must be [C_out,C_in,k_h,k_w]");
  }
  if (params.bias.rank() != 1 || params.bias.extent(0) != params.out_channels()) {
    throw std::invalid_argument("conv2d: bias extent must equal C_out");
  }
  if (x.extent(0) != params.in_channels()) {
    throw std::invalid_argument(
        "conv2d: input has " + std::to_string(x.extent(0)) +
        " channels, weights expect " + std::to_string(params.in_channels()));
  }
  if (params.kernel_h() % 2 == 0 || params.kernel_w() % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel extents must be odd");
  }
  if (params.stride < 1 || params.pad < 0) {
    throw std::invalid_argument("conv2d: stride must be >= 1 and pad >= 0");
  }
  if (conv_out_extent(x.extent(1), params.kernel_h(), params.stride, params.pad) < 1 ||
      conv_out_extent(x.extent(2), params.kernel_w(), params.stride, params.pad) < 1) {
    throw std::invalid_argument("conv2d: output would be empty");
  }
}

void check_offsets(const Tensor& x, const ConvParams& params,
                   const OffsetField& off) {
  const int out_h = conv_out_extent(x.extent(1), params.kernel_h(), params.stride, params.pad);
  const int out_w = conv_out_extent(x.extent(2), params.kernel_w(), params.stride, params.pad);
  const int want_ch = 2 * params.kernel_h() * params.kernel_w();
  if (off.offsets.rank() != 3 || off.offsets.extent(0) != want_ch ||
      off.offsets.extent(1) != out_h || off.offsets.extent(2) != out_w) {
    throw std::invalid_argument("deform_conv: offset field shape mismatch");
  }
}

Tensor transpose2d(const double* a, int rows, int cols) {
  Tensor t({cols, rows});
  double* out = t.data();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(c) * rows + r] =
          a[static_cast<std::size_t>(r) * cols + c];
    }
  }
  return t;
}

// cols[(cin*kh + u)*kw + v, i*out_w + j] = bilinear sample of x[cin] at the
// tap position plus its offset. Corner geometry is computed once per
// (tap, location) and reused over input channels.
void deformable_im2col(const Tensor& x, const ConvParams& params,
                       const Tensor& offsets, Tensor* cols) {
  const int in_c = x.extent(0);
  const int height = x.extent(1);
  const int width = x.extent(2);
  const int kh = params.kernel_h();
  const int kw = params.kernel_w();
  const int out_h = conv_out_extent(height, kh, params.stride, params.pad);
  const int out_w = conv_out_extent(width, kw, params.stride, params.pad);
  const int taps = kh * kw;
  const std::size_t n_out = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t plane = static_cast<std::size_t>(height) * width;

  *cols = Tensor({in_c * taps, out_h * out_w});
  double* col_data = cols->data();
  const double* off_data = offsets.data();

  for (int t = 0; t < taps; ++t) {
    const int u = t / kw;
    const int v = t % kw;
    const double* off_r = off_data + static_cast<std::size_t>(2 * t) * n_out;
    const double* off_c = off_data + static_cast<std::size_t>(2 * t + 1) * n_out;
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) {
        const std::size_t n = static_cast<std::size_t>(i) * out_w + j;
        const double row = i * params.stride - params.pad + u + off_r[n];
        const double col = j * params.stride - params.pad + v + off_c[n];
        if (row <= -1.0 || row >= height || col <= -1.0 || col >= width) {
          for (int c = 0; c < in_c; ++c) {
            col_data[(static_cast<std::size_t>(c) * taps + t) * n_out + n] = 0.0;
          }
          continue;
        }
        const int r0 = static_cast<int>(std::floor(row));
        const int c0 = static_cast<int>(std::floor(col));
        const double fr = row - r0;
        const double fc = col - c0;
        const double w00 = (1.0 - fr) * (1.0 - fc);
        const double w01 = (1.0 - fr) * fc;
        const double w10 = fr * (1.0 - fc);
        const double w11 = fr * fc;
        const bool r0_in = r0 >= 0 && r0 < height;
        const bool r1_in = r0 + 1 >= 0 && r0 + 1 < height;
        const bool c0_in = c0 >= 0 && c0 < width;
        const bool c1_in = c0 + 1 >= 0 && c0 + 1 < width;
        const std::size_t base00 = static_cast<std::size_t>(r0) * width + c0;
        for (int c = 0; c < in_c; ++c) {
          const double* plane_x = x.data() + static_cast<std::size_t>(c) * plane;
          double acc = 0.0;
          if (r0_in && c0_in) acc += w00 * plane_x[base00];
          if (r0_in && c1_in) acc += w01 * plane_x[base00 + 1];
          if (r1_in && c0_in) acc += w10 * plane_x[base00 + width];
          if (r1_in && c1_in) acc += w11 * plane_x[base00 + width + 1];
          col_data[(static_cast<std::size_t>(c) * taps + t) * n_out + n] = acc;
        }
      }
    }
  }
}

}  // namespace

int conv_out_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

void im2col(const Tensor& x, int kernel_h, int kernel_w, int stride, int pad,
            Tensor* cols) {
  const int in_c = x.extent(0);
  const int height = x.extent(1);
  const int width = x.extent(2);
  const int out_h = conv_out_extent(height, kernel_h, stride, pad);
  const int out_w = conv_out_extent(width, kernel_w, stride, pad);
  const std::size_t n_out = static_cast<std::size_t>(out_h) * out_w;

  *cols = Tensor({in_c * kernel_h * kernel_w, out_h * out_w});
  double* col_data = cols->data();

  std::size_t q = 0;
  for (int c = 0; c < in_c; ++c) {
    const double* plane = x.data() + static_cast<std::size_t>(c) * height * width;
    for (int u = 0; u < kernel_h; ++u) {
      for (int v = 0; v < kernel_w; ++v, ++q) {
        double* dst = col_data + q * n_out;
        for (int i = 0; i < out_h; ++i) {
          const int in_r = i * stride - pad + u;
          double* row_dst = dst + static_cast<std::size_t>(i) * out_w;
          if (in_r < 0 || in_r >= height) {
            for (int j = 0; j < out_w; ++j) row_dst[j] = 0.0;
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(in_r) * width;
          for (int j = 0; j < out_w; ++j) {
            const int in_col = j * stride - pad + v;
            row_dst[j] = (in_col >= 0 && in_col < width) ? src[in_col] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const Tensor& cols, int channels, int height, int width,
            int kernel_h, int kernel_w, int stride, int pad, Tensor* x) {
  const int out_h = conv_out_extent(height, kernel_h, stride, pad);
  const int out_w = conv_out_extent(width, kernel_w, stride, pad);
  const std::size_t n_out = static_cast<std::size_t>(out_h) * out_w;
  if (x->rank() != 3 || x->extent(0) != channels || x->extent(1) != height ||
      x->extent(2) != width) {
    *x = Tensor({channels, height, width});
  }
  const double* col_data = cols.data();

  std::size_t q = 0;
  for (int c = 0; c < channels; ++c) {
    double* plane = x->data() + static_cast<std::size_t>(c) * height * width;
    for (int u = 0; u < kernel_h; ++u) {
      for (int v = 0; v < kernel_w; ++v, ++q) {
        const double* src = col_data + q * n_out;
        for (int i = 0; i < out_h; ++i) {
          const int in_r = i * stride - pad + u;
          if (in_r < 0 || in_r >= height) continue;
          double* row_dst = plane + static_cast<std::size_t>(in_r) * width;
          const double* row_src = src + static_cast<std::size_t>(i) * out_w;
          for (int j = 0; j < out_w; ++j) {
            const int in_col = j * stride - pad + v;
            if (in_col >= 0 && in_col < width) row_dst[in_col] += row_src[j];
          }
        }
      }
    }
  }
}

namespace {

Tensor conv_from_cols(const Tensor& cols, const ConvParams& params, int out_h,
                      int out_w) {
  const int c_out = params.out_channels();
  const int k_dim = cols.extent(0);
  const int n_out = cols.extent(1);
  Tensor y({c_out, out_h, out_w});
  kernels::active().gemm(c_out, n_out, k_dim, params.weights.data(), k_dim,
                         cols.data(), n_out, y.data(), n_out, false);
  for (int co = 0; co < c_out; ++co) {
    const double b = params.bias[static_cast<std::size_t>(co)];
    if (b == 0.0) continue;
    double* dst = y.data() + static_cast<std::size_t>(co) * n_out;
    for (int n = 0; n < n_out; ++n) dst[n] += b;
  }
  return y;
}

// shared tail of both convolution backwards: bias, weights, columns
Tensor conv_backward_common(const Tensor& cols, const ConvParams& params,
                            const Tensor& grad_y, Tensor* grad_w,
                            Tensor* grad_b) {
  const int c_out = params.out_channels();
  const int k_dim = cols.extent(0);
  const int n_out = cols.extent(1);
  const auto& k = kernels::active();

  if (grad_b != nullptr) {
    *grad_b = Tensor({c_out});
    for (int co = 0; co < c_out; ++co) {
      (*grad_b)[static_cast<std::size_t>(co)] = k.reduce_sum(
          static_cast<std::size_t>(n_out),
          grad_y.data() + static_cast<std::size_t>(co) * n_out);
    }
  }
  if (grad_w != nullptr) {
    Tensor cols_t = transpose2d(cols.data(), k_dim, n_out);
    *grad_w = Tensor(params.weights.shape());
    k.gemm(c_out, k_dim, n_out, grad_y.data(), n_out, cols_t.data(), k_dim,
           grad_w->data(), k_dim, false);
  }
  Tensor w_t = transpose2d(params.weights.data(), c_out, k_dim);
  Tensor grad_cols({k_dim, n_out});
  k.gemm(k_dim, n_out, c_out, w_t.data(), c_out, grad_y.data(), n_out,
         grad_cols.data(), n_out, false);
  return grad_cols;
}

}  // namespace

Tensor conv2d(const Tensor& x, const ConvParams& params) {
  check_conv_inputs(x, params);
  const int out_h = conv_out_extent(x.extent(1), params.kernel_h(), params.stride, params.pad);
  const int out_w = conv_out_extent(x.extent(2), params.kernel_w(), params.stride, params.pad);
  Tensor cols;
  im2col(x, params.kernel_h(), params.kernel_w(), params.stride, params.pad, &cols);
  return conv_from_cols(cols, params, out_h, out_w);
}

void conv2d_backward(const Tensor& x, const ConvParams& params,
                     const Tensor& grad_y, Tensor* grad_x, Tensor* grad_w,
                     Tensor* grad_b) {
  check_conv_inputs(x, params);
  const int out_h = conv_out_extent(x.extent(1), params.kernel_h(), params.stride, params.pad);
  const int out_w = conv_out_extent(x.extent(2), params.kernel_w(), params.stride, params.pad);
  if (grad_y.rank() != 3 || grad_y.extent(0) != params.out_channels() ||
      grad_y.extent(1) != out_h || grad_y.extent(2) != out_w) {
    throw std::invalid_argument("conv2d_backward: grad_y shape mismatch");
  }
  Tensor cols;
  im2col(x, params.kernel_h(), params.kernel_w(), params.stride, params.pad, &cols);
  Tensor grad_cols = conv_backward_common(cols, params, grad_y, grad_w, grad_b);
  if (grad_x != nullptr) {
    *grad_x = Tensor(x.shape());
    col2im(grad_cols, x.extent(0), x.extent(1), x.extent(2), params.kernel_h(),
           params.kernel_w(), params.stride, params.pad, grad_x);
  }
}

Tensor deform_conv_forward(const Tensor& x, const ConvParams& params,
                           const OffsetField& off) {
  check_conv_inputs(x, params);
  check_offsets(x, params, off);
  const int out_h = off.offsets.extent(1);
  const int out_w = off.offsets.extent(2);
  Tensor cols;
  deformable_im2col(x, params, off.offsets, &cols);
  return conv_from_cols(cols, params, out_h, out_w);
}

void deform_conv_backward(const Tensor& x, const ConvParams& params,
                          const OffsetField& off, const Tensor& grad_y,
                          Tensor* grad_x, Tensor* grad_w, Tensor* grad_b,
                          Tensor* grad_off) {
  check_conv_inputs(x, params);
  check_offsets(x, params, off);
  const int out_h = off.offsets.extent(1);
  const int out_w = off.offsets.extent(2);
  if (grad_y.rank() != 3 || grad_y.extent(0) != params.out_channels() ||
      grad_y.extent(1) != out_h || grad_y.extent(2) != out_w) {
    throw std::invalid_argument("deform_conv_backward: grad_y shape mismatch");
  }

  const int in_c = x.extent(0);
  const int height = x.extent(1);
  const int width = x.extent(2);
  const int kh = params.kernel_h();
  const int kw = params.kernel_w();
  const int taps = kh * kw;
  const std::size_t n_out = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t plane = static_cast<std::size_t>(height) * width;

  Tensor cols;
  deformable_im2col(x, params, off.offsets, &cols);
  Tensor grad_cols = conv_backward_common(cols, params, grad_y, grad_w, grad_b);

  if (grad_x == nullptr && grad_off == nullptr) return;
  if (grad_x != nullptr) *grad_x = Tensor(x.shape());
  if (grad_off != nullptr) *grad_off = Tensor(off.offsets.shape());

  const double* off_data = off.offsets.data();
  const double* gcol = grad_cols.data();
  for (int t = 0; t < taps; ++t) {
    const int u = t / kw;
    const int v = t % kw;
    const double* off_r = off_data + static_cast<std::size_t>(2 * t) * n_out;
    const double* off_c = off_data + static_cast<std::size_t>(2 * t + 1) * n_out;
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) {
        const std::size_t n = static_cast<std::size_t>(i) * out_w + j;
        const double row = i * params.stride - params.pad + u + off_r[n];
        const double col = j * params.stride - params.pad + v + off_c[n];
        if (row <= -1.0 || row >= height || col <= -1.0 || col >= width) continue;
        const int r0 = static_cast<int>(std::floor(row));
        const int c0 = static_cast<int>(std::floor(col));
        const double fr = row - r0;
        const double fc = col - c0;
        const bool r0_in = r0 >= 0 && r0 < height;
        const bool r1_in = r0 + 1 >= 0 && r0 + 1 < height;
        const bool c0_in = c0 >= 0 && c0 < width;
        const bool c1_in = c0 + 1 >= 0 && c0 + 1 < width;
        const std::size_t base00 = static_cast<std::size_t>(r0) * width + c0;

        double g_row = 0.0;
        double g_col = 0.0;
        for (int c = 0; c < in_c; ++c) {
          const double g = gcol[(static_cast<std::size_t>(c) * taps + t) * n_out + n];
          const double* px = x.data() + static_cast<std::size_t>(c) * plane;
          const double v00 = (r0_in && c0_in) ? px[base00] : 0.0;
          const double v01 = (r0_in && c1_in) ? px[base00 + 1] : 0.0;
          const double v10 = (r1_in && c0_in) ? px[base00 + width] : 0.0;
          const double v11 = (r1_in && c1_in) ? px[base00 + width + 1] : 0.0;
          if (grad_off != nullptr) {
            g_row += g * ((1.0 - fc) * (v10 - v00) + fc * (v11 - v01));
            g_col += g * ((1.0 - fr) * (v01 - v00) + fr * (v11 - v10));
          }
          if (grad_x != nullptr) {
            double* gx = grad_x->data() + static_cast<std::size_t>(c) * plane;
            if (r0_in && c0_in) gx[base00] += g * (1.0 - fr) * (1.0 - fc);
            if (r0_in && c1_in) gx[base00 + 1] += g * (1.0 - fr) * fc;
            if (r1_in && c0_in) gx[base00 + width] += g * fr * (1.0 - fc);
            if (r1_in && c1_in) gx[base00 + width + 1] += g * fr * fc;
          }
        }
        if (grad_off != nullptr) {
          grad_off->data()[static_cast<std::size_t>(2 * t) * n_out + n] = g_row;
          grad_off->data()[static_cast<std::size_t>(2 * t + 1) * n_out + n] = g_col;
        }
      }
    }
  }
}

namespace {

struct RoiGeometry {
  double row0, col0, bin_h, bin_w, roi_h, roi_w;
  int bins;
};

RoiGeometry check_roi(const Tensor& score_maps, const Roi& roi, int class_banks,
                      double spatial_scale, bool want_offsets) {
  if (score_maps.rank() != 3) {
    throw std::invalid_argument("ps_roi_pool: score maps must be [k^2*C,H,W]");
  }
  if (roi.bins < 1) throw std::invalid_argument("ps_roi_pool: bins must be >= 1");
  if (class_banks < 1) throw std::invalid_argument("ps_roi_pool: class banks must be >= 1");
  if (score_maps.extent(0) != roi.bins * roi.bins * class_banks) {
    throw std::invalid_argument(
        "ps_roi_pool: channel extent " + std::to_string(score_maps.extent(0)) +
        " != k^2*C = " + std::to_string(roi.bins * roi.bins * class_banks));
  }
  if (roi.box.height() <= 0.0 || roi.box.width() <= 0.0) {
    throw std::invalid_argument("ps_roi_pool: ROI must have positive area");
  }
  if (want_offsets) {
    if (!roi.has_offsets || roi.offsets.rank() != 3 ||
        roi.offsets.extent(0) != 2 || roi.offsets.extent(1) != roi.bins ||
        roi.offsets.extent(2) != roi.bins) {
      throw std::invalid_argument("deform_ps_roi_pool: offsets must be [2,k,k]");
    }
  }
  RoiGeometry g;
  g.bins = roi.bins;
  g.row0 = roi.box.row_min * spatial_scale;
  g.col0 = roi.box.col_min * spatial_scale;
  g.roi_h = roi.box.height() * spatial_scale;
  g.roi_w = roi.box.width() * spatial_scale;
  g.bin_h = g.roi_h / roi.bins;
  g.bin_w = g.roi_w / roi.bins;
  return g;
}

// quarter-point sub-sample grid inside bin (i, j), shifted by (dr, dc)
struct BinSamples {
  double rows[2];
  double cols[2];
};

BinSamples bin_samples(const RoiGeometry& g, int i, int j, double dr, double dc) {
  BinSamples s;
  s.rows[0] = g.row0 + (i + 0.25) * g.bin_h + dr;
  s.rows[1] = g.row0 + (i + 0.75) * g.bin_h + dr;
  s.cols[0] = g.col0 + (j + 0.25) * g.bin_w + dc;
  s.cols[1] = g.col0 + (j + 0.75) * g.bin_w + dc;
  return s;
}

Tensor pool_impl(const Tensor& maps, const Roi& roi, int class_banks,
                 double spatial_scale, double offset_scale, bool deformable) {
  const RoiGeometry g = check_roi(maps, roi, class_banks, spatial_scale, deformable);
  const int k = g.bins;
  const int height = maps.extent(1);
  const int width = maps.extent(2);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  Tensor out({class_banks, k, k});
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double dr = 0.0;
      double dc = 0.0;
      if (deformable) {
        dr = offset_scale * g.roi_h * roi.offsets.at(0, i, j);
        dc = offset_scale * g.roi_w * roi.offsets.at(1, i, j);
      }
      const BinSamples s = bin_samples(g, i, j, dr, dc);
      const int bank = i * k + j;
      for (int c = 0; c < class_banks; ++c) {
        const double* pm = maps.data() + static_cast<std::size_t>(bank * class_banks + c) * plane;
        double acc = 0.0;
        for (int sr = 0; sr < 2; ++sr) {
          for (int sc = 0; sc < 2; ++sc) {
            acc += bilinear_sample_raw(pm, height, width, s.rows[sr], s.cols[sc]);
          }
        }
        out.at(c, i, j) = acc / 4.0;
      }
    }
  }
  return out;
}

void pool_backward_impl(const Tensor& maps, const Roi& roi, int class_banks,
                        double spatial_scale, double offset_scale,
                        bool deformable, const Tensor& grad_out,
                        Tensor* grad_maps, Tensor* grad_offsets) {
  const RoiGeometry g = check_roi(maps, roi, class_banks, spatial_scale, deformable);
  const int k = g.bins;
  if (grad_out.rank() != 3 || grad_out.extent(0) != class_banks ||
      grad_out.extent(1) != k || grad_out.extent(2) != k) {
    throw std::invalid_argument("ps_roi_pool_backward: grad_out shape mismatch");
  }
  const int height = maps.extent(1);
  const int width = maps.extent(2);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (grad_maps != nullptr && !grad_maps->same_shape(maps)) *grad_maps = Tensor(maps.shape());
  if (grad_offsets != nullptr) *grad_offsets = Tensor({2, k, k});

  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double dr = 0.0;
      double dc = 0.0;
      if (deformable) {
        dr = offset_scale * g.roi_h * roi.offsets.at(0, i, j);
        dc = offset_scale * g.roi_w * roi.offsets.at(1, i, j);
      }
      const BinSamples s = bin_samples(g, i, j, dr, dc);
      const int bank = i * k + j;
      double g_dr = 0.0;
      double g_dc = 0.0;
      for (int c = 0; c < class_banks; ++c) {
        const std::size_t ch = static_cast<std::size_t>(bank * class_banks + c);
        const double upstream = grad_out.at(c, i, j) / 4.0;
        if (upstream == 0.0) continue;
        const double* pm = maps.data() + ch * plane;
        for (int sr = 0; sr < 2; ++sr) {
          for (int sc = 0; sc < 2; ++sc) {
            const BilinearGrad bg = bilinear_sample_grad_raw(
                pm, height, width, s.rows[sr], s.cols[sc], upstream);
            if (grad_maps != nullptr) {
              double* gm = grad_maps->data() + ch * plane;
              for (int q = 0; q < bg.n; ++q) {
                gm[static_cast<std::size_t>(bg.rows[q]) * width + bg.cols[q]] += bg.values[q];
              }
            }
            g_dr += bg.grad_p.row;
            g_dc += bg.grad_p.col;
          }
        }
      }
      if (grad_offsets != nullptr) {
        grad_offsets->at(0, i, j) = g_dr * offset_scale * g.roi_h;
        grad_offsets->at(1, i, j) = g_dc * offset_scale * g.roi_w;
      }
    }
  }
}

}  // namespace

Tensor ps_roi_pool(const Tensor& score_maps, const Roi& roi, int class_banks,
                   double spatial_scale) {
  return pool_impl(score_maps, roi, class_banks, spatial_scale, 0.0, false);
}

void ps_roi_pool_backward(const Tensor& score_maps, const Roi& roi,
                          int class_banks, double spatial_scale,
                          const Tensor& grad_out, Tensor* grad_maps) {
  pool_backward_impl(score_maps, roi, class_banks, spatial_scale, 0.0, false,
                     grad_out, grad_maps, nullptr);
}

Tensor deform_ps_roi_pool(const Tensor& score_maps, const Roi& roi,
                          int class_banks, double spatial_scale,
                          double offset_scale) {
  return pool_impl(score_maps, roi, class_banks, spatial_scale, offset_scale, true);
}

void deform_ps_roi_pool_backward(const Tensor& score_maps, const Roi& roi,
                                 int class_banks, double spatial_scale,
                                 double offset_scale, const Tensor& grad_out,
                                 Tensor* grad_maps, Tensor* grad_offsets) {
  pool_backward_impl(score_maps, roi, class_banks, spatial_scale, offset_scale,
                     true, grad_out, grad_maps, grad_offsets);
}

}  // namespace mammodet
