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

#include "mammodet/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "mammodet/kernels.hpp"

namespace mammodet {

BlockSpec::Kind parse_block_kind(const std::string& name) {
  if (name == "stem_cbr") return BlockSpec::Kind::kStemCbr;
  if (name == "block_a") return BlockSpec::Kind::kBlockA;
  if (name == "block_b") return BlockSpec::Kind::kBlockB;
  if (name == "block_c") return BlockSpec::Kind::kBlockC;
  throw std::invalid_argument("backbone: unknown block kind '" + name + "'");
}

std::string block_kind_name(BlockSpec::Kind kind) {
  switch (kind) {
    case BlockSpec::Kind::kStemCbr: return "stem_cbr";
    case BlockSpec::Kind::kBlockA: return "block_a";
    case BlockSpec::Kind::kBlockB: return "block_b";
    case BlockSpec::Kind::kBlockC: return "block_c";
  }
  return "?";
}

NormState NormState::identity(int channels) {
  NormState n;
  n.scale.assign(static_cast<std::size_t>(channels), 1.0);
  n.shift.assign(static_cast<std::size_t>(channels), 0.0);
  n.running_mean.assign(static_cast<std::size_t>(channels), 0.0);
  n.running_var.assign(static_cast<std::size_t>(channels), 1.0);
  return n;
}

namespace {

void apply_norm_relu(const Tensor& conv_out, const NormState& norm,
                     Tensor* normed, Tensor* activated) {
  const int channels = conv_out.extent(0);
  if (static_cast<int>(norm.scale.size()) != channels) {
    throw std::invalid_argument("cbr: norm channel count mismatch");
  }
  const std::size_t plane =
      static_cast<std::size_t>(conv_out.extent(1)) * conv_out.extent(2);
  *normed = Tensor(conv_out.shape());
  for (int c = 0; c < channels; ++c) {
    const std::size_t ci = static_cast<std::size_t>(c);
    const double inv_sd = 1.0 / std::sqrt(norm.running_var[ci] + norm.epsilon);
    const double a = norm.scale[ci] * inv_sd;
    const double b = norm.shift[ci] - a * norm.running_mean[ci];
    const double* src = conv_out.data() + ci * plane;
    double* dst = normed->data() + ci * plane;
    for (std::size_t n = 0; n < plane; ++n) dst[n] = a * src[n] + b;
  }
  *activated = Tensor(conv_out.shape());
  kernels::active().relu(normed->numel(), normed->data(), activated->data());
}

}  // namespace

Tensor cbr_forward(const Tensor& x, const ConvParams& conv,
                   const NormState& norm, CbrCache* cache) {
  CbrCache local;
  CbrCache* c = cache != nullptr ? cache : &local;
  c->input = x;
  c->conv_out = conv2d(x, conv);
  Tensor activated;
  apply_norm_relu(c->conv_out, norm, &c->normed, &activated);
  return activated;
}

Tensor CbrLayer::forward(const Tensor& x, CbrCache* cache) const {
  if (!deformable) return cbr_forward(x, conv, norm, cache);
  CbrCache local;
  CbrCache* c = cache != nullptr ? cache : &local;
  c->input = x;
  c->offset_field = conv2d(x, offset_conv);
  c->conv_out = deform_conv_forward(x, conv, OffsetField{c->offset_field});
  Tensor activated;
  apply_norm_relu(c->conv_out, norm, &c->normed, &activated);
  return activated;
}

void CbrLayer::update_norm_stats(const CbrCache& cache) {
  if (norm.mode != NormState::Mode::kMovingAverage) return;
  const int channels = cache.conv_out.extent(0);
  const std::size_t plane =
      static_cast<std::size_t>(cache.conv_out.extent(1)) * cache.conv_out.extent(2);
  const auto& k = kernels::active();
  for (int c = 0; c < channels; ++c) {
    const std::size_t ci = static_cast<std::size_t>(c);
    const double* src = cache.conv_out.data() + ci * plane;
    const double mean = k.reduce_sum(plane, src) / static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t n = 0; n < plane; ++n) {
      const double d = src[n] - mean;
      var += d * d;
    }
    var /= static_cast<double>(plane);
    norm.running_mean[ci] = norm.momentum * norm.running_mean[ci] + (1.0 - norm.momentum) * mean;
    norm.running_var[ci] = norm.momentum * norm.running_var[ci] + (1.0 - norm.momentum) * var;
  }
}

Tensor CbrLayer::backward(const CbrCache& cache, const Tensor& grad_y,
                          Tensor* grad_conv_w, Tensor* grad_conv_b,
                          Tensor* grad_scale, Tensor* grad_shift,
                          Tensor* grad_off_w, Tensor* grad_off_b) const {
  if (!grad_y.same_shape(cache.normed)) {
    throw std::invalid_argument("cbr backward: grad shape mismatch");
  }
  const int channels = cache.conv_out.extent(0);
  const std::size_t plane =
      static_cast<std::size_t>(cache.conv_out.extent(1)) * cache.conv_out.extent(2);

  Tensor grad_normed(grad_y.shape());
  kernels::active().relu_backward(grad_y.numel(), cache.normed.data(),
                                  grad_y.data(), grad_normed.data());

  // statistics are constants here, so the norm is per-channel affine
  Tensor grad_conv_out(grad_normed.shape());
  for (int c = 0; c < channels; ++c) {
    const std::size_t ci = static_cast<std::size_t>(c);
    const double inv_sd = 1.0 / std::sqrt(norm.running_var[ci] + norm.epsilon);
    const double a = norm.scale[ci] * inv_sd;
    const double* gn = grad_normed.data() + ci * plane;
    const double* co = cache.conv_out.data() + ci * plane;
    double* gc = grad_conv_out.data() + ci * plane;
    double d_scale = 0.0;
    double d_shift = 0.0;
    for (std::size_t n = 0; n < plane; ++n) {
      gc[n] = a * gn[n];
      d_scale += gn[n] * (co[n] - norm.running_mean[ci]) * inv_sd;
      d_shift += gn[n];
    }
    if (grad_scale != nullptr) (*grad_scale)[ci] += d_scale;
    if (grad_shift != nullptr) (*grad_shift)[ci] += d_shift;
  }

  Tensor grad_x;
  if (!deformable) {
    Tensor gw, gb;
    conv2d_backward(cache.input, conv, grad_conv_out, &grad_x, &gw, &gb);
    if (grad_conv_w != nullptr) add_inplace(*grad_conv_w, gw);
    if (grad_conv_b != nullptr) add_inplace(*grad_conv_b, gb);
  } else {
    Tensor gw, gb, goff;
    deform_conv_backward(cache.input, conv, OffsetField{cache.offset_field},
                         grad_conv_out, &grad_x, &gw, &gb, &goff);
    if (grad_conv_w != nullptr) add_inplace(*grad_conv_w, gw);
    if (grad_conv_b != nullptr) add_inplace(*grad_conv_b, gb);
    // offsets come from the sibling conv; chain into its parameters and
    // add its input gradient to the main path
    Tensor grad_x_off, gow, gob;
    conv2d_backward(cache.input, offset_conv, goff, &grad_x_off, &gow, &gob);
    add_inplace(grad_x, grad_x_off);
    if (grad_off_w != nullptr) add_inplace(*grad_off_w, gow);
    if (grad_off_b != nullptr) add_inplace(*grad_off_b, gob);
  }
  return grad_x;
}

Tensor Backbone::forward(const Tensor& image, std::vector<CbrCache>* caches) const {
  if (image.rank() != 3) {
    throw std::invalid_argument("backbone: image must be [C,H,W]");
  }
  if (image.extent(1) % total_stride != 0 || image.extent(2) % total_stride != 0) {
    throw std::invalid_argument(
        "backbone: image extents must be divisible by the total stride " +
        std::to_string(total_stride));
  }
  if (caches != nullptr) caches->resize(layers.size());
  Tensor x = image;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    CbrCache* cache = caches != nullptr ? &(*caches)[i] : nullptr;
    x = layers[i].forward(x, cache);
  }
  return x;
}

std::vector<LayerPlan> plan_layers(const std::vector<BlockSpec>& specs,
                                   int in_channels, bool deformable_last_block) {
  if (specs.empty()) throw std::invalid_argument("backbone: empty block list");
  std::vector<LayerPlan> plan;
  int channels = in_channels;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const BlockSpec& spec = specs[s];
    if (spec.repeats < 1 || spec.out_channels < 1) {
      throw std::invalid_argument("backbone: repeats and out_channels must be >= 1");
    }
    for (int r = 0; r < spec.repeats; ++r) {
      LayerPlan lp;
      lp.name = block_kind_name(spec.kind) + std::to_string(s) + "_" + std::to_string(r);
      lp.in_channels = channels;
      lp.out_channels = spec.out_channels;
      lp.kernel = 3;
      lp.stride = (spec.downsample && r == 0) ? 2 : 1;
      lp.deformable = deformable_last_block && s + 1 == specs.size() &&
                      r + 1 == spec.repeats;
      plan.push_back(lp);
      channels = spec.out_channels;
    }
  }
  return plan;
}

namespace {

Tensor he_normal(const std::vector<int>& shape, int fan_in, Rng& rng) {
  Tensor t(shape);
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, sd);
  return t;
}

}  // namespace

Backbone build_backbone(const std::vector<BlockSpec>& specs, int in_channels,
                        bool deformable_last_block, Rng& rng) {
  Backbone bb;
  bb.total_stride = 1;
  for (const LayerPlan& lp : plan_layers(specs, in_channels, deformable_last_block)) {
    CbrLayer layer;
    layer.name = lp.name;
    layer.conv.weights = he_normal({lp.out_channels, lp.in_channels, lp.kernel, lp.kernel},
                                   lp.in_channels * lp.kernel * lp.kernel, rng);
    layer.conv.bias = Tensor({lp.out_channels});
    layer.conv.stride = lp.stride;
    layer.conv.pad = lp.kernel / 2;
    layer.norm = NormState::identity(lp.out_channels);
    layer.deformable = lp.deformable;
    if (lp.deformable) {
      // zero-initialized offsets: the layer starts as a plain convolution
      const int off_ch = 2 * lp.kernel * lp.kernel;
      layer.offset_conv.weights = Tensor({off_ch, lp.in_channels, lp.kernel, lp.kernel});
      layer.offset_conv.bias = Tensor({off_ch});
      layer.offset_conv.stride = lp.stride;
      layer.offset_conv.pad = lp.kernel / 2;
    }
    bb.total_stride *= lp.stride;
    bb.out_channels = lp.out_channels;
    bb.layers.push_back(std::move(layer));
  }
  return bb;
}

MemoryPlan memory_plan(const std::vector<BlockSpec>& specs, int input_side,
                       int bytes_per_element, int batch,
                       bool deformable_last_block) {
  if (input_side < 1 || bytes_per_element < 1 || batch < 1) {
    throw std::invalid_argument("memory_plan: arguments must be positive");
  }
  const std::vector<LayerPlan> plan = plan_layers(specs, 1, deformable_last_block);
  MemoryPlan out;
  const std::uint64_t bpe = static_cast<std::uint64_t>(bytes_per_element);

  std::uint64_t side = static_cast<std::uint64_t>(input_side);
  std::uint64_t prev_elems = side * side;  // input image, one channel
  std::uint64_t peak_elems = 0;
  for (const LayerPlan& lp : plan) {
    side /= static_cast<std::uint64_t>(lp.stride);
    std::uint64_t elems = static_cast<std::uint64_t>(lp.out_channels) * side * side;
    if (lp.deformable) {
      elems += static_cast<std::uint64_t>(2 * lp.kernel * lp.kernel) * side * side;
      out.param_bytes += bpe * static_cast<std::uint64_t>(2 * lp.kernel * lp.kernel) *
                         (static_cast<std::uint64_t>(lp.in_channels) * lp.kernel * lp.kernel + 1);
    }
    out.activation_bytes += bpe * elems * static_cast<std::uint64_t>(batch);
    out.param_bytes += bpe * (static_cast<std::uint64_t>(lp.out_channels) *
                                  lp.in_channels * lp.kernel * lp.kernel +
                              static_cast<std::uint64_t>(lp.out_channels) * 5);
    peak_elems = std::max(peak_elems, prev_elems + elems);
    prev_elems = elems;
  }
  out.peak_bytes = bpe * peak_elems * static_cast<std::uint64_t>(batch);
  return out;
}

int feasible_input_side(const std::vector<BlockSpec>& specs,
                        std::uint64_t budget_bytes, int bytes_per_element,
                        int batch, bool deformable_last_block) {
  int stride = 1;
  for (const BlockSpec& s : specs) {
    if (s.downsample) stride *= 2;
  }
  auto fits = [&](int side) {
    const MemoryPlan p = memory_plan(specs, side, bytes_per_element, batch,
                                     deformable_last_block);
    return p.activation_bytes + p.param_bytes <= budget_bytes;
  };
  if (!fits(stride)) return 0;
  // footprint is monotone in the side, so double then bisect
  int lo = stride;
  int hi = stride;
  while (fits(hi * 2) && hi < (1 << 22)) hi *= 2;
  hi *= 2;
  while (hi - lo > stride) {
    const int mid = lo + (hi - lo) / 2 / stride * stride;
    if (mid == lo) break;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace mammodet
