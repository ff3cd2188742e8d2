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

#ifndef MAMMODET_BACKBONE_HPP
#define MAMMODET_BACKBONE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mammodet/deform_ops.hpp"
#include "mammodet/rng.hpp"
#include "mammodet/tensor.hpp"

namespace mammodet {

struct BlockSpec {
  enum class Kind { kStemCbr, kBlockA, kBlockB, kBlockC };
  Kind kind = Kind::kBlockA;
  int repeats = 1;
  int out_channels = 16;
  bool downsample = false;  // first repeat of the block runs at stride 2
};

BlockSpec::Kind parse_block_kind(const std::string& name);
std::string block_kind_name(BlockSpec::Kind kind);

// Per-channel affine normalization with stored statistics. Forward always
// normalizes with the running statistics (the batch is a single image);
// moving-average mode additionally folds the observed batch statistics into
// the running ones after the forward pass.
struct NormState {
  enum class Mode { kFrozen, kMovingAverage };
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  Mode mode = Mode::kFrozen;
  double momentum = 0.9;
  double epsilon = 1e-5;

  static NormState identity(int channels);
};

struct CbrCache {
  Tensor input;
  Tensor offset_field;  // deformable layers only
  Tensor conv_out;
  Tensor normed;        // pre-relu, used for the relu mask
};

// conv -> norm -> relu. Deformable layers derive the conv's offset field
// from the input through a sibling plain convolution.
struct CbrLayer {
  std::string name;
  ConvParams conv;
  NormState norm;
  bool deformable = false;
  ConvParams offset_conv;

  Tensor forward(const Tensor& x, CbrCache* cache) const;
  // accumulates parameter gradients into grads (matching shapes), returns
  // grad wrt the layer input
  Tensor backward(const CbrCache& cache, const Tensor& grad_y,
                  Tensor* grad_conv_w, Tensor* grad_conv_b, Tensor* grad_scale,
                  Tensor* grad_shift, Tensor* grad_off_w, Tensor* grad_off_b) const;
  // moving-average statistics update from the cached conv output
  void update_norm_stats(const CbrCache& cache);
};

Tensor cbr_forward(const Tensor& x, const ConvParams& conv,
                   const NormState& norm, CbrCache* cache);

struct Backbone {
  std::vector<CbrLayer> layers;
  int total_stride = 1;
  int out_channels = 1;

  // pre: extents divisible by total_stride (rejected input error otherwise)
  Tensor forward(const Tensor& image, std::vector<CbrCache>* caches) const;
};

// Expanded per-conv-layer plan shared by the builder and the memory planner.
struct LayerPlan {
  std::string name;
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  bool deformable = false;
};

std::vector<LayerPlan> plan_layers(const std::vector<BlockSpec>& specs,
                                   int in_channels, bool deformable_last_block);

Backbone build_backbone(const std::vector<BlockSpec>& specs, int in_channels,
                        bool deformable_last_block, Rng& rng);

// ---- resolution / memory trade-off planner ----

struct MemoryPlan {
  // training-resident activation storage: every layer output is live for
  // the backward pass
  std::uint64_t activation_bytes = 0;
  std::uint64_t param_bytes = 0;
  // inference working set: the largest adjacent pair of live activations
  std::uint64_t peak_bytes = 0;
};

MemoryPlan memory_plan(const std::vector<BlockSpec>& specs, int input_side,
                       int bytes_per_element, int batch,
                       bool deformable_last_block = false);

// Largest input side (aligned to the total stride) whose training-resident
// footprint (activations + parameters) fits the budget. Returns 0 when no
// aligned side fits.
int feasible_input_side(const std::vector<BlockSpec>& specs,
                        std::uint64_t budget_bytes, int bytes_per_element,
                        int batch, bool deformable_last_block = false);

}  // namespace mammodet

#endif  // MAMMODET_BACKBONE_HPP
