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

#ifndef MAMMODET_MODEL_HPP
#define MAMMODET_MODEL_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mammodet/backbone.hpp"
#include "mammodet/detection.hpp"
#include "mammodet/deform_ops.hpp"
#include "mammodet/tensor.hpp"

namespace mammodet {

struct ModelConfig {
  std::vector<BlockSpec> blocks;
  bool deformable_backbone = true;  // last backbone conv runs deformable
  std::vector<double> anchor_scales = {8.0, 16.0, 32.0, 64.0};
  std::vector<double> anchor_ratios = {0.5, 1.0, 2.0};
  ProposalConfig proposals;
  double rpn_positive_iou = 0.5;
  double rpn_negative_iou = 0.3;
  int rpn_hidden_channels = 64;
  int pool_bins = 3;          // k of the k x k position-sensitive grid
  double offset_scale = 0.1;  // gamma for DPS-ROI bin offsets
  double roi_fg_iou = 0.5;    // second-stage foreground matching
  bool append_gt_proposals = true;

  static ModelConfig toy_default();
};

// Activations kept around for one image's backward pass.
struct ForwardCache {
  std::vector<CbrCache> backbone;
  Tensor features;
  CbrCache rpn_hidden;
  Tensor rpn_hidden_out;
  Tensor rpn_cls_out;  // [2A, Hf, Wf]: (bg, fg) logit pair per anchor slot
  Tensor rpn_reg_out;  // [4A, Hf, Wf]
  Tensor cls_maps;     // [k^2 * 3, Hf, Wf]
  Tensor reg_maps;     // [k^2 * 4, Hf, Wf]
  Tensor off_maps;     // [k^2 * 2, Hf, Wf]
  int feat_h = 0;
  int feat_w = 0;
  int image_h = 0;
  int image_w = 0;
};

struct RpnScores {
  std::vector<double> objectness;                // fg probability per anchor
  std::vector<std::array<double, 4>> deltas;
};

struct RoiHeadOutput {
  std::array<double, kNumClasses> cls_logits{};
  std::array<double, 4> reg_deltas{};
  Tensor raw_offsets;  // [2, k, k] pooled from the offset branch
};

// Gradient buffers mirroring every trainable tensor of the model.
struct ModelGrads {
  struct CbrGrads {
    Tensor conv_w, conv_b, scale, shift, off_w, off_b;
  };
  std::vector<CbrGrads> backbone;
  CbrGrads rpn_hidden;
  Tensor rpn_cls_w, rpn_cls_b;
  Tensor rpn_reg_w, rpn_reg_b;
  Tensor cls_maps_w, cls_maps_b;
  Tensor reg_maps_w, reg_maps_b;
  Tensor off_maps_w, off_maps_b;
  void zero();
};

struct ParamSlot {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
  std::vector<int> shape;
  bool trainable = true;
};

class DetectionModel {
 public:
  DetectionModel() = default;
  static DetectionModel build(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  int feature_stride() const { return backbone_.total_stride; }
  int anchors_per_cell() const {
    return static_cast<int>(cfg_.anchor_scales.size() * cfg_.anchor_ratios.size());
  }

  // Every named tensor in serialization order. Running statistics are
  // included with trainable = false.
  std::vector<ParamSlot> param_slots();
  // Trainable-subset gradient slots in the same relative order.
  static std::vector<ParamSlot> grad_slots(ModelGrads& grads,
                                           const DetectionModel& model);
  ModelGrads make_grads() const;

  void forward(const Tensor& image, ForwardCache* cache) const;
  // anchors for the cached feature extents, generation order fixed
  std::vector<BBox> anchors_for(const ForwardCache& cache) const;
  RpnScores rpn_scores(const ForwardCache& cache) const;
  std::vector<Proposal> propose_from(const ForwardCache& cache) const;

  RoiHeadOutput roi_head_forward(const ForwardCache& cache, const BBox& roi_box) const;
  // Accumulates map gradients for one ROI into the grad_* tensors (shaped
  // like the cached maps, zeroed by the caller before the first ROI).
  void roi_head_backward(const ForwardCache& cache, const BBox& roi_box,
                         const RoiHeadOutput& head,
                         const std::array<double, kNumClasses>& grad_logits,
                         const std::array<double, 4>& grad_deltas,
                         Tensor* grad_cls_maps, Tensor* grad_reg_maps,
                         Tensor* grad_off_maps) const;

  // Backward through heads and backbone given upstream gradients for the
  // RPN outputs and the three map stacks (any may be empty to skip).
  void backward(const ForwardCache& cache, const Tensor& grad_rpn_cls,
                const Tensor& grad_rpn_reg, const Tensor& grad_cls_maps,
                const Tensor& grad_reg_maps, const Tensor& grad_off_maps,
                ModelGrads* grads);

  // Full inference for one image: proposals then per-ROI classification.
  std::vector<Detection> detect(const Tensor& image) const;

  void set_norm_mode(NormState::Mode mode);
  // moving-average statistics refresh from a cached forward pass
  void update_norm_stats(const ForwardCache& cache);

  Backbone& backbone() { return backbone_; }
  const Backbone& backbone() const { return backbone_; }
  CbrLayer& rpn_hidden() { return rpn_hidden_; }
  ConvParams& rpn_cls() { return rpn_cls_; }
  ConvParams& rpn_reg() { return rpn_reg_; }
  ConvParams& cls_maps_conv() { return cls_maps_; }
  ConvParams& reg_maps_conv() { return reg_maps_; }
  ConvParams& off_maps_conv() { return off_maps_; }

 private:
  ModelConfig cfg_;
  Backbone backbone_;
  CbrLayer rpn_hidden_;
  ConvParams rpn_cls_;
  ConvParams rpn_reg_;
  ConvParams cls_maps_;
  ConvParams reg_maps_;
  ConvParams off_maps_;
};

}  // namespace mammodet

#endif  // MAMMODET_MODEL_HPP
