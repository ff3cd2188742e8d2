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

#ifndef MAMMODET_TRAINER_HPP
#define MAMMODET_TRAINER_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mammodet/inference.hpp"
#include "mammodet/model.hpp"

namespace mammodet {

struct LossBreakdown {
  double rpn_cls = 0.0;
  double rpn_reg = 0.0;
  double roi_cls = 0.0;
  double roi_reg = 0.0;
  double total = 0.0;  // unit-weighted sum of the four components
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 1;
  int ohem_budget = 16;
  std::uint64_t seed = 11;
  // moving-average normalization statistics for this many leading steps,
  // frozen afterwards
  int norm_warmup_steps = 200;
};

// Raised when an update would corrupt the model (non-finite gradients),
// with the parameter path and step index in the message.
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerically stabilized cross entropy over C >= 2 logits.
// grad (optional) receives softmax(logits) - onehot(label).
double softmax_xent(const std::vector<double>& logits, int label,
                    std::vector<double>* grad);

// Sum of per-coordinate huber terms: 0.5 d^2 for |d| < 1, |d| - 0.5 beyond.
double smooth_l1(const std::vector<double>& pred, const std::vector<double>& target,
                 std::vector<double>* grad);

struct SgdState {
  std::vector<std::vector<double>> velocity;  // aligned with trainable slots
  std::int64_t step = 0;
};

SgdState make_sgd_state(DetectionModel& model);
// v = momentum v + (g + weight_decay w); w -= lr v
void sgd_step(DetectionModel& model, ModelGrads& grads, const TrainConfig& cfg,
              SgdState& state);

struct TrainingImage {
  std::string image_id;
  Tensor image;  // [1,H,W], normalized intensities
  std::vector<BBox> gt_boxes;
  std::vector<int> gt_classes;  // kBenign / kMalignant
};

struct StepDiagnostics {
  int num_proposals = 0;
  std::vector<int> ohem_selected;
  std::vector<double> roi_losses;
  // per-ROI logit gradients after OHEM masking (zero for unselected ROIs)
  std::vector<std::array<double, kNumClasses>> roi_grad_logits;
};

struct LossOptions {
  int ohem_budget = 16;
  bool include_rpn = true;
  // when set, these ROIs replace the RPN proposals (used by the
  // finite-difference checks, which need a parameter-independent ROI set)
  const std::vector<BBox>* fixed_rois = nullptr;
  bool append_gt_proposals = true;
};

// Full forward pass, losses, and (optionally) gradients for one image.
// Pass grads = nullptr for a loss-only evaluation.
LossBreakdown compute_loss(DetectionModel& model, const TrainingImage& sample,
                           const LossOptions& opts, ModelGrads* grads,
                           StepDiagnostics* diag = nullptr);

struct StepLog {
  std::string image_id;
  DihedralTransform transform;
  LossBreakdown loss;
};

// One pass over images x 8 dihedral variants, one SGD step per variant.
// Deterministic given the model state, data order, and config.
std::vector<StepLog> train_epoch(DetectionModel& model,
                                 const std::vector<TrainingImage>& dataset,
                                 const TrainConfig& cfg, SgdState& state);

}  // namespace mammodet

#endif  // MAMMODET_TRAINER_HPP
