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

#include "mammodet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mammodet/kernels.hpp"

namespace mammodet {

double softmax_xent(const std::vector<double>& logits, int label,
                    std::vector<double>* grad) {
  const int c = static_cast<int>(logits.size());
  if (c < 2) throw std::invalid_argument("softmax_xent: need >= 2 classes");
  if (label < 0 || label >= c) {
    throw std::invalid_argument("softmax_xent: label " + std::to_string(label) +
                                " out of range for " + std::to_string(c) + " classes");
  }
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double log_z = std::log(z) + m;
  const double loss = log_z - logits[static_cast<std::size_t>(label)];
  if (grad != nullptr) {
    grad->resize(logits.size());
    for (int i = 0; i < c; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      (*grad)[si] = std::exp(logits[si] - log_z) - (i == label ? 1.0 : 0.0);
    }
  }
  return loss;
}

double smooth_l1(const std::vector<double>& pred, const std::vector<double>& target,
                 std::vector<double>* grad) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("smooth_l1: length mismatch");
  }
  if (grad != nullptr) grad->assign(pred.size(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    const double a = std::abs(d);
    if (a < 1.0) {
      loss += 0.5 * d * d;
      if (grad != nullptr) (*grad)[i] = d;
    } else {
      loss += a - 0.5;
      if (grad != nullptr) (*grad)[i] = d > 0.0 ? 1.0 : -1.0;
    }
  }
  return loss;
}

SgdState make_sgd_state(DetectionModel& model) {
  SgdState state;
  for (const ParamSlot& slot : model.param_slots()) {
    if (!slot.trainable) continue;
    state.velocity.emplace_back(slot.size, 0.0);
  }
  return state;
}

void sgd_step(DetectionModel& model, ModelGrads& grads, const TrainConfig& cfg,
              SgdState& state) {
  if (cfg.learning_rate <= 0.0) {
    throw std::invalid_argument("sgd_step: learning rate must be > 0");
  }
  std::vector<ParamSlot> params;
  for (ParamSlot& slot : model.param_slots()) {
    if (slot.trainable) params.push_back(slot);
  }
  std::vector<ParamSlot> gslots = DetectionModel::grad_slots(grads, model);
  if (params.size() != gslots.size() || params.size() != state.velocity.size()) {
    throw std::invalid_argument("sgd_step: parameter/gradient layout mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != gslots[i].name || params[i].size != gslots[i].size) {
      throw std::invalid_argument("sgd_step: slot order mismatch at " + params[i].name);
    }
    const double* g = gslots[i].data;
    for (std::size_t n = 0; n < params[i].size; ++n) {
      if (!std::isfinite(g[n])) {
        throw TrainError("non-finite gradient in '" + params[i].name +
                         "' at step " + std::to_string(state.step));
      }
    }
    kernels::active().sgd_update(params[i].size, params[i].data, g,
                                 state.velocity[i].data(), cfg.learning_rate,
                                 cfg.momentum, cfg.weight_decay);
  }
  ++state.step;
}

namespace {

struct RpnLossResult {
  double cls = 0.0;
  double reg = 0.0;
  Tensor grad_cls;  // shaped like rpn_cls_out, empty when grads skipped
  Tensor grad_reg;
};

RpnLossResult rpn_losses(const DetectionModel& model, const ForwardCache& cache,
                         const std::vector<BBox>& gt_boxes, bool want_grads) {
  const std::vector<BBox> anchors = model.anchors_for(cache);
  const RpnAssignment assignment = assign_rpn_labels(
      anchors, gt_boxes, model.config().rpn_positive_iou,
      model.config().rpn_negative_iou);

  std::size_t num_pos = 0;
  std::size_t num_neg = 0;
  for (RpnLabel l : assignment.labels) {
    if (l == RpnLabel::kPositive) ++num_pos;
    if (l == RpnLabel::kNegative) ++num_neg;
  }
  // balanced reweighting instead of anchor sampling keeps the step
  // deterministic without an RNG
  const double w_pos = num_pos > 0 ? 0.5 / static_cast<double>(num_pos) : 0.0;
  const double w_neg = num_neg > 0
                           ? (num_pos > 0 ? 0.5 : 1.0) / static_cast<double>(num_neg)
                           : 0.0;

  RpnLossResult out;
  if (want_grads) {
    out.grad_cls = Tensor(cache.rpn_cls_out.shape());
    out.grad_reg = Tensor(cache.rpn_reg_out.shape());
  }
  const int num_anchors = model.anchors_per_cell();
  const std::size_t cells = static_cast<std::size_t>(cache.feat_h) * cache.feat_w;
  const double* cls = cache.rpn_cls_out.data();
  const double* reg = cache.rpn_reg_out.data();

  std::vector<double> pair(2), pair_grad(2), pred(4), target(4), reg_grad(4);
  for (std::size_t idx = 0; idx < anchors.size(); ++idx) {
    const RpnLabel label = assignment.labels[idx];
    if (label == RpnLabel::kIgnore) continue;
    const std::size_t n = idx / static_cast<std::size_t>(num_anchors);
    const int a = static_cast<int>(idx % static_cast<std::size_t>(num_anchors));
    const double w = label == RpnLabel::kPositive ? w_pos : w_neg;
    if (w == 0.0) continue;

    pair[0] = cls[static_cast<std::size_t>(2 * a) * cells + n];
    pair[1] = cls[static_cast<std::size_t>(2 * a + 1) * cells + n];
    const int target_class = label == RpnLabel::kPositive ? 1 : 0;
    out.cls += w * softmax_xent(pair, target_class, want_grads ? &pair_grad : nullptr);
    if (want_grads) {
      out.grad_cls.data()[static_cast<std::size_t>(2 * a) * cells + n] = w * pair_grad[0];
      out.grad_cls.data()[static_cast<std::size_t>(2 * a + 1) * cells + n] = w * pair_grad[1];
    }

    if (label == RpnLabel::kPositive) {
      const std::array<double, 4> t =
          encode_box(anchors[idx], gt_boxes[static_cast<std::size_t>(
                                       assignment.matched_gt[idx])]);
      for (int d = 0; d < 4; ++d) {
        pred[static_cast<std::size_t>(d)] =
            reg[static_cast<std::size_t>(4 * a + d) * cells + n];
        target[static_cast<std::size_t>(d)] = t[static_cast<std::size_t>(d)];
      }
      const double inv_pos = 1.0 / static_cast<double>(num_pos);
      out.reg += inv_pos * smooth_l1(pred, target, want_grads ? &reg_grad : nullptr);
      if (want_grads) {
        for (int d = 0; d < 4; ++d) {
          out.grad_reg.data()[static_cast<std::size_t>(4 * a + d) * cells + n] =
              inv_pos * reg_grad[static_cast<std::size_t>(d)];
        }
      }
    }
  }
  return out;
}

}  // namespace

LossBreakdown compute_loss(DetectionModel& model, const TrainingImage& sample,
                           const LossOptions& opts, ModelGrads* grads,
                           StepDiagnostics* diag) {
  if (sample.gt_boxes.size() != sample.gt_classes.size()) {
    throw std::invalid_argument("compute_loss: gt boxes/classes length mismatch");
  }
  ForwardCache cache;
  model.forward(sample.image, &cache);

  LossBreakdown loss;
  RpnLossResult rpn;
  if (opts.include_rpn) {
    rpn = rpn_losses(model, cache, sample.gt_boxes, grads != nullptr);
    loss.rpn_cls = rpn.cls;
    loss.rpn_reg = rpn.reg;
  }

  // ROI set: RPN proposals (plus the gt boxes so foreground exists from the
  // first step), or caller-pinned boxes
  std::vector<BBox> rois;
  if (opts.fixed_rois != nullptr) {
    rois = *opts.fixed_rois;
  } else {
    for (const Proposal& p : model.propose_from(cache)) rois.push_back(p.box);
    if (opts.append_gt_proposals) {
      for (const BBox& b : sample.gt_boxes) rois.push_back(b);
    }
  }

  Tensor grad_cls_maps;
  Tensor grad_reg_maps;
  Tensor grad_off_maps;
  if (grads != nullptr) {
    grad_cls_maps = Tensor(cache.cls_maps.shape());
    grad_reg_maps = Tensor(cache.reg_maps.shape());
    grad_off_maps = Tensor(cache.off_maps.shape());
  }

  if (!rois.empty()) {
    const std::size_t n_rois = rois.size();
    std::vector<RoiHeadOutput> heads(n_rois);
    std::vector<int> roi_labels(n_rois, kNegative);
    std::vector<std::array<double, 4>> roi_targets(n_rois);
    std::vector<double> per_roi_loss(n_rois, 0.0);
    std::vector<double> per_roi_cls(n_rois, 0.0);
    std::vector<double> per_roi_reg(n_rois, 0.0);

    for (std::size_t r = 0; r < n_rois; ++r) {
      heads[r] = model.roi_head_forward(cache, rois[r]);
      // second-stage matching: best-overlap gt at or above the fg threshold
      double best = 0.0;
      int best_gt = -1;
      for (std::size_t g = 0; g < sample.gt_boxes.size(); ++g) {
        const double v = iou(rois[r], sample.gt_boxes[g]);
        if (v > best) {
          best = v;
          best_gt = static_cast<int>(g);
        }
      }
      if (best_gt >= 0 && best >= model.config().roi_fg_iou) {
        roi_labels[r] = sample.gt_classes[static_cast<std::size_t>(best_gt)];
        roi_targets[r] = encode_box(rois[r], sample.gt_boxes[static_cast<std::size_t>(best_gt)]);
      }
      std::vector<double> logits(heads[r].cls_logits.begin(), heads[r].cls_logits.end());
      per_roi_cls[r] = softmax_xent(logits, roi_labels[r], nullptr);
      if (roi_labels[r] != kNegative) {
        std::vector<double> pred(heads[r].reg_deltas.begin(), heads[r].reg_deltas.end());
        std::vector<double> target(roi_targets[r].begin(), roi_targets[r].end());
        per_roi_reg[r] = smooth_l1(pred, target, nullptr);
      }
      per_roi_loss[r] = per_roi_cls[r] + per_roi_reg[r];
    }

    std::vector<int> selected = ohem_select(rois, per_roi_loss, opts.ohem_budget);
    const double inv_sel = 1.0 / static_cast<double>(selected.size());
    std::vector<bool> is_selected(n_rois, false);
    for (int s : selected) is_selected[static_cast<std::size_t>(s)] = true;

    if (diag != nullptr) {
      diag->num_proposals = static_cast<int>(n_rois);
      diag->ohem_selected = selected;
      diag->roi_losses = per_roi_loss;
      diag->roi_grad_logits.assign(n_rois, {0.0, 0.0, 0.0});
    }

    for (std::size_t r = 0; r < n_rois; ++r) {
      if (!is_selected[r]) continue;
      loss.roi_cls += inv_sel * per_roi_cls[r];
      loss.roi_reg += inv_sel * per_roi_reg[r];
      if (grads == nullptr && diag == nullptr) continue;

      std::vector<double> logits(heads[r].cls_logits.begin(), heads[r].cls_logits.end());
      std::vector<double> cls_grad;
      softmax_xent(logits, roi_labels[r], &cls_grad);
      std::array<double, kNumClasses> grad_logits{};
      for (int c = 0; c < kNumClasses; ++c) {
        grad_logits[static_cast<std::size_t>(c)] =
            inv_sel * cls_grad[static_cast<std::size_t>(c)];
      }
      std::array<double, 4> grad_deltas{};
      if (roi_labels[r] != kNegative) {
        std::vector<double> pred(heads[r].reg_deltas.begin(), heads[r].reg_deltas.end());
        std::vector<double> target(roi_targets[r].begin(), roi_targets[r].end());
        std::vector<double> g;
        smooth_l1(pred, target, &g);
        for (int d = 0; d < 4; ++d) {
          grad_deltas[static_cast<std::size_t>(d)] = inv_sel * g[static_cast<std::size_t>(d)];
        }
      }
      if (diag != nullptr) diag->roi_grad_logits[r] = grad_logits;
      if (grads != nullptr) {
        model.roi_head_backward(cache, rois[r], heads[r], grad_logits, grad_deltas,
                                &grad_cls_maps, &grad_reg_maps, &grad_off_maps);
      }
    }
  }

  loss.total = loss.rpn_cls + loss.rpn_reg + loss.roi_cls + loss.roi_reg;
  if (grads != nullptr) {
    model.backward(cache, rpn.grad_cls, rpn.grad_reg, grad_cls_maps,
                   grad_reg_maps, grad_off_maps, grads);
    model.update_norm_stats(cache);  // no-op unless layers are in
                                     // moving-average mode
  }
  return loss;
}

std::vector<StepLog> train_epoch(DetectionModel& model,
                                 const std::vector<TrainingImage>& dataset,
                                 const TrainConfig& cfg, SgdState& state) {
  if (dataset.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  const std::vector<DihedralTransform> transforms = all_dihedral_transforms();
  std::vector<StepLog> log;
  log.reserve(dataset.size() * transforms.size());
  ModelGrads grads = model.make_grads();

  for (const TrainingImage& base : dataset) {
    for (const DihedralTransform& t : transforms) {
      model.set_norm_mode(state.step < cfg.norm_warmup_steps
                              ? NormState::Mode::kMovingAverage
                              : NormState::Mode::kFrozen);
      TrainingImage sample;
      sample.image_id = base.image_id;
      sample.image = apply_transform(base.image, t);
      sample.gt_classes = base.gt_classes;
      sample.gt_boxes.reserve(base.gt_boxes.size());
      for (const BBox& b : base.gt_boxes) {
        sample.gt_boxes.push_back(
            transform_box(b, t, base.image.extent(1), base.image.extent(2)));
      }

      LossOptions opts;
      opts.ohem_budget = cfg.ohem_budget;
      opts.append_gt_proposals = model.config().append_gt_proposals;
      grads.zero();
      const LossBreakdown loss = compute_loss(model, sample, opts, &grads, nullptr);
      sgd_step(model, grads, cfg, state);
      log.push_back(StepLog{base.image_id, t, loss});
    }
  }
  model.set_norm_mode(NormState::Mode::kFrozen);
  return log;
}

}  // namespace mammodet
