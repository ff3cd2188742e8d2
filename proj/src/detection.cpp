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

#include "mammodet/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mammodet {

double iou(const BBox& a, const BBox& b) {
  const double inter_h = std::min(a.row_max, b.row_max) - std::max(a.row_min, b.row_min);
  const double inter_w = std::min(a.col_max, b.col_max) - std::max(a.col_min, b.col_min);
  const double inter = std::max(0.0, inter_h) * std::max(0.0, inter_w);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<BBox> generate_anchors(const AnchorConfig& cfg, int feat_h, int feat_w) {
  if (feat_h < 1 || feat_w < 1) {
    throw std::invalid_argument("generate_anchors: feature extents must be positive");
  }
  std::vector<BBox> anchors;
  anchors.reserve(static_cast<std::size_t>(feat_h) * feat_w *
                  cfg.base_scales.size() * cfg.aspect_ratios.size());
  for (int i = 0; i < feat_h; ++i) {
    for (int j = 0; j < feat_w; ++j) {
      const double cr = (i + 0.5) * cfg.stride;
      const double cc = (j + 0.5) * cfg.stride;
      for (double scale : cfg.base_scales) {
        for (double ratio : cfg.aspect_ratios) {
          // area-preserving: h/w = ratio, h*w = scale^2
          const double h = scale * std::sqrt(ratio);
          const double w = scale / std::sqrt(ratio);
          anchors.push_back(BBox{cr - 0.5 * h, cc - 0.5 * w, cr + 0.5 * h, cc + 0.5 * w});
        }
      }
    }
  }
  return anchors;
}

RpnAssignment assign_rpn_labels(const std::vector<BBox>& anchors,
                                const std::vector<BBox>& gt_boxes,
                                double positive_iou, double negative_iou) {
  const std::size_t n = anchors.size();
  RpnAssignment out;
  out.labels.assign(n, RpnLabel::kNegative);
  out.matched_gt.assign(n, -1);
  if (gt_boxes.empty()) return out;

  std::vector<double> best_iou(n, 0.0);
  std::vector<int> best_gt(n, -1);
  std::vector<double> gt_best(gt_boxes.size(), 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      const double v = iou(anchors[a], gt_boxes[g]);
      if (v > best_iou[a]) {
        best_iou[a] = v;
        best_gt[a] = static_cast<int>(g);
      }
      if (v > gt_best[g]) gt_best[g] = v;
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (best_iou[a] >= positive_iou) {
      out.labels[a] = RpnLabel::kPositive;
      out.matched_gt[a] = best_gt[a];
    } else if (best_iou[a] < negative_iou) {
      out.labels[a] = RpnLabel::kNegative;
    } else {
      out.labels[a] = RpnLabel::kIgnore;
    }
  }
  // argmax rule: anchors attaining a gt's best overlap are positive even
  // below the threshold
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      if (gt_best[g] > 0.0 && iou(anchors[a], gt_boxes[g]) == gt_best[g]) {
        out.labels[a] = RpnLabel::kPositive;
        out.matched_gt[a] = static_cast<int>(g);
      }
    }
  }
  return out;
}

std::array<double, 4> encode_box(const BBox& anchor, const BBox& gt) {
  const double ah = anchor.height();
  const double aw = anchor.width();
  if (ah <= 0.0 || aw <= 0.0) {
    throw std::invalid_argument("encode_box: degenerate anchor");
  }
  return {(gt.center_row() - anchor.center_row()) / ah,
          (gt.center_col() - anchor.center_col()) / aw,
          std::log(gt.height() / ah), std::log(gt.width() / aw)};
}

BBox decode_box(const BBox& anchor, const std::array<double, 4>& deltas) {
  const double ah = anchor.height();
  const double aw = anchor.width();
  if (ah <= 0.0 || aw <= 0.0) {
    throw std::invalid_argument("decode_box: degenerate anchor");
  }
  const double cr = anchor.center_row() + deltas[0] * ah;
  const double cc = anchor.center_col() + deltas[1] * aw;
  const double h = ah * std::exp(deltas[2]);
  const double w = aw * std::exp(deltas[3]);
  return BBox{cr - 0.5 * h, cc - 0.5 * w, cr + 0.5 * h, cc + 0.5 * w};
}

std::vector<int> nms(const std::vector<BBox>& boxes,
                     const std::vector<double>& scores, double iou_threshold) {
  if (boxes.size() != scores.size()) {
    throw std::invalid_argument("nms: boxes/scores length mismatch");
  }
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  std::vector<int> keep;
  for (int idx : order) {
    bool suppressed = false;
    for (int kept : keep) {
      if (iou(boxes[static_cast<std::size_t>(idx)], boxes[static_cast<std::size_t>(kept)]) >
          iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) keep.push_back(idx);
  }
  return keep;
}

std::vector<Proposal> propose(const std::vector<double>& rpn_objectness,
                              const std::vector<std::array<double, 4>>& rpn_deltas,
                              const std::vector<BBox>& anchors, int image_h,
                              int image_w, const ProposalConfig& cfg) {
  if (rpn_objectness.size() != anchors.size() || rpn_deltas.size() != anchors.size()) {
    throw std::invalid_argument("propose: objectness/deltas/anchors length mismatch");
  }
  std::vector<BBox> boxes;
  std::vector<double> scores;
  boxes.reserve(anchors.size());
  scores.reserve(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const BBox decoded = decode_box(anchors[a], rpn_deltas[a])
                             .clipped(static_cast<double>(image_h),
                                      static_cast<double>(image_w));
    if (decoded.height() < cfg.min_box_side || decoded.width() < cfg.min_box_side) continue;
    boxes.push_back(decoded);
    scores.push_back(rpn_objectness[a]);
  }

  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  if (static_cast<int>(order.size()) > cfg.pre_nms_top_n) order.resize(cfg.pre_nms_top_n);

  std::vector<BBox> top_boxes;
  std::vector<double> top_scores;
  top_boxes.reserve(order.size());
  for (int idx : order) {
    top_boxes.push_back(boxes[static_cast<std::size_t>(idx)]);
    top_scores.push_back(scores[static_cast<std::size_t>(idx)]);
  }
  std::vector<int> keep = nms(top_boxes, top_scores, cfg.nms_threshold);
  if (static_cast<int>(keep.size()) > cfg.post_nms_top_n) keep.resize(cfg.post_nms_top_n);

  std::vector<Proposal> out;
  out.reserve(keep.size());
  for (int idx : keep) {
    out.push_back(Proposal{top_boxes[static_cast<std::size_t>(idx)],
                           top_scores[static_cast<std::size_t>(idx)]});
  }
  return out;
}

std::vector<int> ohem_select(const std::vector<BBox>& rois,
                             const std::vector<double>& per_roi_losses,
                             int budget, double dedup_iou) {
  if (rois.size() != per_roi_losses.size()) {
    throw std::invalid_argument("ohem_select: rois/losses length mismatch");
  }
  if (budget < 1) throw std::invalid_argument("ohem_select: budget must be >= 1");
  std::vector<int> survivors = nms(rois, per_roi_losses, dedup_iou);
  // nms already emits in descending loss order with the index tie-break
  if (static_cast<int>(survivors.size()) > budget) survivors.resize(budget);
  return survivors;
}

}  // namespace mammodet
