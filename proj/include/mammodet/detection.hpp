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

#ifndef MAMMODET_DETECTION_HPP
#define MAMMODET_DETECTION_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "mammodet/bbox.hpp"

namespace mammodet {

// The three finding classes. Background and "negative" are the same class,
// so a detector output has exactly these probabilities and nothing else.
enum ClassId : int { kNegative = 0, kBenign = 1, kMalignant = 2 };
inline constexpr int kNumClasses = 3;

struct Detection {
  BBox box;
  std::array<double, kNumClasses> class_scores{};  // sums to 1
  double objectness = 0.0;
};

struct AnchorConfig {
  std::vector<double> base_scales;   // pixel side lengths at ratio 1
  std::vector<double> aspect_ratios; // height / width
  int stride = 16;                   // feature-map stride in input pixels
};

enum class RpnLabel : int { kNegative = 0, kPositive = 1, kIgnore = -1 };

struct RpnAssignment {
  std::vector<RpnLabel> labels;
  std::vector<int> matched_gt;  // gt index for positives, -1 otherwise
};

struct ProposalConfig {
  int pre_nms_top_n = 2000;
  int post_nms_top_n = 64;
  double nms_threshold = 0.1;
  double min_box_side = 4.0;
};

double iou(const BBox& a, const BBox& b);

// One anchor per (location, scale, ratio), row-major over locations, then
// scale-major, ratio-minor. Centered at ((i + 0.5) * stride, (j + 0.5) * stride).
std::vector<BBox> generate_anchors(const AnchorConfig& cfg, int feat_h, int feat_w);

// Positive iff max-IoU >= positive_iou or the anchor attains some gt's best
// IoU; negative iff max-IoU < negative_iou; otherwise ignore.
RpnAssignment assign_rpn_labels(const std::vector<BBox>& anchors,
                                const std::vector<BBox>& gt_boxes,
                                double positive_iou = 0.5,
                                double negative_iou = 0.3);

// (d_center_row/h, d_center_col/w, log dh, log dw)
std::array<double, 4> encode_box(const BBox& anchor, const BBox& gt);
BBox decode_box(const BBox& anchor, const std::array<double, 4>& deltas);

// Greedy descending-score suppression; ties broken by lower index. A box is
// dropped when its IoU with any survivor exceeds the threshold.
std::vector<int> nms(const std::vector<BBox>& boxes,
                     const std::vector<double>& scores, double iou_threshold);

struct Proposal {
  BBox box;
  double objectness = 0.0;
};

// Decode every anchor, clip to the image, drop boxes under min side, keep
// top-N_pre by objectness, NMS, keep top-N_post.
std::vector<Proposal> propose(const std::vector<double>& rpn_objectness,
                              const std::vector<std::array<double, 4>>& rpn_deltas,
                              const std::vector<BBox>& anchors, int image_h,
                              int image_w, const ProposalConfig& cfg);

// Highest-loss ROI selection: NMS de-duplication at dedup_iou with losses as
// scores, then the top `budget` survivors in descending loss order.
std::vector<int> ohem_select(const std::vector<BBox>& rois,
                             const std::vector<double>& per_roi_losses,
                             int budget, double dedup_iou = 0.7);

}  // namespace mammodet

#endif  // MAMMODET_DETECTION_HPP
