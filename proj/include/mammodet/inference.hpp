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

#ifndef MAMMODET_INFERENCE_HPP
#define MAMMODET_INFERENCE_HPP

#include <map>
#include <string>
#include <vector>

#include "mammodet/bbox.hpp"
#include "mammodet/detection.hpp"
#include "mammodet/tensor.hpp"

namespace mammodet {

// One of the 8 symmetries of the square: rotate counterclockwise by
// rot_quarter * 90 degrees, then flip horizontally if hflip.
struct DihedralTransform {
  int rot_quarter = 0;  // 0..3
  bool hflip = false;

  bool is_identity() const { return rot_quarter == 0 && !hflip; }
};

inline bool operator==(const DihedralTransform& a, const DihedralTransform& b) {
  return a.rot_quarter == b.rot_quarter && a.hflip == b.hflip;
}
inline bool operator<(const DihedralTransform& a, const DihedralTransform& b) {
  if (a.rot_quarter != b.rot_quarter) return a.rot_quarter < b.rot_quarter;
  return a.hflip < b.hflip;
}

// canonical enumeration order: rot 0..3 within flip 0, then flip 1
std::vector<DihedralTransform> all_dihedral_transforms();
// t2 after t1
DihedralTransform compose(const DihedralTransform& t2, const DihedralTransform& t1);
DihedralTransform inverse(const DihedralTransform& t);

// Exact pixel permutation of a [C,H,W] tensor (rotations never resample).
Tensor apply_transform(const Tensor& image, const DihedralTransform& t);
// Maps box corners through the same pixel permutation and re-sorts them.
BBox transform_box(const BBox& box, const DihedralTransform& t, int image_h,
                   int image_w);

enum class Laterality : int { kLeft = 0, kRight = 1 };
enum class View : int { kCc = 0, kMlo = 1 };

std::string laterality_name(Laterality l);
std::string view_name(View v);
Laterality parse_laterality(const std::string& s);
View parse_view(const std::string& s);

struct ExamImageKey {
  Laterality laterality;
  View view;
  bool operator<(const ExamImageKey& o) const {
    if (laterality != o.laterality) return laterality < o.laterality;
    return view < o.view;
  }
};

// One subject's screening study: up to 4 images plus per-breast truth.
struct Exam {
  std::string subject_id;
  std::map<ExamImageKey, std::string> images;  // -> image id
  std::map<Laterality, bool> malignant;        // ground truth per breast
};

// (image id, transform) -> malignancy score in [0, 1]
struct ScoreTable {
  std::map<std::pair<std::string, DihedralTransform>, double> entries;

  void put(const std::string& image_id, const DihedralTransform& t, double score);
  bool has(const std::string& image_id, const DihedralTransform& t) const;
  double get(const std::string& image_id, const DihedralTransform& t) const;
};

enum class ImageScoreRule { kMax, kMeanTopK };
enum class LateralityRule { kMean, kMax };

// Per-image malignancy score from a detection list: maximum malignant-class
// probability (or the mean of the top-k under kMeanTopK); 0 with no
// detections.
double image_score(const std::vector<Detection>& detections,
                   ImageScoreRule rule = ImageScoreRule::kMax, int top_k = 3);

struct SubjectAggregate {
  std::map<Laterality, double> per_laterality;
  double subject_score = 0.0;
};

// Per-laterality mean over all of its (view, transform) scores, then the
// maximum over present lateralities. `transforms` selects which table
// entries participate (all 8 for augmented scoring, identity-only
// otherwise). Missing entries are rejected inputs, the error names the gap.
// The per-laterality mean sorts its addends so any permutation of the same
// score multiset gives the bit-identical result.
SubjectAggregate aggregate_subject(
    const ScoreTable& table, const Exam& exam,
    const std::vector<DihedralTransform>& transforms,
    LateralityRule rule = LateralityRule::kMean);

}  // namespace mammodet

#endif  // MAMMODET_INFERENCE_HPP
