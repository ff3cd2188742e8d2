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

#include "mammodet/inference.hpp"

#include <algorithm>
#include <stdexcept>

namespace mammodet {

std::vector<DihedralTransform> all_dihedral_transforms() {
  std::vector<DihedralTransform> out;
  for (int flip = 0; flip < 2; ++flip) {
    for (int rot = 0; rot < 4; ++rot) {
      out.push_back(DihedralTransform{rot, flip == 1});
    }
  }
  return out;
}

DihedralTransform compose(const DihedralTransform& t2, const DihedralTransform& t1) {
  // flips conjugate rotations to their inverses: F R^k = R^-k F
  if (!t1.hflip) {
    return DihedralTransform{(t1.rot_quarter + t2.rot_quarter) % 4, t2.hflip};
  }
  return DihedralTransform{((t1.rot_quarter - t2.rot_quarter) % 4 + 4) % 4,
                           !t2.hflip};
}

DihedralTransform inverse(const DihedralTransform& t) {
  if (t.hflip) return t;  // reflections are involutions
  return DihedralTransform{(4 - t.rot_quarter) % 4, false};
}

namespace {

// one counterclockwise quarter turn: out[i][j] = in[j][W-1-i]
Tensor rotate_ccw_once(const Tensor& image) {
  const int channels = image.extent(0);
  const int h = image.extent(1);
  const int w = image.extent(2);
  Tensor out({channels, w, h});
  for (int c = 0; c < channels; ++c) {
    const double* src = image.data() + static_cast<std::size_t>(c) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(c) * h * w;
    for (int i = 0; i < w; ++i) {
      for (int j = 0; j < h; ++j) {
        dst[static_cast<std::size_t>(i) * h + j] =
            src[static_cast<std::size_t>(j) * w + (w - 1 - i)];
      }
    }
  }
  return out;
}

Tensor hflip_image(const Tensor& image) {
  const int channels = image.extent(0);
  const int h = image.extent(1);
  const int w = image.extent(2);
  Tensor out(image.shape());
  for (int c = 0; c < channels; ++c) {
    const double* src = image.data() + static_cast<std::size_t>(c) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(c) * h * w;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        dst[static_cast<std::size_t>(i) * w + j] =
            src[static_cast<std::size_t>(i) * w + (w - 1 - j)];
      }
    }
  }
  return out;
}

}  // namespace

Tensor apply_transform(const Tensor& image, const DihedralTransform& t) {
  if (image.rank() != 3) {
    throw std::invalid_argument("apply_transform: image must be [C,H,W]");
  }
  Tensor out = image;
  for (int k = 0; k < t.rot_quarter; ++k) out = rotate_ccw_once(out);
  if (t.hflip) out = hflip_image(out);
  return out;
}

BBox transform_box(const BBox& box, const DihedralTransform& t, int image_h,
                   int image_w) {
  double h = static_cast<double>(image_h);
  double w = static_cast<double>(image_w);
  double r0 = box.row_min, c0 = box.col_min, r1 = box.row_max, c1 = box.col_max;
  for (int k = 0; k < t.rot_quarter; ++k) {
    // point map (r, c) -> (W-1-c, r), extents swap
    const double nr0 = (w - 1.0) - c1;
    const double nr1 = (w - 1.0) - c0;
    const double nc0 = r0;
    const double nc1 = r1;
    r0 = nr0;
    r1 = nr1;
    c0 = nc0;
    c1 = nc1;
    std::swap(h, w);
  }
  if (t.hflip) {
    const double nc0 = (w - 1.0) - c1;
    const double nc1 = (w - 1.0) - c0;
    c0 = nc0;
    c1 = nc1;
  }
  return BBox{r0, c0, r1, c1};
}

std::string laterality_name(Laterality l) {
  return l == Laterality::kLeft ? "L" : "R";
}
std::string view_name(View v) { return v == View::kCc ? "CC" : "MLO"; }

Laterality parse_laterality(const std::string& s) {
  if (s == "L") return Laterality::kLeft;
  if (s == "R") return Laterality::kRight;
  throw std::invalid_argument("unknown laterality '" + s + "'");
}

View parse_view(const std::string& s) {
  if (s == "CC") return View::kCc;
  if (s == "MLO") return View::kMlo;
  throw std::invalid_argument("unknown view '" + s + "'");
}

void ScoreTable::put(const std::string& image_id, const DihedralTransform& t,
                     double score) {
  if (score < 0.0 || score > 1.0) {
    throw std::invalid_argument("score table: score outside [0,1]");
  }
  entries[{image_id, t}] = score;
}

bool ScoreTable::has(const std::string& image_id, const DihedralTransform& t) const {
  return entries.count({image_id, t}) > 0;
}

double ScoreTable::get(const std::string& image_id, const DihedralTransform& t) const {
  auto it = entries.find({image_id, t});
  if (it == entries.end()) {
    throw std::invalid_argument("score table: missing entry for image '" +
                                image_id + "' rot " + std::to_string(t.rot_quarter) +
                                " flip " + std::to_string(t.hflip ? 1 : 0));
  }
  return it->second;
}

double image_score(const std::vector<Detection>& detections, ImageScoreRule rule,
                   int top_k) {
  if (detections.empty()) return 0.0;
  std::vector<double> malignant;
  malignant.reserve(detections.size());
  for (const Detection& d : detections) malignant.push_back(d.class_scores[kMalignant]);
  std::sort(malignant.begin(), malignant.end(), std::greater<double>());
  if (rule == ImageScoreRule::kMax) return malignant.front();
  const int k = std::min<int>(top_k, static_cast<int>(malignant.size()));
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += malignant[static_cast<std::size_t>(i)];
  return acc / static_cast<double>(k);
}

SubjectAggregate aggregate_subject(const ScoreTable& table, const Exam& exam,
                                   const std::vector<DihedralTransform>& transforms,
                                   LateralityRule rule) {
  if (exam.images.empty()) {
    throw std::invalid_argument("aggregate_subject: exam '" + exam.subject_id +
                                "' has no images");
  }
  if (transforms.empty()) {
    throw std::invalid_argument("aggregate_subject: no transforms requested");
  }
  SubjectAggregate out;
  std::map<Laterality, std::vector<double>> scores;
  for (const auto& [key, image_id] : exam.images) {
    for (const DihedralTransform& t : transforms) {
      scores[key.laterality].push_back(table.get(image_id, t));
    }
  }
  bool first = true;
  for (auto& [lat, values] : scores) {
    double combined;
    if (rule == LateralityRule::kMean) {
      // sorted summation: permutation-invariant at the bit level
      std::sort(values.begin(), values.end());
      double acc = 0.0;
      for (double v : values) acc += v;
      combined = acc / static_cast<double>(values.size());
    } else {
      combined = *std::max_element(values.begin(), values.end());
    }
    out.per_laterality[lat] = combined;
    if (first || combined > out.subject_score) out.subject_score = combined;
    first = false;
  }
  return out;
}

}  // namespace mammodet
