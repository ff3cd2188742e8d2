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

#include "mammodet/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mammodet {

namespace {

void check_two_classes(const std::vector<double>& scores,
                       const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("auc: scores/labels length mismatch");
  }
  std::size_t pos = 0;
  for (bool l : labels) {
    if (l) ++pos;
  }
  if (pos == 0 || pos == labels.size()) {
    throw std::invalid_argument("auc: need at least one positive and one negative");
  }
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  check_two_classes(scores, labels);
  // average ranks with midranks for ties, then the rank-sum statistic
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::size_t num_pos = 0;
  for (bool l : labels) {
    if (l) ++num_pos;
  }
  const std::size_t num_neg = labels.size() - num_pos;

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    // ranks i+1 .. j+1 share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t q = i; q <= j; ++q) {
      if (labels[order[q]]) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(num_pos) *
                                       static_cast<double>(num_pos + 1);
  return u / (static_cast<double>(num_pos) * static_cast<double>(num_neg));
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& labels) {
  check_two_classes(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::size_t num_pos = 0;
  for (bool l : labels) {
    if (l) ++num_pos;
  }
  const std::size_t num_neg = labels.size() - num_pos;

  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t q = i; q <= j; ++q) {
      if (labels[order[q]]) {
        ++tp;
      } else {
        ++fp;
      }
    }
    curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(num_neg),
                              static_cast<double>(tp) / static_cast<double>(num_pos));
    i = j + 1;
  }
  double area = 0.0;
  for (std::size_t p = 1; p < curve.points.size(); ++p) {
    const auto& [x0, y0] = curve.points[p - 1];
    const auto& [x1, y1] = curve.points[p];
    area += (x1 - x0) * 0.5 * (y0 + y1);
  }
  curve.auc = area;
  return curve;
}

namespace {

const SubjectAggregate& aggregate_for(
    const std::map<std::string, SubjectAggregate>& aggregates,
    const std::string& subject_id) {
  auto it = aggregates.find(subject_id);
  if (it == aggregates.end()) {
    throw std::invalid_argument("evaluation: no aggregate for subject '" +
                                subject_id + "'");
  }
  return it->second;
}

}  // namespace

LabeledRows breastwise_rows(const std::vector<Exam>& exams,
                            const std::map<std::string, SubjectAggregate>& aggregates) {
  LabeledRows rows;
  for (const Exam& exam : exams) {
    const SubjectAggregate& agg = aggregate_for(aggregates, exam.subject_id);
    for (const auto& [lat, score] : agg.per_laterality) {
      auto truth = exam.malignant.find(lat);
      if (truth == exam.malignant.end()) {
        throw std::invalid_argument("evaluation: subject '" + exam.subject_id +
                                    "' has a score but no label for laterality " +
                                    laterality_name(lat));
      }
      rows.scores.push_back(score);
      rows.labels.push_back(truth->second);
      rows.row_ids.push_back(exam.subject_id + "_" + laterality_name(lat));
    }
  }
  return rows;
}

LabeledRows subjectwise_rows(const std::vector<Exam>& exams,
                             const std::map<std::string, SubjectAggregate>& aggregates) {
  LabeledRows rows;
  for (const Exam& exam : exams) {
    const SubjectAggregate& agg = aggregate_for(aggregates, exam.subject_id);
    bool label = false;
    for (const auto& [lat, m] : exam.malignant) label = label || m;
    rows.scores.push_back(agg.subject_score);
    rows.labels.push_back(label);
    rows.row_ids.push_back(exam.subject_id);
  }
  return rows;
}

std::string roc_to_text(const RocCurve& curve, char delimiter) {
  std::ostringstream os;
  os.precision(12);
  for (const auto& [fpr, tpr] : curve.points) {
    os << fpr << delimiter << tpr << "\n";
  }
  os << "auc" << delimiter << curve.auc << "\n";
  return os.str();
}

}  // namespace mammodet
