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

#ifndef MAMMODET_EVALUATION_HPP
#define MAMMODET_EVALUATION_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mammodet/inference.hpp"

namespace mammodet {

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
  double auc = 0.0;
};

// Mann-Whitney U normalized by #pos * #neg, ties counted 1/2. Needs at
// least one positive and one negative label (rejected input otherwise).
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

// Empirical ROC with one point per distinct score threshold; trapezoidal
// area equals the rank-based AUC.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& labels);

struct LabeledRows {
  std::vector<double> scores;
  std::vector<bool> labels;
  std::vector<std::string> row_ids;
};

// One row per present breast: label = that laterality has a malignant
// ground-truth finding. Exams missing from `aggregates` are rejected.
LabeledRows breastwise_rows(const std::vector<Exam>& exams,
                            const std::map<std::string, SubjectAggregate>& aggregates);
// One row per subject: label = either laterality is malignant.
LabeledRows subjectwise_rows(const std::vector<Exam>& exams,
                             const std::map<std::string, SubjectAggregate>& aggregates);

// One "fpr,tpr" pair per line, then a summary line with the AUC.
std::string roc_to_text(const RocCurve& curve, char delimiter = ',');

}  // namespace mammodet

#endif  // MAMMODET_EVALUATION_HPP
