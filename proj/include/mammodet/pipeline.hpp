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

#ifndef MAMMODET_PIPELINE_HPP
#define MAMMODET_PIPELINE_HPP

#include <string>

#include "mammodet/config.hpp"
#include "mammodet/data_io.hpp"
#include "mammodet/evaluation.hpp"

namespace mammodet {

// Writes <out_dir>/train and <out_dir>/test phantom datasets. The test set
// draws from an independent stream of the configured seed.
void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir);

struct TrainSummary {
  int steps = 0;
  int images = 0;
  double final_total_loss = 0.0;
  std::string weights_path;
};

// Trains on the dataset under data_dir and writes weights.bin plus
// train_log.csv into out_dir.
TrainSummary run_train(const ExperimentConfig& cfg, const std::string& data_dir,
                       const std::string& out_dir);

// Scores every test image under the configured transform set and writes
// scores.csv (the ScoreTable export) into out_dir. Returns its path.
std::string run_infer(const ExperimentConfig& cfg, const std::string& data_dir,
                      const std::string& weights_path, const std::string& out_dir);

struct EvalReport {
  bool has_augmented = false;
  double breast_auc_identity = 0.0;
  double breast_auc_augmented = 0.0;
  double subject_auc_identity = 0.0;
  double subject_auc_augmented = 0.0;
};

// Aggregates a ScoreTable over the exams of data_dir and writes ROC curve
// files into out_dir. Identity-only and 8-variant (when present) metrics
// are both reported.
EvalReport run_evaluate(const ExperimentConfig& cfg, const std::string& data_dir,
                        const std::string& scores_path, const std::string& out_dir);

}  // namespace mammodet

#endif  // MAMMODET_PIPELINE_HPP
