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

#ifndef MAMMODET_CONFIG_HPP
#define MAMMODET_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mammodet/inference.hpp"
#include "mammodet/model.hpp"
#include "mammodet/trainer.hpp"

namespace mammodet {

struct PhantomConfig {
  int image_side = 256;
  int train_exams = 200;
  int test_exams = 100;
  double malignant_prevalence = 0.3;
  double benign_rate = 1.0;  // benign odds relative to the malignant prevalence
  int devices = 2;
  std::uint64_t seed = 7;
};

struct InferConfig {
  bool augment = true;
  ImageScoreRule score_rule = ImageScoreRule::kMax;
  int score_topk = 3;
  LateralityRule aggregate_rule = LateralityRule::kMean;
};

struct SystemConfig {
  int threads = 4;
  std::string kernels = "auto";  // auto | scalar | avx2
};

// Everything an experiment run reads: phantom generation, model shape,
// training, inference, and host settings. Text format: a versioned header
// line, then flat [section] key = value entries. Unknown keys are hard
// errors; absent keys keep their defaults.
struct ExperimentConfig {
  PhantomConfig phantom;
  ModelConfig model;
  std::uint64_t init_seed = 1;
  TrainConfig train;
  bool train_findings_only = true;
  InferConfig infer;
  SystemConfig system;

  ExperimentConfig();
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
std::string config_to_text(const ExperimentConfig& cfg);
void save_config(const std::string& path, const ExperimentConfig& cfg);

// applies one "section.key=value" override (the CLI --set flag)
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// activates system settings (threads, kernel backend) process-wide
void apply_system_config(const SystemConfig& cfg);

}  // namespace mammodet

#endif  // MAMMODET_CONFIG_HPP
