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

#include "mammodet/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mammodet/kernels.hpp"
#include "mammodet/trainer.hpp"

namespace mammodet {

namespace fs = std::filesystem;

void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const GeneratedDataset train =
      generate_dataset(cfg.phantom, cfg.phantom.train_exams, cfg.phantom.seed);
  write_dataset((fs::path(out_dir) / "train").string(), train);
  // decorrelated stream for the held-out exams
  const GeneratedDataset test = generate_dataset(
      cfg.phantom, cfg.phantom.test_exams, Rng(cfg.phantom.seed ^ 0x7e57da7aULL).next_u64());
  write_dataset((fs::path(out_dir) / "test").string(), test);
}

namespace {

std::vector<TrainingImage> to_training_images(const LoadedDataset& data,
                                              bool findings_only) {
  std::vector<TrainingImage> out;
  for (const ImageRecord& rec : data.images) {
    if (findings_only && rec.findings.empty()) continue;
    TrainingImage img;
    img.image_id = rec.image_id;
    img.image = load_normalized_image(data, rec);
    for (const Finding& f : rec.findings) {
      img.gt_boxes.push_back(f.box);
      img.gt_classes.push_back(f.class_id);
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace

TrainSummary run_train(const ExperimentConfig& cfg, const std::string& data_dir,
                       const std::string& out_dir) {
  fs::create_directories(out_dir);
  const LoadedDataset data = load_dataset(data_dir);
  const std::vector<TrainingImage> images =
      to_training_images(data, cfg.train_findings_only);
  if (images.empty()) {
    throw std::runtime_error("train: dataset '" + data_dir +
                             "' has no usable training images");
  }

  DetectionModel model = DetectionModel::build(cfg.model, cfg.init_seed);
  SgdState state = make_sgd_state(model);

  std::string log_text = "epoch,image_id,rot,flip,rpn_cls,rpn_reg,roi_cls,roi_reg,total\n";
  TrainSummary summary;
  char buf[256];
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const std::vector<StepLog> log = train_epoch(model, images, cfg.train, state);
    for (const StepLog& entry : log) {
      std::snprintf(buf, sizeof(buf), "%d,%s,%d,%d,%.8g,%.8g,%.8g,%.8g,%.8g\n",
                    epoch, entry.image_id.c_str(), entry.transform.rot_quarter,
                    entry.transform.hflip ? 1 : 0, entry.loss.rpn_cls,
                    entry.loss.rpn_reg, entry.loss.roi_cls, entry.loss.roi_reg,
                    entry.loss.total);
      log_text += buf;
      summary.final_total_loss = entry.loss.total;
    }
  }
  summary.steps = static_cast<int>(state.step);
  summary.images = static_cast<int>(images.size());
  summary.weights_path = (fs::path(out_dir) / "weights.bin").string();
  save_model(summary.weights_path, model);
  std::ofstream log_file(fs::path(out_dir) / "train_log.csv", std::ios::binary);
  if (!log_file) throw std::runtime_error("train: cannot write train_log.csv");
  log_file << log_text;
  save_config((fs::path(out_dir) / "config_used.cfg").string(), cfg);
  return summary;
}

std::string run_infer(const ExperimentConfig& cfg, const std::string& data_dir,
                      const std::string& weights_path, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const LoadedDataset data = load_dataset(data_dir);
  DetectionModel model = DetectionModel::build(cfg.model, cfg.init_seed);
  load_model(weights_path, model);

  std::vector<DihedralTransform> transforms;
  if (cfg.infer.augment) {
    transforms = all_dihedral_transforms();
  } else {
    transforms.push_back(DihedralTransform{0, false});
  }

  const int n = static_cast<int>(data.images.size());
  std::vector<std::vector<double>> scores(static_cast<std::size_t>(n));
  kernels::parallel_for(0, n, 1, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const ImageRecord& rec = data.images[static_cast<std::size_t>(i)];
      const Tensor image = load_normalized_image(data, rec);
      auto& row = scores[static_cast<std::size_t>(i)];
      row.reserve(transforms.size());
      for (const DihedralTransform& t : transforms) {
        const std::vector<Detection> dets = model.detect(apply_transform(image, t));
        row.push_back(image_score(dets, cfg.infer.score_rule, cfg.infer.score_topk));
      }
    }
  });

  ScoreTable table;
  for (int i = 0; i < n; ++i) {
    const ImageRecord& rec = data.images[static_cast<std::size_t>(i)];
    for (std::size_t ti = 0; ti < transforms.size(); ++ti) {
      table.put(rec.image_id, transforms[ti], scores[static_cast<std::size_t>(i)][ti]);
    }
  }
  const std::string path = (fs::path(out_dir) / "scores.csv").string();
  write_score_table(path, table, data.images, transforms);
  return path;
}

namespace {

std::map<std::string, SubjectAggregate> aggregate_all(
    const ScoreTable& table, const std::vector<Exam>& exams,
    const std::vector<DihedralTransform>& transforms, LateralityRule rule) {
  std::map<std::string, SubjectAggregate> out;
  for (const Exam& exam : exams) {
    out[exam.subject_id] = aggregate_subject(table, exam, transforms, rule);
  }
  return out;
}

void write_roc(const std::string& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("evaluate: cannot write '" + path + "'");
  out << roc_to_text(curve);
}

}  // namespace

EvalReport run_evaluate(const ExperimentConfig& cfg, const std::string& data_dir,
                        const std::string& scores_path, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const LoadedDataset data = load_dataset(data_dir);
  const ScoreTable table = read_score_table(scores_path);

  const std::vector<DihedralTransform> identity = {DihedralTransform{0, false}};
  const std::vector<DihedralTransform> full = all_dihedral_transforms();

  EvalReport report;
  report.has_augmented = true;
  for (const Exam& exam : data.exams) {
    for (const auto& [key, image_id] : exam.images) {
      for (const DihedralTransform& t : full) {
        if (!table.has(image_id, t)) report.has_augmented = false;
      }
    }
  }

  auto evaluate_set = [&](const std::vector<DihedralTransform>& transforms,
                          const std::string& tag, double* breast_auc,
                          double* subject_auc) {
    const auto aggregates =
        aggregate_all(table, data.exams, transforms, cfg.infer.aggregate_rule);
    const LabeledRows breast = breastwise_rows(data.exams, aggregates);
    const LabeledRows subject = subjectwise_rows(data.exams, aggregates);
    const RocCurve breast_curve = roc_curve(breast.scores, breast.labels);
    const RocCurve subject_curve = roc_curve(subject.scores, subject.labels);
    *breast_auc = breast_curve.auc;
    *subject_auc = subject_curve.auc;
    write_roc((fs::path(out_dir) / ("roc_breast_" + tag + ".csv")).string(), breast_curve);
    write_roc((fs::path(out_dir) / ("roc_subject_" + tag + ".csv")).string(), subject_curve);
  };

  evaluate_set(identity, "identity", &report.breast_auc_identity,
               &report.subject_auc_identity);
  if (report.has_augmented) {
    evaluate_set(full, "augmented", &report.breast_auc_augmented,
                 &report.subject_auc_augmented);
  }
  return report;
}

}  // namespace mammodet
