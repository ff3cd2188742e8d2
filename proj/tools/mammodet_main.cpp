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

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mammodet/backbone.hpp"
#include "mammodet/config.hpp"
#include "mammodet/gradcheck.hpp"
#include "mammodet/pipeline.hpp"

namespace {

using namespace mammodet;

ExperimentConfig resolve_config(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  for (const std::string& assignment : overrides) apply_override(cfg, assignment);
  apply_system_config(cfg.system);
  return cfg;
}

int cmd_gradcheck(const ExperimentConfig&, std::uint64_t seed) {
  const std::vector<GradCheckResult> results = run_gradient_suite(seed);
  bool all_pass = true;
  double worst = 0.0;
  for (const GradCheckResult& r : results) {
    std::printf("%-22s max_rel_err %.3e  tol %.0e  %s\n", r.name.c_str(),
                r.max_rel_err, r.tolerance, r.pass() ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass();
    worst = std::max(worst, r.max_rel_err);
  }
  std::printf("gradcheck %s (worst %.3e)\n", all_pass ? "PASS" : "FAIL", worst);
  return all_pass ? 0 : 1;
}

int cmd_memplan(const ExperimentConfig& cfg, const std::vector<int>& sides,
                const std::vector<double>& budgets_gb, int batch) {
  std::printf("%-8s %-16s %-16s %-16s\n", "side", "activation_B", "param_B", "peak_B");
  for (int side : sides) {
    const MemoryPlan plan = memory_plan(cfg.model.blocks, side, 8, batch,
                                        cfg.model.deformable_backbone);
    std::printf("%-8d %-16llu %-16llu %-16llu\n", side,
                static_cast<unsigned long long>(plan.activation_bytes),
                static_cast<unsigned long long>(plan.param_bytes),
                static_cast<unsigned long long>(plan.peak_bytes));
  }

  std::vector<BlockSpec> doubled = cfg.model.blocks;
  for (BlockSpec& b : doubled) {
    if (b.kind != BlockSpec::Kind::kStemCbr) b.repeats *= 2;
  }
  std::printf("\n%-12s %-20s %-20s\n", "budget", "feasible_side", "feasible_side_2x_repeats");
  for (double gb : budgets_gb) {
    const auto budget = static_cast<std::uint64_t>(gb * 1024.0 * 1024.0 * 1024.0);
    const int side = feasible_input_side(cfg.model.blocks, budget, 8, batch,
                                         cfg.model.deformable_backbone);
    const int side2 = feasible_input_side(doubled, budget, 8, batch,
                                          cfg.model.deformable_backbone);
    std::printf("%-12.3g %-20d %-20d\n", gb, side, side2);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deformable R-FCN lesion detection on synthetic mammography phantoms"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "experiment config file");
  app.add_option("--set", overrides, "override a config key (section.key=value)");

  auto* gen = app.add_subcommand("gen-data", "generate phantom train/test datasets");
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a detector");
  std::string train_data, train_out;
  train->add_option("--data", train_data, "training dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();

  auto* infer = app.add_subcommand("infer", "score a dataset, write the score table");
  std::string infer_data, infer_weights, infer_out;
  infer->add_option("--data", infer_data, "dataset directory")->required();
  infer->add_option("--weights", infer_weights, "weights file")->required();
  infer->add_option("--out", infer_out, "output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "breast/subject ROC and AUC");
  std::string eval_data, eval_scores, eval_out;
  evaluate->add_option("--data", eval_data, "dataset directory")->required();
  evaluate->add_option("--scores", eval_scores, "score table csv")->required();
  evaluate->add_option("--out", eval_out, "output directory")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  std::uint64_t gc_seed = 20260810ULL;
  gradcheck->add_option("--seed", gc_seed, "suite seed");

  auto* memplan = app.add_subcommand("memplan", "activation/parameter memory table");
  std::vector<int> mp_sides = {256, 512, 1024};
  std::vector<double> mp_budgets = {0.25, 1.0, 4.0};
  int mp_batch = 1;
  memplan->add_option("--sides", mp_sides, "input sides to tabulate");
  memplan->add_option("--budgets-gb", mp_budgets, "memory budgets in GiB");
  memplan->add_option("--batch", mp_batch, "batch size");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(config_path, overrides);
    if (gen->parsed()) {
      run_gen_data(cfg, gen_out);
      std::printf("wrote %s/train and %s/test\n", gen_out.c_str(), gen_out.c_str());
      return 0;
    }
    if (train->parsed()) {
      const TrainSummary summary = run_train(cfg, train_data, train_out);
      std::printf("trained %d steps over %d images; final total loss %.6g\n",
                  summary.steps, summary.images, summary.final_total_loss);
      std::printf("weights: %s\n", summary.weights_path.c_str());
      return 0;
    }
    if (infer->parsed()) {
      const std::string path = run_infer(cfg, infer_data, infer_weights, infer_out);
      std::printf("score table: %s\n", path.c_str());
      return 0;
    }
    if (evaluate->parsed()) {
      const EvalReport report = run_evaluate(cfg, eval_data, eval_scores, eval_out);
      std::printf("breast_auc_identity = %.6f\n", report.breast_auc_identity);
      std::printf("subject_auc_identity = %.6f\n", report.subject_auc_identity);
      if (report.has_augmented) {
        std::printf("breast_auc_augmented = %.6f\n", report.breast_auc_augmented);
        std::printf("subject_auc_augmented = %.6f\n", report.subject_auc_augmented);
      } else {
        std::printf("augmented metrics unavailable: score table lacks the 8-variant entries\n");
      }
      return 0;
    }
    if (gradcheck->parsed()) return cmd_gradcheck(cfg, gc_seed);
    if (memplan->parsed()) return cmd_memplan(cfg, mp_sides, mp_budgets, mp_batch);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
