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

#include "mammodet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mammodet/kernels.hpp"

namespace mammodet {

namespace {

constexpr const char* kHeader = "mammodet-config v1";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw std::invalid_argument("config: key '" + key + "' expects " + want +
                              ", got '" + value + "'");
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "an integer");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "an unsigned integer");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return out;
  } catch (const std::invalid_argument&) {
    bad_value(key, value, "a number");
  } catch (const std::out_of_range&) {
    bad_value(key, value, "a number in range");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, value, "a comma-separated number list");
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) bad_value(key, value, "a non-empty number list");
  return out;
}

// kind:repeats:out_channels:downsample entries joined by '|'
std::vector<BlockSpec> parse_blocks(const std::string& key, const std::string& value) {
  std::vector<BlockSpec> out;
  std::stringstream ss(value);
  std::string entry;
  while (std::getline(ss, entry, '|')) {
    entry = trim(entry);
    std::stringstream es(entry);
    std::string kind, repeats, channels, down;
    if (!std::getline(es, kind, ':') || !std::getline(es, repeats, ':') ||
        !std::getline(es, channels, ':') || !std::getline(es, down)) {
      bad_value(key, entry, "kind:repeats:out_channels:downsample");
    }
    BlockSpec spec;
    spec.kind = parse_block_kind(trim(kind));
    spec.repeats = parse_int(key, trim(repeats));
    spec.out_channels = parse_int(key, trim(channels));
    spec.downsample = parse_bool(key, trim(down));
    out.push_back(spec);
  }
  if (out.empty()) bad_value(key, value, "a non-empty block list");
  return out;
}

std::string blocks_to_string(const std::vector<BlockSpec>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) out += " | ";
    out += block_kind_name(blocks[i].kind) + ":" + std::to_string(blocks[i].repeats) +
           ":" + std::to_string(blocks[i].out_channels) + ":" +
           (blocks[i].downsample ? "1" : "0");
  }
  return out;
}

std::string doubles_to_string(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(12);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) os << ", ";
    os << v[i];
  }
  return os.str();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key,
                                  const std::string& value)>;

const std::map<std::string, Setter>& schema() {
  static const std::map<std::string, Setter> s = {
      {"phantom.image_side", [](auto& c, auto& k, auto& v) { c.phantom.image_side = parse_int(k, v); }},
      {"phantom.train_exams", [](auto& c, auto& k, auto& v) { c.phantom.train_exams = parse_int(k, v); }},
      {"phantom.test_exams", [](auto& c, auto& k, auto& v) { c.phantom.test_exams = parse_int(k, v); }},
      {"phantom.malignant_prevalence",
       [](auto& c, auto& k, auto& v) {
         c.phantom.malignant_prevalence = parse_double(k, v);
         if (c.phantom.malignant_prevalence < 0.0 || c.phantom.malignant_prevalence > 1.0) {
           bad_value(k, v, "a fraction in [0,1]");
         }
       }},
      {"phantom.benign_rate", [](auto& c, auto& k, auto& v) { c.phantom.benign_rate = parse_double(k, v); }},
      {"phantom.devices", [](auto& c, auto& k, auto& v) { c.phantom.devices = parse_int(k, v); }},
      {"phantom.seed", [](auto& c, auto& k, auto& v) { c.phantom.seed = parse_u64(k, v); }},

      {"backbone.blocks", [](auto& c, auto& k, auto& v) { c.model.blocks = parse_blocks(k, v); }},
      {"backbone.deformable_last", [](auto& c, auto& k, auto& v) { c.model.deformable_backbone = parse_bool(k, v); }},
      {"backbone.rpn_hidden_channels", [](auto& c, auto& k, auto& v) { c.model.rpn_hidden_channels = parse_int(k, v); }},
      {"backbone.init_seed", [](auto& c, auto& k, auto& v) { c.init_seed = parse_u64(k, v); }},

      {"anchors.scales", [](auto& c, auto& k, auto& v) { c.model.anchor_scales = parse_double_list(k, v); }},
      {"anchors.ratios", [](auto& c, auto& k, auto& v) { c.model.anchor_ratios = parse_double_list(k, v); }},

      {"rpn.positive_iou", [](auto& c, auto& k, auto& v) { c.model.rpn_positive_iou = parse_double(k, v); }},
      {"rpn.negative_iou", [](auto& c, auto& k, auto& v) { c.model.rpn_negative_iou = parse_double(k, v); }},
      {"rpn.pre_nms_top_n", [](auto& c, auto& k, auto& v) { c.model.proposals.pre_nms_top_n = parse_int(k, v); }},
      {"rpn.post_nms_top_n", [](auto& c, auto& k, auto& v) { c.model.proposals.post_nms_top_n = parse_int(k, v); }},
      {"rpn.nms_threshold", [](auto& c, auto& k, auto& v) { c.model.proposals.nms_threshold = parse_double(k, v); }},
      {"rpn.min_box_side", [](auto& c, auto& k, auto& v) { c.model.proposals.min_box_side = parse_double(k, v); }},

      {"roi.pool_bins", [](auto& c, auto& k, auto& v) { c.model.pool_bins = parse_int(k, v); }},
      {"roi.offset_scale", [](auto& c, auto& k, auto& v) { c.model.offset_scale = parse_double(k, v); }},
      {"roi.fg_iou", [](auto& c, auto& k, auto& v) { c.model.roi_fg_iou = parse_double(k, v); }},
      {"roi.append_gt_proposals", [](auto& c, auto& k, auto& v) { c.model.append_gt_proposals = parse_bool(k, v); }},

      {"train.learning_rate", [](auto& c, auto& k, auto& v) { c.train.learning_rate = parse_double(k, v); }},
      {"train.momentum", [](auto& c, auto& k, auto& v) { c.train.momentum = parse_double(k, v); }},
      {"train.weight_decay", [](auto& c, auto& k, auto& v) { c.train.weight_decay = parse_double(k, v); }},
      {"train.epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = parse_int(k, v); }},
      {"train.ohem_budget", [](auto& c, auto& k, auto& v) { c.train.ohem_budget = parse_int(k, v); }},
      {"train.seed", [](auto& c, auto& k, auto& v) { c.train.seed = parse_u64(k, v); }},
      {"train.norm_warmup_steps", [](auto& c, auto& k, auto& v) { c.train.norm_warmup_steps = parse_int(k, v); }},
      {"train.findings_only", [](auto& c, auto& k, auto& v) { c.train_findings_only = parse_bool(k, v); }},

      {"infer.augment", [](auto& c, auto& k, auto& v) { c.infer.augment = parse_bool(k, v); }},
      {"infer.score_rule",
       [](auto& c, auto& k, auto& v) {
         if (v == "max") {
           c.infer.score_rule = ImageScoreRule::kMax;
         } else if (v == "mean_topk") {
           c.infer.score_rule = ImageScoreRule::kMeanTopK;
         } else {
           bad_value(k, v, "max or mean_topk");
         }
       }},
      {"infer.score_topk", [](auto& c, auto& k, auto& v) { c.infer.score_topk = parse_int(k, v); }},
      {"infer.aggregate_rule",
       [](auto& c, auto& k, auto& v) {
         if (v == "mean") {
           c.infer.aggregate_rule = LateralityRule::kMean;
         } else if (v == "max") {
           c.infer.aggregate_rule = LateralityRule::kMax;
         } else {
           bad_value(k, v, "mean or max");
         }
       }},

      {"system.threads", [](auto& c, auto& k, auto& v) { c.system.threads = parse_int(k, v); }},
      {"system.kernels",
       [](auto& c, auto& k, auto& v) {
         if (v != "auto" && v != "scalar" && v != "avx2") bad_value(k, v, "auto, scalar, or avx2");
         c.system.kernels = v;
       }},
  };
  return s;
}

}  // namespace

ExperimentConfig::ExperimentConfig() { model = ModelConfig::toy_default(); }

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  bool saw_header = false;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != kHeader) {
        throw std::invalid_argument(
            "config: bad header '" + line + "' (expected '" + kHeader + "')");
      }
      saw_header = true;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config: malformed section at line " +
                                    std::to_string(line_no));
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full_key = section.empty() ? key : section + "." + key;
    auto it = schema().find(full_key);
    if (it == schema().end()) {
      throw std::invalid_argument("config: unknown key '" + full_key + "'");
    }
    it->second(cfg, full_key, value);
  }
  if (!saw_header) {
    throw std::invalid_argument("config: missing '" + std::string(kHeader) + "' header");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << kHeader << "\n\n";
  os << "[phantom]\n";
  os << "image_side = " << cfg.phantom.image_side << "\n";
  os << "train_exams = " << cfg.phantom.train_exams << "\n";
  os << "test_exams = " << cfg.phantom.test_exams << "\n";
  os << "malignant_prevalence = " << format_double(cfg.phantom.malignant_prevalence) << "\n";
  os << "benign_rate = " << format_double(cfg.phantom.benign_rate) << "\n";
  os << "devices = " << cfg.phantom.devices << "\n";
  os << "seed = " << cfg.phantom.seed << "\n\n";

  os << "[backbone]\n";
  os << "blocks = " << blocks_to_string(cfg.model.blocks) << "\n";
  os << "deformable_last = " << (cfg.model.deformable_backbone ? "true" : "false") << "\n";
  os << "rpn_hidden_channels = " << cfg.model.rpn_hidden_channels << "\n";
  os << "init_seed = " << cfg.init_seed << "\n\n";

  os << "[anchors]\n";
  os << "scales = " << doubles_to_string(cfg.model.anchor_scales) << "\n";
  os << "ratios = " << doubles_to_string(cfg.model.anchor_ratios) << "\n\n";

  os << "[rpn]\n";
  os << "positive_iou = " << format_double(cfg.model.rpn_positive_iou) << "\n";
  os << "negative_iou = " << format_double(cfg.model.rpn_negative_iou) << "\n";
  os << "pre_nms_top_n = " << cfg.model.proposals.pre_nms_top_n << "\n";
  os << "post_nms_top_n = " << cfg.model.proposals.post_nms_top_n << "\n";
  os << "nms_threshold = " << format_double(cfg.model.proposals.nms_threshold) << "\n";
  os << "min_box_side = " << format_double(cfg.model.proposals.min_box_side) << "\n\n";

  os << "[roi]\n";
  os << "pool_bins = " << cfg.model.pool_bins << "\n";
  os << "offset_scale = " << format_double(cfg.model.offset_scale) << "\n";
  os << "fg_iou = " << format_double(cfg.model.roi_fg_iou) << "\n";
  os << "append_gt_proposals = " << (cfg.model.append_gt_proposals ? "true" : "false") << "\n\n";

  os << "[train]\n";
  os << "learning_rate = " << format_double(cfg.train.learning_rate) << "\n";
  os << "momentum = " << format_double(cfg.train.momentum) << "\n";
  os << "weight_decay = " << format_double(cfg.train.weight_decay) << "\n";
  os << "epochs = " << cfg.train.epochs << "\n";
  os << "ohem_budget = " << cfg.train.ohem_budget << "\n";
  os << "seed = " << cfg.train.seed << "\n";
  os << "norm_warmup_steps = " << cfg.train.norm_warmup_steps << "\n";
  os << "findings_only = " << (cfg.train_findings_only ? "true" : "false") << "\n\n";

  os << "[infer]\n";
  os << "augment = " << (cfg.infer.augment ? "true" : "false") << "\n";
  os << "score_rule = "
     << (cfg.infer.score_rule == ImageScoreRule::kMax ? "max" : "mean_topk") << "\n";
  os << "score_topk = " << cfg.infer.score_topk << "\n";
  os << "aggregate_rule = "
     << (cfg.infer.aggregate_rule == LateralityRule::kMean ? "mean" : "max") << "\n\n";

  os << "[system]\n";
  os << "threads = " << cfg.system.threads << "\n";
  os << "kernels = " << cfg.system.kernels << "\n";
  return os.str();
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write '" + path + "'");
  out << config_to_text(cfg);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("config override needs key=value, got '" +
                                assignment + "'");
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  auto it = schema().find(key);
  if (it == schema().end()) {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  it->second(cfg, key, value);
}

void apply_system_config(const SystemConfig& cfg) {
  kernels::set_thread_count(cfg.threads);
  kernels::set_backend(kernels::parse_backend(cfg.kernels));
}

}  // namespace mammodet
