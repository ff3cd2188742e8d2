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

#include "mammodet/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "mammodet/backbone.hpp"
#include "mammodet/deform_ops.hpp"
#include "mammodet/model.hpp"
#include "mammodet/rng.hpp"
#include "mammodet/tensor.hpp"
#include "mammodet/trainer.hpp"

namespace mammodet {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// fractional coordinate away from the bilinear kinks
double off_grid(Rng& rng, double lo, double hi) {
  for (;;) {
    const double v = rng.uniform(lo, hi);
    if (std::abs(v - std::round(v)) > 1e-2) return v;
  }
}

double fd_central(const std::function<double()>& eval, double* x) {
  const double saved = *x;
  *x = saved + kFdStep;
  const double fp = eval();
  *x = saved - kFdStep;
  const double fm = eval();
  *x = saved;
  return (fp - fm) / (2.0 * kFdStep);
}

GradCheckResult check_bilinear(Rng& rng) {
  GradCheckResult res{"bilinear_sample", 0.0, 1e-6};
  for (int trial = 0; trial < 40; ++trial) {
    Tensor x = random_tensor({5, 5}, rng);
    Point2 p{off_grid(rng, 0.2, 3.8), off_grid(rng, 0.2, 3.8)};
    const double upstream = rng.uniform(0.5, 1.5);
    const BilinearGrad g = bilinear_sample_grad(x, p, upstream);

    auto eval = [&]() { return upstream * bilinear_sample(x, p); };
    res.max_rel_err = std::max(res.max_rel_err,
                               relative_error(g.grad_p.row, fd_central(eval, &p.row), 1e-3));
    res.max_rel_err = std::max(res.max_rel_err,
                               relative_error(g.grad_p.col, fd_central(eval, &p.col), 1e-3));

    Tensor grad_x({5, 5});
    for (int q = 0; q < g.n; ++q) grad_x.at(g.rows[q], g.cols[q]) += g.values[q];
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) {
        const double fd = fd_central(eval, &x.at(r, c));
        res.max_rel_err =
            std::max(res.max_rel_err, relative_error(grad_x.at(r, c), fd, 1e-3));
      }
    }
  }
  return res;
}

GradCheckResult check_deform_conv(Rng& rng) {
  GradCheckResult res{"deform_conv", 0.0, 1e-5};
  ConvParams params;
  params.weights = random_tensor({3, 2, 3, 3}, rng);
  params.bias = random_tensor({3}, rng);
  params.stride = 1;
  params.pad = 1;
  Tensor x = random_tensor({2, 7, 7}, rng);
  OffsetField off;
  off.offsets = Tensor({18, 7, 7});
  for (std::size_t i = 0; i < off.offsets.numel(); ++i) {
    off.offsets[i] = off_grid(rng, -1.5, 1.5);
  }
  Tensor grad_y = random_tensor({3, 7, 7}, rng);

  auto loss = [&]() {
    const Tensor y = deform_conv_forward(x, params, off);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += y[i] * grad_y[i];
    return acc;
  };

  Tensor gx, gw, gb, goff;
  deform_conv_backward(x, params, off, grad_y, &gx, &gw, &gb, &goff);

  auto sweep = [&](Tensor& target, const Tensor& analytic) {
    for (std::size_t i = 0; i < target.numel(); ++i) {
      const double fd = fd_central(loss, &target[i]);
      res.max_rel_err = std::max(res.max_rel_err, relative_error(analytic[i], fd));
    }
  };
  sweep(x, gx);
  sweep(params.weights, gw);
  sweep(params.bias, gb);
  sweep(off.offsets, goff);
  return res;
}

GradCheckResult check_dps_roi_pool(Rng& rng) {
  GradCheckResult res{"deform_ps_roi_pool", 0.0, 1e-5};
  const int k = 3;
  Tensor maps = random_tensor({k * k * 2, 9, 9}, rng);
  Roi roi;
  roi.box = BBox{1.3, 1.7, 6.9, 7.4};
  roi.bins = k;
  roi.has_offsets = true;
  roi.offsets = Tensor({2, k, k});
  for (std::size_t i = 0; i < roi.offsets.numel(); ++i) {
    roi.offsets[i] = rng.uniform(-1.0, 1.0);
  }
  Tensor grad_out = random_tensor({2, k, k}, rng);

  auto loss = [&]() {
    const Tensor y = deform_ps_roi_pool(maps, roi, 2, 1.0, 0.1);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += y[i] * grad_out[i];
    return acc;
  };

  Tensor gmaps(maps.shape()), goff;
  deform_ps_roi_pool_backward(maps, roi, 2, 1.0, 0.1, grad_out, &gmaps, &goff);

  for (std::size_t i = 0; i < maps.numel(); ++i) {
    const double fd = fd_central(loss, &maps[i]);
    res.max_rel_err = std::max(res.max_rel_err, relative_error(gmaps[i], fd));
  }
  for (std::size_t i = 0; i < roi.offsets.numel(); ++i) {
    const double fd = fd_central(loss, &roi.offsets[i]);
    res.max_rel_err = std::max(res.max_rel_err, relative_error(goff[i], fd));
  }
  return res;
}

GradCheckResult check_cbr(Rng& rng) {
  GradCheckResult res{"cbr_block", 0.0, 1e-5};
  CbrLayer layer;
  layer.name = "probe";
  layer.conv.weights = random_tensor({3, 2, 3, 3}, rng);
  layer.conv.bias = random_tensor({3}, rng);
  layer.conv.stride = 1;
  layer.conv.pad = 1;
  layer.norm = NormState::identity(3);
  for (int c = 0; c < 3; ++c) {
    layer.norm.scale[c] = rng.uniform(0.5, 1.5);
    layer.norm.shift[c] = rng.uniform(-0.3, 0.3);
    layer.norm.running_mean[c] = rng.uniform(-0.2, 0.2);
    layer.norm.running_var[c] = rng.uniform(0.5, 2.0);
  }
  Tensor x = random_tensor({2, 6, 6}, rng);
  Tensor grad_y = random_tensor({3, 6, 6}, rng);

  // keep pre-relu values away from the relu kink
  CbrCache cache;
  for (;;) {
    layer.forward(x, &cache);
    bool near_kink = false;
    for (std::size_t i = 0; i < cache.normed.numel(); ++i) {
      if (std::abs(cache.normed[i]) < 1e-3) near_kink = true;
    }
    if (!near_kink) break;
    x = random_tensor({2, 6, 6}, rng);
  }

  auto loss = [&]() {
    CbrCache c2;
    const Tensor y = layer.forward(x, &c2);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += y[i] * grad_y[i];
    return acc;
  };

  Tensor gw(layer.conv.weights.shape()), gb(layer.conv.bias.shape());
  Tensor gscale({3}), gshift({3});
  const Tensor gx = layer.backward(cache, grad_y, &gw, &gb, &gscale, &gshift,
                                   nullptr, nullptr);

  auto sweep_tensor = [&](Tensor& target, const Tensor& analytic) {
    for (std::size_t i = 0; i < target.numel(); ++i) {
      const double fd = fd_central(loss, &target[i]);
      res.max_rel_err = std::max(res.max_rel_err, relative_error(analytic[i], fd));
    }
  };
  sweep_tensor(x, gx);
  sweep_tensor(layer.conv.weights, gw);
  sweep_tensor(layer.conv.bias, gb);
  for (int c = 0; c < 3; ++c) {
    res.max_rel_err = std::max(
        res.max_rel_err,
        relative_error(gscale[c], fd_central(loss, &layer.norm.scale[c])));
    res.max_rel_err = std::max(
        res.max_rel_err,
        relative_error(gshift[c], fd_central(loss, &layer.norm.shift[c])));
  }
  return res;
}

GradCheckResult check_softmax_xent(Rng& rng) {
  GradCheckResult res{"softmax_xent", 0.0, 1e-8};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits(3);
    for (double& v : logits) v = rng.uniform(-2.0, 2.0);
    const int label = static_cast<int>(rng.below(3));
    std::vector<double> grad;
    softmax_xent(logits, label, &grad);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      auto eval = [&]() { return softmax_xent(logits, label, nullptr); };
      const double fd = fd_central(eval, &logits[i]);
      res.max_rel_err = std::max(res.max_rel_err, relative_error(grad[i], fd, 1e-2));
    }
  }
  return res;
}

GradCheckResult check_smooth_l1(Rng& rng) {
  GradCheckResult res{"smooth_l1", 0.0, 1e-7};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pred(4), target(4);
    for (std::size_t i = 0; i < 4; ++i) {
      target[i] = rng.uniform(-1.0, 1.0);
      // keep |pred - target| away from the huber kink at 1
      for (;;) {
        pred[i] = rng.uniform(-2.5, 2.5);
        const double a = std::abs(pred[i] - target[i]);
        if (std::abs(a - 1.0) > 1e-2) break;
      }
    }
    std::vector<double> grad;
    smooth_l1(pred, target, &grad);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      auto eval = [&]() { return smooth_l1(pred, target, nullptr); };
      const double fd = fd_central(eval, &pred[i]);
      res.max_rel_err = std::max(res.max_rel_err, relative_error(grad[i], fd, 1e-2));
    }
  }
  return res;
}

GradCheckResult check_end_to_end(Rng& rng) {
  GradCheckResult res{"model_end_to_end", 0.0, 1e-4};

  ModelConfig cfg;
  cfg.blocks = {{BlockSpec::Kind::kStemCbr, 1, 4, true}};
  cfg.deformable_backbone = true;
  cfg.anchor_scales = {4.0};
  cfg.anchor_ratios = {1.0};
  cfg.rpn_hidden_channels = 6;
  cfg.pool_bins = 3;
  DetectionModel model = DetectionModel::build(cfg, rng.next_u64());
  // non-degenerate normalization statistics and offsets
  for (ParamSlot& slot : model.param_slots()) {
    if (slot.name.find(".norm.mean") != std::string::npos) {
      for (std::size_t i = 0; i < slot.size; ++i) slot.data[i] = rng.uniform(-0.2, 0.2);
    }
    if (slot.name.find(".norm.var") != std::string::npos) {
      for (std::size_t i = 0; i < slot.size; ++i) slot.data[i] = rng.uniform(0.6, 1.8);
    }
    if (slot.name.find("offset.w") != std::string::npos ||
        slot.name.find("off_maps.w") != std::string::npos) {
      for (std::size_t i = 0; i < slot.size; ++i) slot.data[i] = rng.uniform(-0.05, 0.05);
    }
  }

  TrainingImage sample;
  sample.image_id = "probe";
  sample.image = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  sample.gt_boxes = {BBox{1.0, 1.0, 5.0, 5.0}};
  sample.gt_classes = {kMalignant};

  const std::vector<BBox> rois = {BBox{0.8, 1.2, 5.5, 5.4}, BBox{2.1, 2.6, 7.3, 7.0}};
  LossOptions opts;
  opts.ohem_budget = 16;
  opts.fixed_rois = &rois;

  ModelGrads grads = model.make_grads();
  grads.zero();
  compute_loss(model, sample, opts, &grads, nullptr);

  auto loss = [&]() { return compute_loss(model, sample, opts, nullptr, nullptr).total; };

  std::vector<ParamSlot> pslots;
  for (ParamSlot& s : model.param_slots()) {
    if (s.trainable) pslots.push_back(s);
  }
  std::vector<ParamSlot> gslots = DetectionModel::grad_slots(grads, model);
  for (std::size_t s = 0; s < pslots.size(); ++s) {
    for (std::size_t i = 0; i < pslots[s].size; ++i) {
      const double fd = fd_central(loss, &pslots[s].data[i]);
      res.max_rel_err =
          std::max(res.max_rel_err, relative_error(gslots[s].data[i], fd));
    }
  }
  return res;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckResult> out;
  out.push_back(check_bilinear(rng));
  out.push_back(check_deform_conv(rng));
  out.push_back(check_dps_roi_pool(rng));
  out.push_back(check_cbr(rng));
  out.push_back(check_softmax_xent(rng));
  out.push_back(check_smooth_l1(rng));
  out.push_back(check_end_to_end(rng));
  return out;
}

}  // namespace mammodet
