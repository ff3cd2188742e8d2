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

#include "mammodet/model.hpp"

#include <cmath>
#include <stdexcept>

namespace mammodet {

ModelConfig ModelConfig::toy_default() {
  ModelConfig cfg;
  cfg.blocks = {
      {BlockSpec::Kind::kStemCbr, 1, 16, true},
      {BlockSpec::Kind::kStemCbr, 1, 16, true},
      {BlockSpec::Kind::kBlockA, 3, 32, true},
      {BlockSpec::Kind::kBlockB, 1, 64, true},
      {BlockSpec::Kind::kBlockC, 2, 64, false},
  };
  return cfg;
}

void ModelGrads::zero() {
  auto zero_cbr = [](CbrGrads& g) {
    g.conv_w.zero();
    g.conv_b.zero();
    g.scale.zero();
    g.shift.zero();
    if (g.off_w.numel() > 0) g.off_w.zero();
    if (g.off_b.numel() > 0) g.off_b.zero();
  };
  for (auto& g : backbone) zero_cbr(g);
  zero_cbr(rpn_hidden);
  rpn_cls_w.zero();
  rpn_cls_b.zero();
  rpn_reg_w.zero();
  rpn_reg_b.zero();
  cls_maps_w.zero();
  cls_maps_b.zero();
  reg_maps_w.zero();
  reg_maps_b.zero();
  off_maps_w.zero();
  off_maps_b.zero();
}

namespace {

ConvParams make_conv(int out_c, int in_c, int kernel, Rng& rng, bool zero_init) {
  ConvParams p;
  p.weights = Tensor({out_c, in_c, kernel, kernel});
  if (!zero_init) {
    const double sd = std::sqrt(2.0 / static_cast<double>(in_c * kernel * kernel));
    for (std::size_t i = 0; i < p.weights.numel(); ++i) {
      p.weights[i] = rng.normal(0.0, sd);
    }
  }
  p.bias = Tensor({out_c});
  p.stride = 1;
  p.pad = kernel / 2;
  return p;
}

}  // namespace

DetectionModel DetectionModel::build(const ModelConfig& cfg, std::uint64_t init_seed) {
  DetectionModel m;
  m.cfg_ = cfg;
  Rng rng(init_seed);
  m.backbone_ = build_backbone(cfg.blocks, 1, cfg.deformable_backbone, rng);
  const int feat_c = m.backbone_.out_channels;
  const int num_anchors = m.anchors_per_cell();
  const int k = cfg.pool_bins;

  m.rpn_hidden_.name = "rpn_hidden";
  m.rpn_hidden_.conv = make_conv(cfg.rpn_hidden_channels, feat_c, 3, rng, false);
  m.rpn_hidden_.norm = NormState::identity(cfg.rpn_hidden_channels);

  m.rpn_cls_ = make_conv(2 * num_anchors, cfg.rpn_hidden_channels, 1, rng, false);
  m.rpn_reg_ = make_conv(4 * num_anchors, cfg.rpn_hidden_channels, 1, rng, false);
  m.cls_maps_ = make_conv(k * k * kNumClasses, feat_c, 1, rng, false);
  m.reg_maps_ = make_conv(k * k * 4, feat_c, 1, rng, false);
  // zero-initialized so pooling starts undeformed
  m.off_maps_ = make_conv(k * k * 2, feat_c, 1, rng, true);
  return m;
}

ModelGrads DetectionModel::make_grads() const {
  ModelGrads g;
  auto cbr_like = [](const CbrLayer& layer) {
    ModelGrads::CbrGrads cg;
    cg.conv_w = Tensor(layer.conv.weights.shape());
    cg.conv_b = Tensor(layer.conv.bias.shape());
    cg.scale = Tensor({static_cast<int>(layer.norm.scale.size())});
    cg.shift = Tensor({static_cast<int>(layer.norm.shift.size())});
    if (layer.deformable) {
      cg.off_w = Tensor(layer.offset_conv.weights.shape());
      cg.off_b = Tensor(layer.offset_conv.bias.shape());
    }
    return cg;
  };
  for (const CbrLayer& layer : backbone_.layers) g.backbone.push_back(cbr_like(layer));
  g.rpn_hidden = cbr_like(rpn_hidden_);
  g.rpn_cls_w = Tensor(rpn_cls_.weights.shape());
  g.rpn_cls_b = Tensor(rpn_cls_.bias.shape());
  g.rpn_reg_w = Tensor(rpn_reg_.weights.shape());
  g.rpn_reg_b = Tensor(rpn_reg_.bias.shape());
  g.cls_maps_w = Tensor(cls_maps_.weights.shape());
  g.cls_maps_b = Tensor(cls_maps_.bias.shape());
  g.reg_maps_w = Tensor(reg_maps_.weights.shape());
  g.reg_maps_b = Tensor(reg_maps_.bias.shape());
  g.off_maps_w = Tensor(off_maps_.weights.shape());
  g.off_maps_b = Tensor(off_maps_.bias.shape());
  return g;
}

namespace {

void push_tensor(std::vector<ParamSlot>& out, const std::string& name, Tensor& t,
                 bool trainable) {
  out.push_back(ParamSlot{name, t.data(), t.numel(), t.shape(), trainable});
}

void push_vec(std::vector<ParamSlot>& out, const std::string& name,
              std::vector<double>& v, bool trainable) {
  out.push_back(ParamSlot{name, v.data(), v.size(),
                          {static_cast<int>(v.size())}, trainable});
}

void push_cbr_params(std::vector<ParamSlot>& out, const std::string& prefix,
                     CbrLayer& layer) {
  push_tensor(out, prefix + ".conv.w", layer.conv.weights, true);
  push_tensor(out, prefix + ".conv.b", layer.conv.bias, true);
  push_vec(out, prefix + ".norm.scale", layer.norm.scale, true);
  push_vec(out, prefix + ".norm.shift", layer.norm.shift, true);
  push_vec(out, prefix + ".norm.mean", layer.norm.running_mean, false);
  push_vec(out, prefix + ".norm.var", layer.norm.running_var, false);
  if (layer.deformable) {
    push_tensor(out, prefix + ".offset.w", layer.offset_conv.weights, true);
    push_tensor(out, prefix + ".offset.b", layer.offset_conv.bias, true);
  }
}

void push_cbr_grads(std::vector<ParamSlot>& out, const std::string& prefix,
                    ModelGrads::CbrGrads& g, bool deformable) {
  push_tensor(out, prefix + ".conv.w", g.conv_w, true);
  push_tensor(out, prefix + ".conv.b", g.conv_b, true);
  push_tensor(out, prefix + ".norm.scale", g.scale, true);
  push_tensor(out, prefix + ".norm.shift", g.shift, true);
  if (deformable) {
    push_tensor(out, prefix + ".offset.w", g.off_w, true);
    push_tensor(out, prefix + ".offset.b", g.off_b, true);
  }
}

}  // namespace

std::vector<ParamSlot> DetectionModel::param_slots() {
  std::vector<ParamSlot> out;
  for (CbrLayer& layer : backbone_.layers) {
    push_cbr_params(out, "backbone." + layer.name, layer);
  }
  push_cbr_params(out, "rpn_hidden", rpn_hidden_);
  push_tensor(out, "rpn_cls.w", rpn_cls_.weights, true);
  push_tensor(out, "rpn_cls.b", rpn_cls_.bias, true);
  push_tensor(out, "rpn_reg.w", rpn_reg_.weights, true);
  push_tensor(out, "rpn_reg.b", rpn_reg_.bias, true);
  push_tensor(out, "cls_maps.w", cls_maps_.weights, true);
  push_tensor(out, "cls_maps.b", cls_maps_.bias, true);
  push_tensor(out, "reg_maps.w", reg_maps_.weights, true);
  push_tensor(out, "reg_maps.b", reg_maps_.bias, true);
  push_tensor(out, "off_maps.w", off_maps_.weights, true);
  push_tensor(out, "off_maps.b", off_maps_.bias, true);
  return out;
}

std::vector<ParamSlot> DetectionModel::grad_slots(ModelGrads& grads,
                                                  const DetectionModel& model) {
  std::vector<ParamSlot> out;
  for (std::size_t i = 0; i < grads.backbone.size(); ++i) {
    push_cbr_grads(out, "backbone." + model.backbone_.layers[i].name,
                   grads.backbone[i], model.backbone_.layers[i].deformable);
  }
  push_cbr_grads(out, "rpn_hidden", grads.rpn_hidden, false);
  push_tensor(out, "rpn_cls.w", grads.rpn_cls_w, true);
  push_tensor(out, "rpn_cls.b", grads.rpn_cls_b, true);
  push_tensor(out, "rpn_reg.w", grads.rpn_reg_w, true);
  push_tensor(out, "rpn_reg.b", grads.rpn_reg_b, true);
  push_tensor(out, "cls_maps.w", grads.cls_maps_w, true);
  push_tensor(out, "cls_maps.b", grads.cls_maps_b, true);
  push_tensor(out, "reg_maps.w", grads.reg_maps_w, true);
  push_tensor(out, "reg_maps.b", grads.reg_maps_b, true);
  push_tensor(out, "off_maps.w", grads.off_maps_w, true);
  push_tensor(out, "off_maps.b", grads.off_maps_b, true);
  return out;
}

void DetectionModel::forward(const Tensor& image, ForwardCache* cache) const {
  ForwardCache& c = *cache;
  c.image_h = image.extent(1);
  c.image_w = image.extent(2);
  c.backbone.resize(backbone_.layers.size());
  Tensor x = image;
  for (std::size_t i = 0; i < backbone_.layers.size(); ++i) {
    x = backbone_.layers[i].forward(x, &c.backbone[i]);
  }
  c.features = std::move(x);
  c.feat_h = c.features.extent(1);
  c.feat_w = c.features.extent(2);

  c.rpn_hidden_out = rpn_hidden_.forward(c.features, &c.rpn_hidden);
  c.rpn_cls_out = conv2d(c.rpn_hidden_out, rpn_cls_);
  c.rpn_reg_out = conv2d(c.rpn_hidden_out, rpn_reg_);
  c.cls_maps = conv2d(c.features, cls_maps_);
  c.reg_maps = conv2d(c.features, reg_maps_);
  c.off_maps = conv2d(c.features, off_maps_);
}

std::vector<BBox> DetectionModel::anchors_for(const ForwardCache& cache) const {
  AnchorConfig acfg;
  acfg.base_scales = cfg_.anchor_scales;
  acfg.aspect_ratios = cfg_.anchor_ratios;
  acfg.stride = backbone_.total_stride;
  return generate_anchors(acfg, cache.feat_h, cache.feat_w);
}

RpnScores DetectionModel::rpn_scores(const ForwardCache& cache) const {
  const int num_anchors = anchors_per_cell();
  const std::size_t cells = static_cast<std::size_t>(cache.feat_h) * cache.feat_w;
  RpnScores out;
  out.objectness.resize(cells * num_anchors);
  out.deltas.resize(cells * num_anchors);
  const double* cls = cache.rpn_cls_out.data();
  const double* reg = cache.rpn_reg_out.data();
  for (std::size_t n = 0; n < cells; ++n) {
    for (int a = 0; a < num_anchors; ++a) {
      const double bg = cls[static_cast<std::size_t>(2 * a) * cells + n];
      const double fg = cls[static_cast<std::size_t>(2 * a + 1) * cells + n];
      const double m = bg > fg ? bg : fg;
      const double eb = std::exp(bg - m);
      const double ef = std::exp(fg - m);
      const std::size_t idx = n * num_anchors + a;
      out.objectness[idx] = ef / (eb + ef);
      for (int d = 0; d < 4; ++d) {
        out.deltas[idx][d] = reg[static_cast<std::size_t>(4 * a + d) * cells + n];
      }
    }
  }
  return out;
}

std::vector<Proposal> DetectionModel::propose_from(const ForwardCache& cache) const {
  const RpnScores scores = rpn_scores(cache);
  return propose(scores.objectness, scores.deltas, anchors_for(cache),
                 cache.image_h, cache.image_w, cfg_.proposals);
}

RoiHeadOutput DetectionModel::roi_head_forward(const ForwardCache& cache,
                                               const BBox& roi_box) const {
  const int k = cfg_.pool_bins;
  const double scale = 1.0 / backbone_.total_stride;
  RoiHeadOutput out;

  Roi plain{roi_box, k, false, Tensor()};
  out.raw_offsets = ps_roi_pool(cache.off_maps, plain, 2, scale);

  Roi deformed{roi_box, k, true, out.raw_offsets};
  const Tensor pooled_cls = deform_ps_roi_pool(cache.cls_maps, deformed,
                                               kNumClasses, scale, cfg_.offset_scale);
  const Tensor pooled_reg = ps_roi_pool(cache.reg_maps, plain, 4, scale);

  const double inv_bins = 1.0 / static_cast<double>(k * k);
  for (int c = 0; c < kNumClasses; ++c) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) acc += pooled_cls.at(c, i, j);
    }
    out.cls_logits[static_cast<std::size_t>(c)] = acc * inv_bins;
  }
  for (int d = 0; d < 4; ++d) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) acc += pooled_reg.at(d, i, j);
    }
    out.reg_deltas[static_cast<std::size_t>(d)] = acc * inv_bins;
  }
  return out;
}

void DetectionModel::roi_head_backward(
    const ForwardCache& cache, const BBox& roi_box, const RoiHeadOutput& head,
    const std::array<double, kNumClasses>& grad_logits,
    const std::array<double, 4>& grad_deltas, Tensor* grad_cls_maps,
    Tensor* grad_reg_maps, Tensor* grad_off_maps) const {
  const int k = cfg_.pool_bins;
  const double scale = 1.0 / backbone_.total_stride;
  const double inv_bins = 1.0 / static_cast<double>(k * k);

  Tensor grad_pooled_cls({kNumClasses, k, k});
  for (int c = 0; c < kNumClasses; ++c) {
    const double g = grad_logits[static_cast<std::size_t>(c)] * inv_bins;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) grad_pooled_cls.at(c, i, j) = g;
    }
  }
  Roi deformed{roi_box, k, true, head.raw_offsets};
  Tensor grad_raw_offsets;
  deform_ps_roi_pool_backward(cache.cls_maps, deformed, kNumClasses, scale,
                              cfg_.offset_scale, grad_pooled_cls, grad_cls_maps,
                              &grad_raw_offsets);

  Roi plain{roi_box, k, false, Tensor()};
  ps_roi_pool_backward(cache.off_maps, plain, 2, scale, grad_raw_offsets,
                       grad_off_maps);

  Tensor grad_pooled_reg({4, k, k});
  for (int d = 0; d < 4; ++d) {
    const double g = grad_deltas[static_cast<std::size_t>(d)] * inv_bins;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) grad_pooled_reg.at(d, i, j) = g;
    }
  }
  ps_roi_pool_backward(cache.reg_maps, plain, 4, scale, grad_pooled_reg,
                       grad_reg_maps);
}

void DetectionModel::backward(const ForwardCache& cache, const Tensor& grad_rpn_cls,
                              const Tensor& grad_rpn_reg,
                              const Tensor& grad_cls_maps,
                              const Tensor& grad_reg_maps,
                              const Tensor& grad_off_maps, ModelGrads* grads) {
  Tensor grad_features(cache.features.shape());

  auto add_head_grad = [&](const Tensor& grad_out, ConvParams& conv, Tensor& gw,
                           Tensor& gb) {
    if (grad_out.numel() == 0) return;
    Tensor gx, w, b;
    conv2d_backward(cache.features, conv, grad_out, &gx, &w, &b);
    add_inplace(grad_features, gx);
    add_inplace(gw, w);
    add_inplace(gb, b);
  };
  add_head_grad(grad_cls_maps, cls_maps_, grads->cls_maps_w, grads->cls_maps_b);
  add_head_grad(grad_reg_maps, reg_maps_, grads->reg_maps_w, grads->reg_maps_b);
  add_head_grad(grad_off_maps, off_maps_, grads->off_maps_w, grads->off_maps_b);

  if (grad_rpn_cls.numel() > 0 || grad_rpn_reg.numel() > 0) {
    Tensor grad_hidden(cache.rpn_hidden_out.shape());
    if (grad_rpn_cls.numel() > 0) {
      Tensor gx, w, b;
      conv2d_backward(cache.rpn_hidden_out, rpn_cls_, grad_rpn_cls, &gx, &w, &b);
      add_inplace(grad_hidden, gx);
      add_inplace(grads->rpn_cls_w, w);
      add_inplace(grads->rpn_cls_b, b);
    }
    if (grad_rpn_reg.numel() > 0) {
      Tensor gx, w, b;
      conv2d_backward(cache.rpn_hidden_out, rpn_reg_, grad_rpn_reg, &gx, &w, &b);
      add_inplace(grad_hidden, gx);
      add_inplace(grads->rpn_reg_w, w);
      add_inplace(grads->rpn_reg_b, b);
    }
    Tensor gf = rpn_hidden_.backward(cache.rpn_hidden, grad_hidden,
                                     &grads->rpn_hidden.conv_w,
                                     &grads->rpn_hidden.conv_b,
                                     &grads->rpn_hidden.scale,
                                     &grads->rpn_hidden.shift, nullptr, nullptr);
    add_inplace(grad_features, gf);
  }

  Tensor g = std::move(grad_features);
  for (std::size_t i = backbone_.layers.size(); i-- > 0;) {
    ModelGrads::CbrGrads& lg = grads->backbone[i];
    g = backbone_.layers[i].backward(
        cache.backbone[i], g, &lg.conv_w, &lg.conv_b, &lg.scale, &lg.shift,
        backbone_.layers[i].deformable ? &lg.off_w : nullptr,
        backbone_.layers[i].deformable ? &lg.off_b : nullptr);
  }
}

std::vector<Detection> DetectionModel::detect(const Tensor& image) const {
  ForwardCache cache;
  forward(image, &cache);
  const std::vector<Proposal> proposals = propose_from(cache);
  std::vector<Detection> out;
  out.reserve(proposals.size());
  for (const Proposal& p : proposals) {
    const RoiHeadOutput head = roi_head_forward(cache, p.box);
    Detection det;
    det.box = decode_box(p.box, head.reg_deltas)
                  .clipped(static_cast<double>(cache.image_h),
                           static_cast<double>(cache.image_w));
    double m = head.cls_logits[0];
    for (double v : head.cls_logits) m = std::max(m, v);
    double z = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      det.class_scores[static_cast<std::size_t>(c)] =
          std::exp(head.cls_logits[static_cast<std::size_t>(c)] - m);
      z += det.class_scores[static_cast<std::size_t>(c)];
    }
    for (double& v : det.class_scores) v /= z;
    det.objectness = p.objectness;
    out.push_back(det);
  }
  return out;
}

void DetectionModel::set_norm_mode(NormState::Mode mode) {
  for (CbrLayer& layer : backbone_.layers) layer.norm.mode = mode;
  rpn_hidden_.norm.mode = mode;
}

void DetectionModel::update_norm_stats(const ForwardCache& cache) {
  for (std::size_t i = 0; i < backbone_.layers.size(); ++i) {
    backbone_.layers[i].update_norm_stats(cache.backbone[i]);
  }
  rpn_hidden_.update_norm_stats(cache.rpn_hidden);
}

}  // namespace mammodet
