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

#include "mammodet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mammodet/kernels.hpp"
#include "mammodet/rng.hpp"

namespace mammodet {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

DeviceLut make_gamma_lut(int device_id, double gamma, int table_size) {
  if (table_size < 2 || gamma <= 0.0) {
    throw std::invalid_argument("make_gamma_lut: bad table size or gamma");
  }
  DeviceLut lut;
  lut.device_id = device_id;
  lut.table.resize(static_cast<std::size_t>(table_size));
  const double inv_gamma = 1.0 / gamma;
  const double denom = static_cast<double>(table_size - 1);
  for (int i = 0; i < table_size; ++i) {
    lut.table[static_cast<std::size_t>(i)] = std::pow(i / denom, inv_gamma);
  }
  return lut;
}

namespace {

void check_lut(const DeviceLut& lut) {
  if (lut.table.size() < 2) throw std::invalid_argument("lut: table too small");
  for (std::size_t i = 1; i < lut.table.size(); ++i) {
    if (lut.table[i] < lut.table[i - 1]) {
      throw std::invalid_argument("lut: table must be non-decreasing");
    }
  }
}

}  // namespace

Tensor normalize_intensity(const Tensor& raw, const DeviceLut& lut) {
  check_lut(lut);
  Tensor out(raw.shape());
  const double limit = static_cast<double>(lut.table.size());
  for (std::size_t i = 0; i < raw.numel(); ++i) {
    const double v = raw[i];
    if (!(v >= 0.0) || v >= limit || v != std::floor(v)) {
      throw std::invalid_argument(
          "normalize_intensity: raw value " + std::to_string(v) +
          " outside the LUT domain [0," + std::to_string(lut.table.size() - 1) + "]");
    }
    out[i] = lut.table[static_cast<std::size_t>(v)];
  }
  return out;
}

Tensor encode_raw(const Tensor& canonical, const DeviceLut& lut) {
  check_lut(lut);
  Tensor out(canonical.shape());
  const double top = static_cast<double>(lut.table.size() - 1);
  for (std::size_t i = 0; i < canonical.numel(); ++i) {
    const double n = std::clamp(canonical[i], 0.0, 1.0);
    // invert the gamma table by binary search so any monotone table works
    std::size_t lo = 0;
    std::size_t hi = lut.table.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      if (lut.table[mid] <= n) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    // pick the nearer of the bracketing entries
    std::size_t best = lo;
    if (lo + 1 <= static_cast<std::size_t>(top) &&
        std::abs(lut.table[lo + 1] - n) < std::abs(lut.table[lo] - n)) {
      best = lo + 1;
    }
    out[i] = static_cast<double>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// phantom generation

namespace {

struct LesionSeed {
  bool is_mass = true;
  int class_id = kBenign;
  double center_row_frac = 0.5;  // within the breast ellipse
  double center_col_frac = 0.5;
  double size = 8.0;       // mass radius / cluster spread, pixels
  double amplitude = 0.2;
  double phase = 0.0;
  int speckles = 0;
};

struct BreastPlan {
  bool malignant = false;
  std::vector<LesionSeed> lesions;
};

BreastPlan plan_breast(const PhantomConfig& cfg, Rng& rng) {
  BreastPlan plan;
  const double u = rng.uniform();
  // benign probability scales with the malignant prevalence, so a
  // prevalence of zero produces a findings-free dataset
  const double p_benign =
      std::min(1.0, cfg.benign_rate * cfg.malignant_prevalence) *
      (1.0 - cfg.malignant_prevalence);
  int status = 0;  // 0 none, 1 benign, 2 malignant
  if (u < cfg.malignant_prevalence) {
    status = 2;
  } else if (u < cfg.malignant_prevalence + p_benign) {
    status = 1;
  }
  if (status == 0) return plan;
  plan.malignant = status == 2;
  const int count = status == 2 ? 1 + static_cast<int>(rng.below(2)) : 1;
  for (int i = 0; i < count; ++i) {
    LesionSeed seed;
    seed.class_id = status == 2 ? kMalignant : kBenign;
    seed.is_mass = rng.bernoulli(0.5);
    // polar placement keeps lesions inside the ellipse with margin
    const double ang = rng.uniform(-1.1, 1.1);
    const double rad = rng.uniform(0.15, 0.72);
    seed.center_row_frac = rad * std::sin(ang);
    seed.center_col_frac = rad * std::cos(ang);
    seed.phase = rng.uniform(0.0, 6.283185307179586);
    if (seed.is_mass) {
      if (seed.class_id == kMalignant) {
        seed.size = rng.uniform(8.0, 14.0);
        seed.amplitude = rng.uniform(0.30, 0.42);
      } else {
        seed.size = rng.uniform(6.0, 10.0);
        seed.amplitude = rng.uniform(0.10, 0.16);
      }
    } else {
      if (seed.class_id == kMalignant) {
        seed.size = rng.uniform(10.0, 14.0);
        seed.amplitude = rng.uniform(0.45, 0.65);
        seed.speckles = 9 + static_cast<int>(rng.below(7));
      } else {
        seed.size = rng.uniform(5.0, 8.0);
        seed.amplitude = rng.uniform(0.18, 0.26);
        seed.speckles = 3 + static_cast<int>(rng.below(3));
      }
    }
    plan.lesions.push_back(seed);
  }
  return plan;
}

struct RenderedView {
  Tensor canonical;  // [1,side,side] in [0,1]
  std::vector<Finding> findings;
};

RenderedView render_view(int side, const BreastPlan& plan, Rng& rng) {
  RenderedView out;
  out.canonical = Tensor({1, side, side});
  double* img = out.canonical.data();
  const double s = static_cast<double>(side);

  // breast outline: ellipse anchored at the chest wall (column 0)
  const double cy = 0.5 * s + rng.uniform(-0.04, 0.04) * s;
  const double ar = (0.42 + rng.uniform(-0.03, 0.03)) * s;
  const double ac = (0.72 + rng.uniform(-0.04, 0.04)) * s;

  auto inside = [&](double r, double c) {
    const double dr = (r - cy) / ar;
    const double dc = c / ac;
    return dr * dr + dc * dc <= 1.0;
  };

  // broad illumination bumps for tissue texture
  const int bumps = 14;
  std::vector<double> br(bumps), bc(bumps), bs(bumps), ba(bumps);
  for (int b = 0; b < bumps; ++b) {
    br[b] = rng.uniform(0.0, s);
    bc[b] = rng.uniform(0.0, 0.9 * s);
    bs[b] = rng.uniform(0.04 * s, 0.15 * s);
    ba[b] = rng.uniform(-0.055, 0.055);
  }

  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      double v;
      if (inside(r, c)) {
        v = 0.32;
        for (int b = 0; b < bumps; ++b) {
          const double dr = r - br[b];
          const double dc = c - bc[b];
          const double d2 = dr * dr + dc * dc;
          if (d2 < 9.0 * bs[b] * bs[b]) v += ba[b] * std::exp(-d2 / (2.0 * bs[b] * bs[b]));
        }
        v += rng.uniform(-0.015, 0.015);
      } else {
        v = 0.02 + rng.uniform(0.0, 0.006);
      }
      img[static_cast<std::size_t>(r) * side + c] = v;
    }
  }

  for (const LesionSeed& seed : plan.lesions) {
    // per-view geometric jitter, same lesion identity across views
    const double jr = rng.uniform(-6.0, 6.0);
    const double jc = rng.uniform(-6.0, 6.0);
    const double size = seed.size * rng.uniform(0.9, 1.1);
    const double cr = cy + seed.center_row_frac * ar + jr;
    const double cc = seed.center_col_frac * ac + jc;

    if (seed.is_mass) {
      const double reach = 2.2 * size;
      const int r0 = std::max(0, static_cast<int>(std::floor(cr - reach)));
      const int r1 = std::min(side - 1, static_cast<int>(std::ceil(cr + reach)));
      const int c0 = std::max(0, static_cast<int>(std::floor(cc - reach)));
      const int c1 = std::min(side - 1, static_cast<int>(std::ceil(cc + reach)));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const double dr = r - cr;
          const double dc = c - cc;
          const double d = std::sqrt(dr * dr + dc * dc);
          double profile;
          if (seed.class_id == kMalignant) {
            // spiculated edge: angular ripple on a slow falloff
            const double theta = std::atan2(dr, dc);
            const double spic = 1.0 + 0.25 * std::cos(7.0 * theta + seed.phase);
            profile = std::exp(-std::pow(d / size, 1.6)) * spic;
          } else {
            profile = std::exp(-(d * d) / (size * size));
          }
          img[static_cast<std::size_t>(r) * side + c] += seed.amplitude * profile;
        }
      }
      Finding f;
      f.class_id = seed.class_id;
      f.box = BBox{cr - 1.8 * size, cc - 1.8 * size, cr + 1.8 * size, cc + 1.8 * size}
                  .clipped(s - 1.0, s - 1.0);
      out.findings.push_back(f);
    } else {
      double min_r = cr, max_r = cr, min_c = cc, max_c = cc;
      for (int k = 0; k < seed.speckles; ++k) {
        const double sr = cr + rng.uniform(-seed.size, seed.size);
        const double sc = cc + rng.uniform(-seed.size, seed.size);
        const double rho = rng.uniform(1.0, 1.8);
        const double amp = seed.amplitude * rng.uniform(0.8, 1.2);
        min_r = std::min(min_r, sr);
        max_r = std::max(max_r, sr);
        min_c = std::min(min_c, sc);
        max_c = std::max(max_c, sc);
        const int r0 = std::max(0, static_cast<int>(std::floor(sr - 4.0)));
        const int r1 = std::min(side - 1, static_cast<int>(std::ceil(sr + 4.0)));
        const int c0 = std::max(0, static_cast<int>(std::floor(sc - 4.0)));
        const int c1 = std::min(side - 1, static_cast<int>(std::ceil(sc + 4.0)));
        for (int r = r0; r <= r1; ++r) {
          for (int c = c0; c <= c1; ++c) {
            const double dr = r - sr;
            const double dc = c - sc;
            img[static_cast<std::size_t>(r) * side + c] +=
                amp * std::exp(-(dr * dr + dc * dc) / (rho * rho));
          }
        }
      }
      Finding f;
      f.class_id = seed.class_id;
      f.box = BBox{min_r - 4.0, min_c - 4.0, max_r + 4.0, max_c + 4.0}
                  .clipped(s - 1.0, s - 1.0);
      out.findings.push_back(f);
    }
  }

  for (std::size_t i = 0; i < out.canonical.numel(); ++i) {
    img[i] = std::clamp(img[i], 0.0, 1.0);
  }
  return out;
}

std::string make_subject_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%04d", index);
  return buf;
}

}  // namespace

GeneratedDataset generate_dataset(const PhantomConfig& cfg, int exams,
                                  std::uint64_t seed) {
  if (cfg.image_side < 32) throw std::invalid_argument("phantom: image side too small");
  if (cfg.devices < 1) throw std::invalid_argument("phantom: need >= 1 device");
  if (exams < 1) throw std::invalid_argument("phantom: need >= 1 exam");
  GeneratedDataset data;
  data.image_side = cfg.image_side;
  for (int d = 0; d < cfg.devices; ++d) {
    const double gamma =
        cfg.devices == 1 ? 1.0 : 0.7 + 0.6 * d / static_cast<double>(cfg.devices - 1);
    data.luts.push_back(make_gamma_lut(d, gamma));
  }

  const int n_exams = exams;
  data.exams.resize(static_cast<std::size_t>(n_exams));
  data.images.resize(static_cast<std::size_t>(n_exams) * 4);

  // one decorrelated stream per exam so rendering can run in parallel and
  // stay independent of the thread count
  Rng root(seed);
  std::vector<std::uint64_t> exam_seeds(static_cast<std::size_t>(n_exams));
  for (auto& s : exam_seeds) s = root.next_u64();

  kernels::parallel_for(0, n_exams, 1, [&](int lo, int hi) {
    for (int e = lo; e < hi; ++e) {
      Rng rng(exam_seeds[static_cast<std::size_t>(e)]);
      Exam& exam = data.exams[static_cast<std::size_t>(e)];
      exam.subject_id = make_subject_id(e);
      const int device = e % cfg.devices;
      const DeviceLut& lut = data.luts[static_cast<std::size_t>(device)];

      int slot = 0;
      for (Laterality lat : {Laterality::kLeft, Laterality::kRight}) {
        const BreastPlan plan = plan_breast(cfg, rng);
        exam.malignant[lat] = plan.malignant;
        for (View view : {View::kCc, View::kMlo}) {
          const RenderedView rendered = render_view(cfg.image_side, plan, rng);
          GeneratedImage& gi = data.images[static_cast<std::size_t>(e) * 4 + slot];
          gi.record.subject_id = exam.subject_id;
          gi.record.laterality = lat;
          gi.record.view = view;
          gi.record.device = device;
          gi.record.image_id = exam.subject_id + "_" + laterality_name(lat) + "_" +
                               view_name(view);
          gi.record.path = "images/" + gi.record.image_id + ".pgm";
          gi.record.findings = rendered.findings;
          gi.raw = encode_raw(rendered.canonical, lut);
          exam.images[ExamImageKey{lat, view}] = gi.record.image_id;
          ++slot;
        }
      }
    }
  });
  return data;
}

// ---------------------------------------------------------------------------
// portable graymap

void write_pgm(const std::string& path, const Tensor& raw, int maxval) {
  if (raw.rank() != 3 || raw.extent(0) != 1) {
    throw std::invalid_argument("write_pgm: want a [1,H,W] tensor");
  }
  const int h = raw.extent(1);
  const int w = raw.extent(2);
  std::string buf;
  buf.reserve(static_cast<std::size_t>(h) * w * 7 + 64);
  buf += "P2\n";
  buf += std::to_string(w) + " " + std::to_string(h) + "\n";
  buf += std::to_string(maxval) + "\n";
  char num[16];
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = raw.at(0, r, c);
      if (v < 0.0 || v > maxval || v != std::floor(v)) {
        throw std::invalid_argument("write_pgm: sample outside [0,maxval]");
      }
      std::snprintf(num, sizeof(num), "%d", static_cast<int>(v));
      buf += num;
      buf += (c % 12 == 11 || c == w - 1) ? '\n' : ' ';
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot write '" + path + "'");
  out << buf;
}

Tensor read_pgm(const std::string& path, int* maxval) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open '" + path + "'");
  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error("read_pgm: truncated file '" + path + "'");
  };
  if (next_token() != "P2") {
    throw std::runtime_error("read_pgm: '" + path + "' is not a plain graymap");
  }
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int mv = std::stoi(next_token());
  if (w < 1 || h < 1 || mv < 1 || mv > 65535) {
    throw std::runtime_error("read_pgm: bad header in '" + path + "'");
  }
  Tensor out({1, h, w});
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const int v = std::stoi(next_token());
    if (v < 0 || v > mv) throw std::runtime_error("read_pgm: sample out of range");
    out[i] = static_cast<double>(v);
  }
  if (maxval != nullptr) *maxval = mv;
  return out;
}

// ---------------------------------------------------------------------------
// dataset directory

void write_dataset(const std::string& dir, const GeneratedDataset& data) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "luts");

  for (const DeviceLut& lut : data.luts) {
    std::ostringstream os;
    os.precision(17);
    for (double v : lut.table) os << v << "\n";
    const std::string path =
        (fs::path(dir) / "luts" / ("device_" + std::to_string(lut.device_id) + ".txt"))
            .string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_dataset: cannot write '" + path + "'");
    out << os.str();
  }

  kernels::parallel_for(0, static_cast<int>(data.images.size()), 1, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const GeneratedImage& gi = data.images[static_cast<std::size_t>(i)];
      write_pgm((fs::path(dir) / gi.record.path).string(), gi.raw);
    }
  });

  ordered_json manifest;
  manifest["format"] = "mammodet-dataset";
  manifest["version"] = 1;
  manifest["image_side"] = data.image_side;
  manifest["maxval"] = kRawMaxValue;
  manifest["luts"] = ordered_json::array();
  for (const DeviceLut& lut : data.luts) {
    manifest["luts"].push_back(
        {{"device", lut.device_id},
         {"path", "luts/device_" + std::to_string(lut.device_id) + ".txt"},
         {"size", lut.table.size()}});
  }
  manifest["exams"] = ordered_json::array();
  std::size_t image_index = 0;
  for (const Exam& exam : data.exams) {
    ordered_json je;
    je["subject"] = exam.subject_id;
    ordered_json labels;
    for (const auto& [lat, mal] : exam.malignant) {
      labels[laterality_name(lat)] = mal;
    }
    je["malignant"] = labels;
    je["images"] = ordered_json::array();
    for (int k = 0; k < 4 && image_index < data.images.size(); ++k, ++image_index) {
      const ImageRecord& rec = data.images[image_index].record;
      ordered_json ji;
      ji["laterality"] = laterality_name(rec.laterality);
      ji["view"] = view_name(rec.view);
      ji["device"] = rec.device;
      ji["path"] = rec.path;
      ji["findings"] = ordered_json::array();
      for (const Finding& f : rec.findings) {
        ji["findings"].push_back({{"class", f.class_id == kMalignant ? "malignant" : "benign"},
                                  {"row_min", f.box.row_min},
                                  {"col_min", f.box.col_min},
                                  {"row_max", f.box.row_max},
                                  {"col_max", f.box.col_max}});
      }
      je["images"].push_back(ji);
    }
    manifest["exams"].push_back(je);
  }
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("write_dataset: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

LoadedDataset load_dataset(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + manifest_path + "'");
  ordered_json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw std::runtime_error("load_dataset: bad manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "mammodet-dataset" || manifest.value("version", 0) != 1) {
    throw std::runtime_error("load_dataset: unsupported manifest format/version");
  }
  LoadedDataset data;
  data.root = dir;
  data.image_side = manifest.at("image_side").get<int>();
  for (const auto& jl : manifest.at("luts")) {
    DeviceLut lut;
    lut.device_id = jl.at("device").get<int>();
    const std::string path = (fs::path(dir) / jl.at("path").get<std::string>()).string();
    std::ifstream lin(path);
    if (!lin) throw std::runtime_error("load_dataset: cannot open LUT '" + path + "'");
    double v;
    while (lin >> v) lut.table.push_back(v);
    if (lut.table.size() != jl.at("size").get<std::size_t>()) {
      throw std::runtime_error("load_dataset: LUT '" + path + "' has wrong size");
    }
    check_lut(lut);
    data.luts.push_back(std::move(lut));
  }
  for (const auto& je : manifest.at("exams")) {
    Exam exam;
    exam.subject_id = je.at("subject").get<std::string>();
    for (const auto& [name, mal] : je.at("malignant").items()) {
      exam.malignant[parse_laterality(name)] = mal.get<bool>();
    }
    for (const auto& ji : je.at("images")) {
      ImageRecord rec;
      rec.subject_id = exam.subject_id;
      rec.laterality = parse_laterality(ji.at("laterality").get<std::string>());
      rec.view = parse_view(ji.at("view").get<std::string>());
      rec.device = ji.at("device").get<int>();
      rec.path = ji.at("path").get<std::string>();
      rec.image_id = exam.subject_id + "_" + laterality_name(rec.laterality) + "_" +
                     view_name(rec.view);
      for (const auto& jf : ji.at("findings")) {
        Finding f;
        const std::string cls = jf.at("class").get<std::string>();
        if (cls == "malignant") {
          f.class_id = kMalignant;
        } else if (cls == "benign") {
          f.class_id = kBenign;
        } else {
          throw std::runtime_error("load_dataset: unknown finding class '" + cls + "'");
        }
        f.box = BBox{jf.at("row_min").get<double>(), jf.at("col_min").get<double>(),
                     jf.at("row_max").get<double>(), jf.at("col_max").get<double>()};
        rec.findings.push_back(f);
      }
      exam.images[ExamImageKey{rec.laterality, rec.view}] = rec.image_id;
      data.images.push_back(std::move(rec));
    }
    data.exams.push_back(std::move(exam));
  }
  return data;
}

Tensor load_normalized_image(const LoadedDataset& data, const ImageRecord& record) {
  const Tensor raw = read_pgm((fs::path(data.root) / record.path).string());
  for (const DeviceLut& lut : data.luts) {
    if (lut.device_id == record.device) return normalize_intensity(raw, lut);
  }
  throw std::runtime_error("load_normalized_image: no LUT for device " +
                           std::to_string(record.device));
}

// ---------------------------------------------------------------------------
// model weights

namespace {

constexpr char kMagic[4] = {'M', 'M', 'D', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& buf, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(buf, bits);
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path)
      : data_(data), path_(path) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
  std::uint64_t u64() { return bytes(8); }
  double f64() {
    const std::uint64_t bits = bytes(8);
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw_magic(char out[4]) {
    need(4);
    std::memcpy(out, data_.data() + pos_, 4);
    pos_ += 4;
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t offset() const { return pos_; }

 private:
  std::uint64_t bytes(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    return v;
  }
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw std::runtime_error("model file '" + path_ + "': truncated at offset " +
                               std::to_string(pos_) + " (need " + std::to_string(n) +
                               " more bytes)");
    }
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const std::string& path, DetectionModel& model) {
  const std::vector<ParamSlot> slots = model.param_slots();
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kWeightsVersion);
  put_u64(buf, slots.size());
  for (const ParamSlot& slot : slots) {
    put_u32(buf, static_cast<std::uint32_t>(slot.name.size()));
    buf += slot.name;
    put_u32(buf, static_cast<std::uint32_t>(slot.shape.size()));
    for (int e : slot.shape) put_u64(buf, static_cast<std::uint64_t>(e));
    for (std::size_t i = 0; i < slot.size; ++i) put_f64(buf, slot.data[i]);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot write '" + path + "'");
  out << buf;
}

void load_model(const std::string& path, DetectionModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  Reader r(data, path);

  char magic[4];
  r.raw_magic(magic);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("model file '" + path + "': bad magic bytes");
  }
  const std::uint32_t version = r.u32();
  if (version != kWeightsVersion) {
    throw std::runtime_error("model file '" + path + "': format version " +
                             std::to_string(version) + " != supported " +
                             std::to_string(kWeightsVersion));
  }
  std::vector<ParamSlot> slots = model.param_slots();
  std::vector<bool> filled(slots.size(), false);

  const std::uint64_t count = r.u64();
  if (count != slots.size()) {
    throw std::runtime_error("model file '" + path + "': holds " +
                             std::to_string(count) + " entries, model expects " +
                             std::to_string(slots.size()));
  }
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    std::vector<int> shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<int>(r.u64()));
      numel *= static_cast<std::size_t>(shape.back());
    }
    std::size_t slot_idx = slots.size();
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s].name == name) {
        slot_idx = s;
        break;
      }
    }
    if (slot_idx == slots.size()) {
      throw std::runtime_error("model file '" + path + "': unknown parameter '" +
                               name + "'");
    }
    if (filled[slot_idx]) {
      throw std::runtime_error("model file '" + path + "': duplicate parameter '" +
                               name + "'");
    }
    if (shape != slots[slot_idx].shape) {
      throw std::runtime_error("model file '" + path + "': shape mismatch for '" +
                               name + "'");
    }
    for (std::size_t i = 0; i < numel; ++i) slots[slot_idx].data[i] = r.f64();
    filled[slot_idx] = true;
  }
  if (!r.done()) {
    throw std::runtime_error("model file '" + path + "': trailing bytes at offset " +
                             std::to_string(r.offset()));
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!filled[s]) {
      throw std::runtime_error("model file '" + path + "': missing parameter '" +
                               slots[s].name + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// score table

void write_score_table(const std::string& path, const ScoreTable& table,
                       const std::vector<ImageRecord>& images,
                       const std::vector<DihedralTransform>& transforms) {
  std::string buf = "subject_id,laterality,view,rot,flip,score\n";
  char num[40];
  for (const ImageRecord& rec : images) {
    for (const DihedralTransform& t : transforms) {
      std::snprintf(num, sizeof(num), "%.17g", table.get(rec.image_id, t));
      buf += rec.subject_id + "," + laterality_name(rec.laterality) + "," +
             view_name(rec.view) + "," + std::to_string(t.rot_quarter) + "," +
             (t.hflip ? "1" : "0") + "," + num + "\n";
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_score_table: cannot write '" + path + "'");
  out << buf;
}

ScoreTable read_score_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_score_table: cannot open '" + path + "'");
  ScoreTable table;
  std::string line;
  if (!std::getline(in, line) || line != "subject_id,laterality,view,rot,flip,score") {
    throw std::runtime_error("read_score_table: bad header in '" + path + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string subject, lat, view, rot, flip, score;
    if (!std::getline(ss, subject, ',') || !std::getline(ss, lat, ',') ||
        !std::getline(ss, view, ',') || !std::getline(ss, rot, ',') ||
        !std::getline(ss, flip, ',') || !std::getline(ss, score)) {
      throw std::runtime_error("read_score_table: malformed line " +
                               std::to_string(line_no));
    }
    DihedralTransform t;
    t.rot_quarter = std::stoi(rot);
    t.hflip = flip == "1";
    table.put(subject + "_" + lat + "_" + view, t, std::stod(score));
  }
  return table;
}

}  // namespace mammodet
