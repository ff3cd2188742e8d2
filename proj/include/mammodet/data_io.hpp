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

#ifndef MAMMODET_DATA_IO_HPP
#define MAMMODET_DATA_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mammodet/config.hpp"
#include "mammodet/inference.hpp"
#include "mammodet/model.hpp"
#include "mammodet/tensor.hpp"

namespace mammodet {

inline constexpr int kRawMaxValue = 65535;  // plain 16-bit graymaps

// Monotone per-device intensity mapping raw -> [0, 1].
struct DeviceLut {
  int device_id = 0;
  std::vector<double> table;  // indexed by integer raw value
};

DeviceLut make_gamma_lut(int device_id, double gamma, int table_size = kRawMaxValue + 1);
// Per-pixel table lookup; raw values must be integers inside the table
// domain (rejected input otherwise).
Tensor normalize_intensity(const Tensor& raw, const DeviceLut& lut);
// Quantize a [0,1] canonical image into the device's raw domain (the
// inverse of the LUT up to rounding).
Tensor encode_raw(const Tensor& canonical, const DeviceLut& lut);

struct Finding {
  BBox box;
  int class_id = kBenign;  // kBenign or kMalignant
};

struct ImageRecord {
  std::string image_id;  // "<subject>_<laterality>_<view>"
  std::string subject_id;
  Laterality laterality = Laterality::kLeft;
  View view = View::kCc;
  int device = 0;
  std::string path;  // pgm file, relative to the dataset root
  std::vector<Finding> findings;
};

struct GeneratedImage {
  ImageRecord record;
  Tensor raw;  // [1,H,W] integer-valued
};

struct GeneratedDataset {
  std::vector<Exam> exams;
  std::vector<GeneratedImage> images;
  std::vector<DeviceLut> luts;
  int image_side = 0;
};

// Deterministic multi-scale lesion phantom: soft-edged masses and
// high-intensity calcification speckle clusters on a textured breast
// background, four views per exam, per-view jittered geometry.
GeneratedDataset generate_dataset(const PhantomConfig& cfg, int exams,
                                  std::uint64_t seed);

// ---- portable graymap (plain, 16-bit) ----
void write_pgm(const std::string& path, const Tensor& raw, int maxval = kRawMaxValue);
Tensor read_pgm(const std::string& path, int* maxval = nullptr);

// ---- dataset directory: manifest.json + images/ + luts/ ----
void write_dataset(const std::string& dir, const GeneratedDataset& data);

struct LoadedDataset {
  std::string root;
  int image_side = 0;
  std::vector<Exam> exams;
  std::vector<ImageRecord> images;
  std::vector<DeviceLut> luts;
};

LoadedDataset load_dataset(const std::string& dir);
// reads the record's graymap and applies its device LUT
Tensor load_normalized_image(const LoadedDataset& data, const ImageRecord& record);

// ---- model weights: magic, version, entry count, then per entry
// (name length, name, rank, extents, little-endian f64 payload) ----
void save_model(const std::string& path, DetectionModel& model);
// The model must already have the matching architecture; every stored
// entry must match a slot by name and shape, and every slot must be
// filled. Errors name the byte offset or the offending entry.
void load_model(const std::string& path, DetectionModel& model);

// ---- score table csv: subject_id,laterality,view,rot,flip,score ----
void write_score_table(const std::string& path, const ScoreTable& table,
                       const std::vector<ImageRecord>& images,
                       const std::vector<DihedralTransform>& transforms);
ScoreTable read_score_table(const std::string& path);

}  // namespace mammodet

#endif  // MAMMODET_DATA_IO_HPP
