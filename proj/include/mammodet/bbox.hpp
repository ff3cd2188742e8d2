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

#ifndef MAMMODET_BBOX_HPP
#define MAMMODET_BBOX_HPP

#include <algorithm>

namespace mammodet {

// Axis-aligned box in continuous pixel coordinates, min <= max per axis.
struct BBox {
  double row_min = 0.0;
  double col_min = 0.0;
  double row_max = 0.0;
  double col_max = 0.0;

  double height() const { return row_max - row_min; }
  double width() const { return col_max - col_min; }
  double area() const { return height() * width(); }
  double center_row() const { return 0.5 * (row_min + row_max); }
  double center_col() const { return 0.5 * (col_min + col_max); }

  BBox clipped(double max_row, double max_col) const {
    BBox b;
    b.row_min = std::clamp(row_min, 0.0, max_row);
    b.col_min = std::clamp(col_min, 0.0, max_col);
    b.row_max = std::clamp(row_max, 0.0, max_row);
    b.col_max = std::clamp(col_max, 0.0, max_col);
    return b;
  }
};

}  // namespace mammodet

#endif  // MAMMODET_BBOX_HPP
