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

#ifndef MAMMODET_GRADCHECK_HPP
#define MAMMODET_GRADCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mammodet {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_rel_err <= tolerance; }
};

// Central finite differences (step 1e-6, double precision) against every
// analytic gradient in the stack, sampled away from bilinear kinks:
// bilinear sampling, deformable convolution (input / weights / offsets),
// DPS-ROI pooling (maps / offsets), CBR blocks, the two losses, and the
// end-to-end miniature model.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed);

// |a - f| / max(|a|, |f|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-3);

inline constexpr double kFdStep = 1e-6;

}  // namespace mammodet

#endif  // MAMMODET_GRADCHECK_HPP
