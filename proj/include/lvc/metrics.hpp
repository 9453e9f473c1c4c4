// Copyright (c) the LVC project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LVC_METRICS_HPP_
#define LVC_METRICS_HPP_

#include <vector>

#include "lvc/autograd.hpp"
#include "lvc/tensor.hpp"

namespace lvc {

// Multi-scale SSIM in the RGB domain: 11x11 Gaussian window (sigma 1.5),
// scale weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333), computed per
// channel and averaged. Inputs smaller than the 5-scale minimum use as many
// scales as fit (min dim >= 11 after halvings) with the weight prefix
// renormalized; msssim_scales reports the count.
int msssim_scales(int h, int w);
double msssim(const Tensor& a, const Tensor& b);  // [3,H,W] in [0,1]

// Differentiable variant for the training loss, mean over the batch.
// Negative contrast terms are clamped at 1e-6 before the weight powers.
Var msssim_var(const Var& a, const Var& b);  // [N,3,H,W] -> scalar

struct RatePoint {
  double bpp = 0.0;
  double quality = 0.0;  // MS-SSIM
};

// Bjontegaard delta-rate: piecewise-cubic (PCHIP) interpolation of
// log10(rate) over quality, integrated across the overlapping quality range.
// Needs >= 4 points per curve; throws BadInputError when the quality ranges
// do not overlap.
double bd_rate_percent(std::vector<RatePoint> anchor, std::vector<RatePoint> test);

}  // namespace lvc

#endif  // LVC_METRICS_HPP_
