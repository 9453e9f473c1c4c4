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

#ifndef LVC_QUANTIZE_HPP_
#define LVC_QUANTIZE_HPP_

#include <cmath>

#include "lvc/autograd.hpp"
#include "lvc/common.hpp"
#include "lvc/tensor.hpp"

namespace lvc {

// Eval-mode quantization: element-wise rounding, ties away from zero, so
// encoder and decoder agree bit-exactly.
inline Tensor quantize_round(const Tensor& t) {
  Tensor out = t;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::round(out[i]);
  return out;
}

// Train-mode relaxation: additive uniform noise in (-0.5, 0.5). Gradient
// passes straight through the constant offset.
inline Var quantize_noise(const Var& t, Rng& rng) {
  Tensor noise(t.shape());
  for (int64_t i = 0; i < noise.numel(); ++i) {
    double u;
    do {
      u = rng.uniform() - 0.5;
    } while (u == -0.5);
    noise[i] = u;
  }
  return add_const(t, noise);
}

}  // namespace lvc

#endif  // LVC_QUANTIZE_HPP_
