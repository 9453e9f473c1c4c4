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

#ifndef LVC_CONTEXT_EVAL_HPP_
#define LVC_CONTEXT_EVAL_HPP_

#include <utility>
#include <vector>

#include "lvc/tensor.hpp"

namespace lvc {

// Per-element causal context evaluation used by the actual coding loops.
// Both the encoder and the decoder call exactly this code, in the same scan
// order, so their (mu, sigma) sequences are bit-identical by construction.
// The vectorized autograd path is for training and rate estimation only.
//
// Scan order over a (C,H,W) latent volume: raster over (y, x) with the
// channel index fastest; the masked 5x5x5 taps cover only positions that
// strictly precede the current one in that order.
class ContextEval {
 public:
  ContextEval(const Tensor* mask_w, const Tensor* mask_b,
              std::vector<std::pair<const Tensor*, const Tensor*>> fusion, double sigma_min,
              bool uses_temporal)
      : mask_w_(mask_w),
        mask_b_(mask_b),
        fusion_(std::move(fusion)),
        sigma_min_(sigma_min),
        uses_temporal_(uses_temporal) {}

  bool uses_temporal() const { return uses_temporal_; }

  // vol, hyper (and h_prev when temporal) are [C,H,W] and aligned; only
  // causal entries of vol are read.
  void params_at(const Tensor& vol, const Tensor& hyper, const Tensor* h_prev, int c, int y,
                 int x, double* mu, double* sigma) const;

 private:
  const Tensor* mask_w_;
  const Tensor* mask_b_;
  std::vector<std::pair<const Tensor*, const Tensor*>> fusion_;
  double sigma_min_;
  bool uses_temporal_;
};

}  // namespace lvc

#endif  // LVC_CONTEXT_EVAL_HPP_
