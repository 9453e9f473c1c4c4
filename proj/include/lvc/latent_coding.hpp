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

#ifndef LVC_LATENT_CODING_HPP_
#define LVC_LATENT_CODING_HPP_

#include "lvc/bitstream.hpp"
#include "lvc/context_eval.hpp"
#include "lvc/intra_codec.hpp"

namespace lvc {

// Coding loops shared by the intra/residual codec and the flow entropy
// model. Volumes are integer-valued [C,H,W] tensors; alphabets are the
// per-tensor [v_min, v_max] transmitted in the tensor framing.

CodedTensor encode_static(const Tensor& volume, const StaticPrior& prior);
Tensor decode_static(const CodedTensor& coded, int C, int H, int W, const StaticPrior& prior);
double estimate_bits_static(const Tensor& volume, const StaticPrior& prior);

// autoregressive path; h_prev may be null for models without temporal priors
CodedTensor encode_context(const Tensor& volume, const Tensor& hyper, const Tensor* h_prev,
                           const ContextEval& ctx);
Tensor decode_context(const CodedTensor& coded, int C, int H, int W, const Tensor& hyper,
                      const Tensor* h_prev, const ContextEval& ctx);
double estimate_bits_context(const Tensor& volume, const Tensor& hyper, const Tensor* h_prev,
                             const ContextEval& ctx);

// alphabet bounds from the actual quantized values (i16 per the framing)
std::pair<int, int> tensor_bounds(const Tensor& volume);

}  // namespace lvc

#endif  // LVC_LATENT_CODING_HPP_
