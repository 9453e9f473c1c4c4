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

#ifndef LVC_FLOW_CODEC_HPP_
#define LVC_FLOW_CODEC_HPP_

#include <string>

#include "lvc/nn.hpp"

namespace lvc {

// One-stage unsupervised flow: two frames are fused into quantized motion
// features at (H/16, W/16, 64); the decoder maps the features straight to a
// dense HxWx2 flow field for backward warping. No raw flow ever exists on
// the encoder side.
struct FlowCodecConfig {
  int width = 64;        // internal transform width
  int feature_ch = 64;   // quantized feature channels (fixed by the format)
  bool nlam = true;
};

class FlowCodec {
 public:
  FlowCodec(FlowCodecConfig cfg, const std::string& prefix, uint64_t seed);

  const FlowCodecConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  // ref/target: [N,3,H,W] with matching dims -> continuous [N,64,H/16,W/16]
  Var encode(const Var& ref, const Var& target) const;
  // quantized features -> [N,2,H,W] flow
  Var decode(const Var& features) const;

  // plain-tensor eval helpers ([3,H,W] frames, [C,h,w] volumes)
  Tensor encode_eval(const Tensor& ref, const Tensor& target) const;  // continuous
  Tensor decode_eval(const Tensor& feature_volume) const;             // [2,H,W]

 private:
  FlowCodecConfig cfg_;
  ParamStore ps_;
  Conv2d e1_, e2_, e3_, e4_;
  Nlam e_nlam2_, e_nlam4_;
  Nlam d_nlam0_, d_nlam2_;
  Deconv2d d1_, d2_, d3_, d4_;
};

// Backward warping of [3,H,W] by [2,H,W] (plain-tensor convenience).
Tensor warp_eval(const Tensor& ref, const Tensor& flow);

}  // namespace lvc

#endif  // LVC_FLOW_CODEC_HPP_
