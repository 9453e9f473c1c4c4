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

#ifndef LVC_INTRA_CODEC_HPP_
#define LVC_INTRA_CODEC_HPP_

#include <string>
#include <utility>
#include <vector>

#include "lvc/bitstream.hpp"
#include "lvc/context_eval.hpp"
#include "lvc/nn.hpp"

namespace lvc {

// VAE image coder with non-local attention transforms: four stride-2 5x5
// stages down to H/16 latents, a two-stage hyper branch down to H/64, and a
// context model that fuses masked-3d-conv autoregressive features with the
// decoded hyper features through cascaded 1x1x1 convolutions.
//
// The same architecture serves intra frames and (with its own weights and a
// [-1,1] -> [0,1] input shift) inter residuals.
struct IntraCodecConfig {
  int n_ch = 96;      // transform width
  int m_ch = 128;     // latent channels
  int hyper_ch = 96;  // hyper latent channels
  int ctx_features = 12;
  std::vector<int> fusion_hidden = {24, 12};
  bool nlam = true;
  bool residual_role = false;  // input in [-1,1], coded as (r+1)/2
  double sigma_min = 0.01;
};

// mu/sigma pair produced by an entropy model
struct GaussianParams {
  Var mu;
  Var sigma;
};

// per-channel Gaussian used to code the hyper latents
struct StaticPrior {
  Tensor mu;     // [C]
  Tensor sigma;  // [C], already floored at sigma_min
};

struct FrameCodeResult {
  Tensor recon;  // [3,H,W], clamped ([0,1] intra, [-1,1] residual)
  CodedTensor hyper;
  CodedTensor latent;
  double latent_bits_estimate = 0.0;  // continuous-likelihood estimates
  double hyper_bits_estimate = 0.0;
  double coded_bits() const {
    return 8.0 * static_cast<double>(hyper.payload.size() + latent.payload.size());
  }
};

class IntraCodec {
 public:
  IntraCodec(IntraCodecConfig cfg, const std::string& prefix, uint64_t seed);

  const IntraCodecConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  // ---- differentiable ops (training path) ----
  Var analysis(const Var& frame) const;       // [N,3,H,W] -> [N,M,H/16,W/16]
  Var synthesis(const Var& latents) const;    // mirror, unclamped
  Var hyper_analysis(const Var& latents) const;  // -> [N,hyper,H/64,W/64]
  Var hyper_synthesis(const Var& z) const;       // -> [N,M,H/16,W/16]
  GaussianParams context_params(const Var& quantized_latents, const Var& hyper_features) const;
  GaussianParams z_prior_params(const std::vector<int>& zshape) const;  // broadcast [N,C,h,w]

  // ---- coding path (plain tensors, bit-exact) ----
  ContextEval context_eval() const;
  StaticPrior z_prior() const;
  // frame is [3,H,W] with H,W multiples of 64 ([-1,1] when residual_role)
  FrameCodeResult code_frame(const Tensor& frame) const;
  Tensor decode_frame(const CodedTensor& hyper, const CodedTensor& latent, int frame_h,
                      int frame_w) const;

  // eval-mode synthesis from an integer latent volume [M,h,w]
  Tensor synthesize_eval(const Tensor& latent_volume) const;

  int latent_channels() const { return cfg_.m_ch; }
  int hyper_channels() const { return cfg_.hyper_ch; }

 private:
  void check_frame_dims(int h, int w) const;

  IntraCodecConfig cfg_;
  ParamStore ps_;
  Conv2d a1_, a2_, a3_, a4_;
  Nlam a_nlam2_, a_nlam4_;
  Nlam s_nlam0_, s_nlam2_;
  Deconv2d s1_, s2_, s3_, s4_;
  Conv2d h1_, h2_;
  Nlam h_nlam_;
  Nlam hs_nlam_;
  Deconv2d hs1_, hs2_;
  MaskedConv3dLayer ctx_;
  VoxelMlp fusion_;
  Var z_mu_, z_sigma_raw_;
};

}  // namespace lvc

#endif  // LVC_INTRA_CODEC_HPP_
