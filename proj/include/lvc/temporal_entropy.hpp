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

#ifndef LVC_TEMPORAL_ENTROPY_HPP_
#define LVC_TEMPORAL_ENTROPY_HPP_

#include <string>
#include <utility>
#include <vector>

#include "lvc/context_eval.hpp"
#include "lvc/intra_codec.hpp"
#include "lvc/nn.hpp"

namespace lvc {

// Entropy model for the quantized flow features: per-element Gaussians
// conditioned on masked-3d-conv spatial context, a decoded flow hyperprior,
// and a ConvLSTM temporal prior carried across the frames of a GOP.
struct TemporalEntropyConfig {
  int flow_ch = 64;   // matches FlowCodecConfig::feature_ch
  int hyper_ch = 64;  // flow hyper latent channels
  int ctx_features = 12;
  std::vector<int> fusion_hidden = {24, 12};
  int lstm_hidden = 64;  // must equal flow_ch: state is volume-aligned
  bool nlam = true;
  double sigma_min = 0.01;
};

// ConvLSTM (h, c) carried across inter frames; reset to zeros at GOP starts.
struct TemporalState {
  Tensor h;  // [64, H/16, W/16]
  Tensor c;
  static TemporalState zeros(int ch, int height, int width) {
    TemporalState s;
    s.h = Tensor({ch, height, width});
    s.c = Tensor({ch, height, width});
    return s;
  }
};

class TemporalEntropyModel {
 public:
  TemporalEntropyModel(TemporalEntropyConfig cfg, const std::string& prefix, uint64_t seed);

  const TemporalEntropyConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  // ---- differentiable ops ----
  Var hyper_analysis(const Var& features) const;  // [N,64,h,w] -> [N,64,h/4,w/4]
  Var hyper_synthesis(const Var& z) const;        // mirror
  // (mu, sigma) for the flow features; h_prev zeroed at GOP starts or when
  // the temporal prior is ablated
  GaussianParams context_params(const Var& quantized_features, const Var& hyper_features,
                                const Var& h_prev) const;
  GaussianParams z_prior_params(const std::vector<int>& zshape) const;
  // ConvLSTM update from the post-coding quantized features
  std::pair<Var, Var> temporal_update(const Var& features, const Var& h_prev,
                                      const Var& c_prev) const;

  // ---- coding path ----
  ContextEval context_eval() const;
  StaticPrior z_prior() const;
  TemporalState update_state_eval(const Tensor& feature_volume, const TemporalState& s) const;
  Tensor hyper_synthesis_eval(const Tensor& z_volume) const;  // [64,h,w]
  Tensor hyper_analysis_eval(const Tensor& feature_volume) const;

 private:
  TemporalEntropyConfig cfg_;
  ParamStore ps_;
  Conv2d h1_, h2_;
  Nlam h_nlam_;
  Nlam hs_nlam_;
  Deconv2d hs1_, hs2_;
  MaskedConv3dLayer ctx_;
  VoxelMlp fusion_;
  ConvLstmCell lstm_;
  Var z_mu_, z_sigma_raw_;
};

}  // namespace lvc

#endif  // LVC_TEMPORAL_ENTROPY_HPP_
