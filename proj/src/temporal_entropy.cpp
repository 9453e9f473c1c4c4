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

#include "lvc/temporal_entropy.hpp"

#include <cmath>

namespace lvc {

namespace {
double softplus_stable(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
}  // namespace

TemporalEntropyModel::TemporalEntropyModel(TemporalEntropyConfig cfg, const std::string& prefix,
                                           uint64_t seed)
    : cfg_(cfg) {
  if (cfg_.lstm_hidden != cfg_.flow_ch)
    throw BadInputError("temporal entropy: lstm hidden width must match the feature channels");
  if (cfg_.ctx_features > 62 || cfg_.ctx_features < 2)
    throw BadInputError("temporal entropy: ctx_features out of range");
  Rng rng(seed);
  const int f = cfg_.flow_ch, h = cfg_.hyper_ch;
  h1_ = Conv2d(ps_, prefix + ".hyper.c1", f, h, 5, 2, 2, rng);
  h2_ = Conv2d(ps_, prefix + ".hyper.c2", h, h, 5, 2, 2, rng);
  h_nlam_ = Nlam(ps_, prefix + ".hyper.nlam", h, cfg_.nlam, rng);
  hs_nlam_ = Nlam(ps_, prefix + ".hyper_syn.nlam", h, cfg_.nlam, rng);
  hs1_ = Deconv2d(ps_, prefix + ".hyper_syn.d1", h, h, 5, 2, 2, 1, rng);
  hs2_ = Deconv2d(ps_, prefix + ".hyper_syn.d2", h, f, 5, 2, 2, 1, rng);

  ctx_ = MaskedConv3dLayer(ps_, prefix + ".ctx.masked", cfg_.ctx_features, rng);
  std::vector<int> widths;
  widths.push_back(cfg_.ctx_features + 2);  // context + hyper + temporal
  for (int wdt : cfg_.fusion_hidden) widths.push_back(wdt);
  widths.push_back(2);
  fusion_ = VoxelMlp(ps_, prefix + ".ctx.fusion", widths, rng);

  lstm_ = ConvLstmCell(ps_, prefix + ".lstm", f, cfg_.lstm_hidden, rng);

  z_mu_ = ps_.add(prefix + ".zprior.mu", Tensor({h}));
  z_sigma_raw_ = ps_.add(prefix + ".zprior.sigma_raw", Tensor({h}, 1.0));
}

Var TemporalEntropyModel::hyper_analysis(const Var& features) const {
  Var h = h_nlam_(h1_(features));
  return h2_(relu(h));
}

Var TemporalEntropyModel::hyper_synthesis(const Var& z) const {
  Var h = hs_nlam_(hs1_(z));
  return hs2_(relu(h));
}

GaussianParams TemporalEntropyModel::context_params(const Var& quantized_features,
                                                    const Var& hyper_features,
                                                    const Var& h_prev) const {
  if (!(quantized_features.shape() == hyper_features.shape()) ||
      !(quantized_features.shape() == h_prev.shape()))
    throw DimensionError("flow context: prior source shapes must match the features");
  Var feats = ctx_(quantized_features);
  Var fused = fusion_(
      concat_dim1({feats, as_voxel_feature(hyper_features), as_voxel_feature(h_prev)}));
  Var mu = from_voxel_feature(slice_dim1(fused, 0, 1));
  Var sigma = add_scalar(softplus(from_voxel_feature(slice_dim1(fused, 1, 2))), cfg_.sigma_min);
  return {mu, sigma};
}

GaussianParams TemporalEntropyModel::z_prior_params(const std::vector<int>& zshape) const {
  Var mu = broadcast_channel(z_mu_, zshape);
  Var sigma = broadcast_channel(add_scalar(softplus(z_sigma_raw_), cfg_.sigma_min), zshape);
  return {mu, sigma};
}

std::pair<Var, Var> TemporalEntropyModel::temporal_update(const Var& features, const Var& h_prev,
                                                          const Var& c_prev) const {
  return lstm_.step(features, h_prev, c_prev);
}

ContextEval TemporalEntropyModel::context_eval() const {
  std::vector<std::pair<const Tensor*, const Tensor*>> fusion;
  for (const auto& [w, b] : fusion_.layers) fusion.emplace_back(&w.val(), &b.val());
  return ContextEval(&ctx_.w.val(), &ctx_.b.val(), std::move(fusion), cfg_.sigma_min,
                     /*uses_temporal=*/true);
}

StaticPrior TemporalEntropyModel::z_prior() const {
  StaticPrior p;
  p.mu = z_mu_.val();
  p.sigma = Tensor({cfg_.hyper_ch});
  for (int c = 0; c < cfg_.hyper_ch; ++c)
    p.sigma[c] = cfg_.sigma_min + softplus_stable(z_sigma_raw_.val()[c]);
  return p;
}

TemporalState TemporalEntropyModel::update_state_eval(const Tensor& feature_volume,
                                                      const TemporalState& s) const {
  NoGradGuard ng;
  const auto& fs = feature_volume.shape();
  Var f(feature_volume.reshaped({1, fs[0], fs[1], fs[2]}));
  Var h(s.h.reshaped({1, fs[0], fs[1], fs[2]}));
  Var c(s.c.reshaped({1, fs[0], fs[1], fs[2]}));
  auto [hn, cn] = temporal_update(f, h, c);
  TemporalState out;
  out.h = hn.val().reshaped({fs[0], fs[1], fs[2]});
  out.c = cn.val().reshaped({fs[0], fs[1], fs[2]});
  return out;
}

Tensor TemporalEntropyModel::hyper_synthesis_eval(const Tensor& z_volume) const {
  NoGradGuard ng;
  const auto& zs = z_volume.shape();
  Var out = hyper_synthesis(Var(z_volume.reshaped({1, zs[0], zs[1], zs[2]})));
  const auto& os = out.shape();
  return out.val().reshaped({os[1], os[2], os[3]});
}

Tensor TemporalEntropyModel::hyper_analysis_eval(const Tensor& feature_volume) const {
  NoGradGuard ng;
  const auto& fs = feature_volume.shape();
  Var out = hyper_analysis(Var(feature_volume.reshaped({1, fs[0], fs[1], fs[2]})));
  const auto& os = out.shape();
  return out.val().reshaped({os[1], os[2], os[3]});
}

}  // namespace lvc
