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

#include "lvc/intra_codec.hpp"

#include <algorithm>
#include <cmath>

#include "lvc/latent_coding.hpp"
#include "lvc/quantize.hpp"

namespace lvc {

namespace {
double softplus_stable(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
}  // namespace

IntraCodec::IntraCodec(IntraCodecConfig cfg, const std::string& prefix, uint64_t seed)
    : cfg_(std::move(cfg)) {
  if (cfg_.ctx_features > 62 || cfg_.ctx_features < 2)
    throw BadInputError("intra codec: ctx_features out of range");
  Rng rng(seed);
  const int n = cfg_.n_ch, m = cfg_.m_ch, h = cfg_.hyper_ch;
  a1_ = Conv2d(ps_, prefix + ".analysis.c1", 3, n, 5, 2, 2, rng);
  a2_ = Conv2d(ps_, prefix + ".analysis.c2", n, n, 5, 2, 2, rng);
  a_nlam2_ = Nlam(ps_, prefix + ".analysis.nlam2", n, cfg_.nlam, rng);
  a3_ = Conv2d(ps_, prefix + ".analysis.c3", n, n, 5, 2, 2, rng);
  a4_ = Conv2d(ps_, prefix + ".analysis.c4", n, m, 5, 2, 2, rng);
  a_nlam4_ = Nlam(ps_, prefix + ".analysis.nlam4", m, cfg_.nlam, rng);

  s_nlam0_ = Nlam(ps_, prefix + ".synthesis.nlam0", m, cfg_.nlam, rng);
  s1_ = Deconv2d(ps_, prefix + ".synthesis.d1", m, n, 5, 2, 2, 1, rng);
  s2_ = Deconv2d(ps_, prefix + ".synthesis.d2", n, n, 5, 2, 2, 1, rng);
  s_nlam2_ = Nlam(ps_, prefix + ".synthesis.nlam2", n, cfg_.nlam, rng);
  s3_ = Deconv2d(ps_, prefix + ".synthesis.d3", n, n, 5, 2, 2, 1, rng);
  s4_ = Deconv2d(ps_, prefix + ".synthesis.d4", n, 3, 5, 2, 2, 1, rng);

  h1_ = Conv2d(ps_, prefix + ".hyper.c1", m, h, 5, 2, 2, rng);
  h2_ = Conv2d(ps_, prefix + ".hyper.c2", h, h, 5, 2, 2, rng);
  h_nlam_ = Nlam(ps_, prefix + ".hyper.nlam", h, cfg_.nlam, rng);
  hs_nlam_ = Nlam(ps_, prefix + ".hyper_syn.nlam", h, cfg_.nlam, rng);
  hs1_ = Deconv2d(ps_, prefix + ".hyper_syn.d1", h, h, 5, 2, 2, 1, rng);
  hs2_ = Deconv2d(ps_, prefix + ".hyper_syn.d2", h, m, 5, 2, 2, 1, rng);

  ctx_ = MaskedConv3dLayer(ps_, prefix + ".ctx.masked", cfg_.ctx_features, rng);
  std::vector<int> widths;
  widths.push_back(cfg_.ctx_features + 1);  // context features + hyper value
  for (int wdt : cfg_.fusion_hidden) widths.push_back(wdt);
  widths.push_back(2);
  fusion_ = VoxelMlp(ps_, prefix + ".ctx.fusion", widths, rng);

  z_mu_ = ps_.add(prefix + ".zprior.mu", Tensor({h}));
  Tensor raw({h}, 1.0);  // softplus(1) + sigma_min ~= 1.3: a sane starting spread
  z_sigma_raw_ = ps_.add(prefix + ".zprior.sigma_raw", raw);
}

void IntraCodec::check_frame_dims(int h, int w) const {
  if (h % 64 != 0 || w % 64 != 0)
    throw DimensionError("frame dims must be multiples of 64, got " + std::to_string(h) + "x" +
                         std::to_string(w));
}

Var IntraCodec::analysis(const Var& frame) const {
  const auto& s = frame.shape();
  check_frame_dims(s[2], s[3]);
  Var h = relu(a1_(frame));
  h = a_nlam2_(a2_(h));
  h = relu(h);
  h = relu(a3_(h));
  return a_nlam4_(a4_(h));
}

Var IntraCodec::synthesis(const Var& latents) const {
  Var h = s_nlam0_(latents);
  h = relu(s1_(h));
  h = s_nlam2_(s2_(h));
  h = relu(h);
  h = relu(s3_(h));
  return s4_(h);
}

Var IntraCodec::hyper_analysis(const Var& latents) const {
  // the NLAM sits at the H/32 intermediate so its attention spans several
  // positions even at small training crops
  Var h = h_nlam_(h1_(latents));
  return h2_(relu(h));
}

Var IntraCodec::hyper_synthesis(const Var& z) const {
  Var h = hs_nlam_(hs1_(z));
  return hs2_(relu(h));
}

GaussianParams IntraCodec::context_params(const Var& quantized_latents,
                                          const Var& hyper_features) const {
  if (!(quantized_latents.shape() == hyper_features.shape()))
    throw DimensionError("context_params: latent/hyper shape mismatch");
  Var feats = ctx_(quantized_latents);
  Var fused = fusion_(concat_dim1({feats, as_voxel_feature(hyper_features)}));
  Var mu = from_voxel_feature(slice_dim1(fused, 0, 1));
  Var sigma = add_scalar(softplus(from_voxel_feature(slice_dim1(fused, 1, 2))), cfg_.sigma_min);
  return {mu, sigma};
}

GaussianParams IntraCodec::z_prior_params(const std::vector<int>& zshape) const {
  Var mu = broadcast_channel(z_mu_, zshape);
  Var sigma = broadcast_channel(add_scalar(softplus(z_sigma_raw_), cfg_.sigma_min), zshape);
  return {mu, sigma};
}

ContextEval IntraCodec::context_eval() const {
  std::vector<std::pair<const Tensor*, const Tensor*>> fusion;
  for (const auto& [w, b] : fusion_.layers) fusion.emplace_back(&w.val(), &b.val());
  return ContextEval(&ctx_.w.val(), &ctx_.b.val(), std::move(fusion), cfg_.sigma_min,
                     /*uses_temporal=*/false);
}

StaticPrior IntraCodec::z_prior() const {
  StaticPrior p;
  p.mu = z_mu_.val();
  p.sigma = Tensor({cfg_.hyper_ch});
  for (int c = 0; c < cfg_.hyper_ch; ++c)
    p.sigma[c] = cfg_.sigma_min + softplus_stable(z_sigma_raw_.val()[c]);
  return p;
}

Tensor IntraCodec::synthesize_eval(const Tensor& latent_volume) const {
  NoGradGuard ng;
  const auto& s = latent_volume.shape();
  Var lat(latent_volume.reshaped({1, s[0], s[1], s[2]}));
  Tensor out = synthesis(lat).val();
  Tensor img = out.reshaped({3, out.dim(2), out.dim(3)});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
  if (cfg_.residual_role)
    for (int64_t i = 0; i < img.numel(); ++i) img[i] = 2.0 * img[i] - 1.0;
  return img;
}

FrameCodeResult IntraCodec::code_frame(const Tensor& frame) const {
  NoGradGuard ng;
  const int H = frame.dim(1), W = frame.dim(2);
  check_frame_dims(H, W);

  Tensor input = frame;
  if (cfg_.residual_role)
    for (int64_t i = 0; i < input.numel(); ++i) input[i] = (input[i] + 1.0) * 0.5;

  Var x(input.reshaped({1, 3, H, W}));
  Var y = analysis(x);
  Var z = hyper_analysis(y);
  const auto& yshape = y.shape();
  const auto& zs = z.shape();
  Tensor y_q = quantize_round(y.val()).reshaped({yshape[1], yshape[2], yshape[3]});
  Tensor z_q = quantize_round(z.val()).reshaped({zs[1], zs[2], zs[3]});

  FrameCodeResult res;
  const StaticPrior zp = z_prior();
  res.hyper = encode_static(z_q, zp);
  res.hyper_bits_estimate = estimate_bits_static(z_q, zp);

  Var hyper_feats = hyper_synthesis(Var(z_q.reshaped({1, zs[1], zs[2], zs[3]})));
  Tensor hyper_vol =
      hyper_feats.val().reshaped({yshape[1], yshape[2], yshape[3]});
  const ContextEval ctx = context_eval();
  res.latent = encode_context(y_q, hyper_vol, nullptr, ctx);
  res.latent_bits_estimate = estimate_bits_context(y_q, hyper_vol, nullptr, ctx);

  res.recon = synthesize_eval(y_q);
  return res;
}

Tensor IntraCodec::decode_frame(const CodedTensor& hyper, const CodedTensor& latent, int frame_h,
                                int frame_w) const {
  NoGradGuard ng;
  check_frame_dims(frame_h, frame_w);
  const int lh = frame_h / 16, lw = frame_w / 16;
  const int zh = frame_h / 64, zw = frame_w / 64;
  Tensor z_q = decode_static(hyper, cfg_.hyper_ch, zh, zw, z_prior());
  Var hyper_feats = hyper_synthesis(Var(z_q.reshaped({1, cfg_.hyper_ch, zh, zw})));
  Tensor hyper_vol = hyper_feats.val().reshaped({cfg_.m_ch, lh, lw});
  Tensor y_q = decode_context(latent, cfg_.m_ch, lh, lw, hyper_vol, nullptr, context_eval());
  return synthesize_eval(y_q);
}

}  // namespace lvc
