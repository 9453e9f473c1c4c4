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

#include "lvc/flow_codec.hpp"

namespace lvc {

FlowCodec::FlowCodec(FlowCodecConfig cfg, const std::string& prefix, uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  const int w = cfg_.width, f = cfg_.feature_ch;
  e1_ = Conv2d(ps_, prefix + ".enc.c1", 6, w, 5, 2, 2, rng);
  e2_ = Conv2d(ps_, prefix + ".enc.c2", w, w, 5, 2, 2, rng);
  e_nlam2_ = Nlam(ps_, prefix + ".enc.nlam2", w, cfg_.nlam, rng);
  e3_ = Conv2d(ps_, prefix + ".enc.c3", w, w, 5, 2, 2, rng);
  e4_ = Conv2d(ps_, prefix + ".enc.c4", w, f, 5, 2, 2, rng);
  e_nlam4_ = Nlam(ps_, prefix + ".enc.nlam4", f, cfg_.nlam, rng);

  d_nlam0_ = Nlam(ps_, prefix + ".dec.nlam0", f, cfg_.nlam, rng);
  d1_ = Deconv2d(ps_, prefix + ".dec.d1", f, w, 5, 2, 2, 1, rng);
  d2_ = Deconv2d(ps_, prefix + ".dec.d2", w, w, 5, 2, 2, 1, rng);
  d_nlam2_ = Nlam(ps_, prefix + ".dec.nlam2", w, cfg_.nlam, rng);
  d3_ = Deconv2d(ps_, prefix + ".dec.d3", w, w, 5, 2, 2, 1, rng);
  d4_ = Deconv2d(ps_, prefix + ".dec.d4", w, 2, 5, 2, 2, 1, rng);
  // damped flow head: training starts near the identity warp
  for (int64_t i = 0; i < d4_.w.val().numel(); ++i) d4_.w.val()[i] *= 0.3;
}

Var FlowCodec::encode(const Var& ref, const Var& target) const {
  if (!(ref.shape() == target.shape()))
    throw DimensionError("flow encode: ref/target dims differ");
  Var h = relu(e1_(concat_dim1({ref, target})));
  h = e_nlam2_(e2_(h));
  h = relu(h);
  h = relu(e3_(h));
  return e_nlam4_(e4_(h));
}

Var FlowCodec::decode(const Var& features) const {
  Var h = d_nlam0_(features);
  h = relu(d1_(h));
  h = d_nlam2_(d2_(h));
  h = relu(h);
  h = relu(d3_(h));
  return d4_(h);
}

Tensor FlowCodec::encode_eval(const Tensor& ref, const Tensor& target) const {
  NoGradGuard ng;
  const int H = ref.dim(1), W = ref.dim(2);
  Var out = encode(Var(ref.reshaped({1, 3, H, W})), Var(target.reshaped({1, 3, H, W})));
  const auto& s = out.shape();
  return out.val().reshaped({s[1], s[2], s[3]});
}

Tensor FlowCodec::decode_eval(const Tensor& feature_volume) const {
  NoGradGuard ng;
  const auto& s = feature_volume.shape();
  Var out = decode(Var(feature_volume.reshaped({1, s[0], s[1], s[2]})));
  return out.val().reshaped({2, out.shape()[2], out.shape()[3]});
}

Tensor warp_eval(const Tensor& ref, const Tensor& flow) {
  NoGradGuard ng;
  const int H = ref.dim(1), W = ref.dim(2);
  Var out = warp_bilinear(Var(ref.reshaped({1, 3, H, W})), Var(flow.reshaped({1, 2, H, W})));
  return out.val().reshaped({3, H, W});
}

}  // namespace lvc
