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

#include "lvc/latent_coding.hpp"

#include <cmath>

#include "lvc/range_coder.hpp"

namespace lvc {

std::pair<int, int> tensor_bounds(const Tensor& volume) {
  double lo = 0.0, hi = 0.0;
  for (int64_t i = 0; i < volume.numel(); ++i) {
    lo = std::min(lo, volume[i]);
    hi = std::max(hi, volume[i]);
  }
  if (lo < -32768.0 || hi > 32767.0)
    throw BadInputError("quantized values exceed the i16 alphabet bounds");
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

CodedTensor encode_static(const Tensor& volume, const StaticPrior& prior) {
  const int C = volume.dim(0), H = volume.dim(1), W = volume.dim(2);
  const auto [v_min, v_max] = tensor_bounds(volume);
  std::vector<CdfTable> cdfs(C);
  for (int c = 0; c < C; ++c) cdfs[c] = build_cdf(prior.mu[c], prior.sigma[c], v_min, v_max);
  RangeEncoder enc;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        enc.encode_symbol(cdfs[c], static_cast<int>(volume.at(c, y, x)));
  CodedTensor out;
  out.v_min = static_cast<int16_t>(v_min);
  out.v_max = static_cast<int16_t>(v_max);
  out.payload = enc.finish();
  return out;
}

Tensor decode_static(const CodedTensor& coded, int C, int H, int W, const StaticPrior& prior) {
  std::vector<CdfTable> cdfs(C);
  for (int c = 0; c < C; ++c)
    cdfs[c] = build_cdf(prior.mu[c], prior.sigma[c], coded.v_min, coded.v_max);
  RangeDecoder dec(coded.payload);
  Tensor vol({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) vol.at(c, y, x) = dec.decode_symbol(cdfs[c]);
  return vol;
}

double estimate_bits_static(const Tensor& volume, const StaticPrior& prior) {
  const int C = volume.dim(0), H = volume.dim(1), W = volume.dim(2);
  const double ln2 = 0.6931471805599453094;
  double bits = 0.0;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double p = gaussian_likelihood(volume.at(c, y, x), prior.mu[c], prior.sigma[c]);
        bits -= std::log(std::max(p, 1e-9)) / ln2;
      }
  return bits;
}

// Scan order: raster over (y, x), channel fastest — the exact order the
// 3d mask is causal for. Encoder and decoder share it.
CodedTensor encode_context(const Tensor& volume, const Tensor& hyper, const Tensor* h_prev,
                           const ContextEval& ctx) {
  const int C = volume.dim(0), H = volume.dim(1), W = volume.dim(2);
  const auto [v_min, v_max] = tensor_bounds(volume);
  RangeEncoder enc;
  double mu, sigma;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        ctx.params_at(volume, hyper, h_prev, c, y, x, &mu, &sigma);
        const CdfTable cdf = build_cdf(mu, sigma, v_min, v_max);
        enc.encode_symbol(cdf, static_cast<int>(volume.at(c, y, x)));
      }
  CodedTensor out;
  out.v_min = static_cast<int16_t>(v_min);
  out.v_max = static_cast<int16_t>(v_max);
  out.payload = enc.finish();
  return out;
}

Tensor decode_context(const CodedTensor& coded, int C, int H, int W, const Tensor& hyper,
                      const Tensor* h_prev, const ContextEval& ctx) {
  RangeDecoder dec(coded.payload);
  Tensor vol({C, H, W});
  double mu, sigma;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        ctx.params_at(vol, hyper, h_prev, c, y, x, &mu, &sigma);
        const CdfTable cdf = build_cdf(mu, sigma, coded.v_min, coded.v_max);
        vol.at(c, y, x) = dec.decode_symbol(cdf);
      }
  return vol;
}

double estimate_bits_context(const Tensor& volume, const Tensor& hyper, const Tensor* h_prev,
                             const ContextEval& ctx) {
  const int C = volume.dim(0), H = volume.dim(1), W = volume.dim(2);
  const double ln2 = 0.6931471805599453094;
  double bits = 0.0;
  double mu, sigma;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        ctx.params_at(volume, hyper, h_prev, c, y, x, &mu, &sigma);
        const double p = gaussian_likelihood(volume.at(c, y, x), mu, sigma);
        bits -= std::log(std::max(p, 1e-9)) / ln2;
      }
  return bits;
}

}  // namespace lvc
