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

#include "lvc/context_eval.hpp"

#include <cmath>

#include "lvc/common.hpp"

namespace lvc {

namespace {

inline bool mask3d_allowed(int dc, int dy, int dx) {
  if (dy != 0) return dy < 0;
  if (dx != 0) return dx < 0;
  return dc < 0;
}

inline double softplus_stable(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

void ContextEval::params_at(const Tensor& vol, const Tensor& hyper, const Tensor* h_prev, int c,
                            int y, int x, double* mu, double* sigma) const {
  const int C = vol.dim(0), H = vol.dim(1), W = vol.dim(2);
  const int F = mask_w_->dim(0);

  // masked 5x5x5 taps, fixed accumulation order (dc, dy, dx)
  double feats[64];
  for (int f = 0; f < F; ++f) feats[f] = (*mask_b_)[f];
  for (int dc = -2; dc <= 2; ++dc) {
    const int cc = c + dc;
    if (cc < 0 || cc >= C) continue;
    for (int dy = -2; dy <= 2; ++dy) {
      const int yy = y + dy;
      if (yy < 0 || yy >= H) continue;
      for (int dx = -2; dx <= 2; ++dx) {
        const int xx = x + dx;
        if (xx < 0 || xx >= W) continue;
        if (!mask3d_allowed(dc, dy, dx)) continue;
        const double v = vol.at(cc, yy, xx);
        for (int f = 0; f < F; ++f) feats[f] += mask_w_->at(f, dc + 2, dy + 2, dx + 2) * v;
      }
    }
  }

  // fusion inputs: context features, co-located hyper value, temporal value
  double buf_a[80], buf_b[80];
  int n_in = F;
  for (int f = 0; f < F; ++f) buf_a[f] = feats[f];
  buf_a[n_in++] = hyper.at(c, y, x);
  if (uses_temporal_) {
    if (h_prev == nullptr) throw BadInputError("context: missing temporal prior");
    buf_a[n_in++] = h_prev->at(c, y, x);
  }

  // cascaded 1x1x1 convolutions, ReLU between stages
  double* in = buf_a;
  double* out = buf_b;
  for (size_t l = 0; l < fusion_.size(); ++l) {
    const Tensor& w = *fusion_[l].first;
    const Tensor& b = *fusion_[l].second;
    const int G = w.dim(0);
    for (int g = 0; g < G; ++g) {
      double s = b[g];
      for (int f = 0; f < n_in; ++f) s += w.at(g, f) * in[f];
      out[g] = (l + 1 < fusion_.size() && s < 0.0) ? 0.0 : s;
    }
    n_in = G;
    std::swap(in, out);
  }

  *mu = in[0];
  *sigma = sigma_min_ + softplus_stable(in[1]);
}

}  // namespace lvc
