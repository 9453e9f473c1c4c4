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

#include "lvc/nn.hpp"

#include <cmath>

namespace lvc {

Tensor init_conv_weight(std::vector<int> shape, int fan_in, Rng& rng) {
  // He-uniform: keeps the activation scale through ReLU conv stacks
  Tensor w(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride,
               int pad, Rng& rng)
    : stride(stride), pad(pad) {
  w = ps.add(name + ".w", init_conv_weight({cout, cin, k, k}, cin * k * k, rng));
  b = ps.add(name + ".b", Tensor({cout}));
}

Deconv2d::Deconv2d(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride,
                   int pad, int out_pad, Rng& rng)
    : stride(stride), pad(pad), out_pad(out_pad) {
  w = ps.add(name + ".w", init_conv_weight({cin, cout, k, k}, cin * k * k, rng));
  b = ps.add(name + ".b", Tensor({cout}));
}

ResBlock::ResBlock(ParamStore& ps, const std::string& name, int ch, Rng& rng)
    : c1(ps, name + ".c1", ch, ch, 3, 1, 1, rng), c2(ps, name + ".c2", ch, ch, 3, 1, 1, rng) {}

NonLocalBlock::NonLocalBlock(ParamStore& ps, const std::string& name, int ch, Rng& rng)
    : theta(ps, name + ".theta", ch, std::max(1, ch / 2), 1, 1, 0, rng),
      phi(ps, name + ".phi", ch, std::max(1, ch / 2), 1, 1, 0, rng),
      g(ps, name + ".g", ch, std::max(1, ch / 2), 1, 1, 0, rng),
      out(ps, name + ".out", std::max(1, ch / 2), ch, 1, 1, 0, rng),
      inner(std::max(1, ch / 2)) {}

Var NonLocalBlock::operator()(const Var& x) const {
  const auto& s = x.shape();
  const int N = s[0], H = s[2], W = s[3];
  const int hw = H * W;
  Var th = theta(x), ph = phi(x), gv = g(x);
  std::vector<Var> items;
  items.reserve(N);
  for (int n = 0; n < N; ++n) {
    Var tn = reshape(slice_dim0(th, n, n + 1), {inner, hw});
    Var pn = reshape(slice_dim0(ph, n, n + 1), {inner, hw});
    Var gn = reshape(slice_dim0(gv, n, n + 1), {inner, hw});
    Var att = softmax_rows(matmul(transpose2d(tn), pn));  // [hw, hw]
    Var y = matmul(gn, transpose2d(att));                 // [inner, hw]
    items.push_back(reshape(y, {1, inner, H, W}));
  }
  Var y = N == 1 ? items[0] : concat_dim0(items);
  return add(x, out(y));
}

Nlam::Nlam(ParamStore& ps, const std::string& name, int ch, bool enabled, Rng& rng)
    : enabled(enabled) {
  if (!enabled) return;
  t1 = ResBlock(ps, name + ".t1", ch, rng);
  t2 = ResBlock(ps, name + ".t2", ch, rng);
  t3 = ResBlock(ps, name + ".t3", ch, rng);
  nl = NonLocalBlock(ps, name + ".nl", ch, rng);
  m1 = ResBlock(ps, name + ".m1", ch, rng);
  m2 = ResBlock(ps, name + ".m2", ch, rng);
  mask_out = Conv2d(ps, name + ".mask_out", ch, ch, 1, 1, 0, rng);
}

Var Nlam::operator()(const Var& x) const {
  if (!enabled) return x;
  Var trunk = t3(t2(t1(x)));
  Var mask = sigmoid(mask_out(m2(m1(nl(x)))));
  return add(x, mul(trunk, mask));
}

MaskedConv3dLayer::MaskedConv3dLayer(ParamStore& ps, const std::string& name, int features,
                                     Rng& rng) {
  // 62 causal taps feed each output voxel
  w = ps.add(name + ".w", init_conv_weight({features, 5, 5, 5}, 62, rng));
  b = ps.add(name + ".b", Tensor({features}));
}

VoxelMlp::VoxelMlp(ParamStore& ps, const std::string& name, const std::vector<int>& widths,
                   Rng& rng) {
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    Var w = ps.add(name + ".l" + std::to_string(i) + ".w",
                   init_conv_weight({widths[i + 1], widths[i]}, widths[i], rng));
    Var b = ps.add(name + ".l" + std::to_string(i) + ".b", Tensor({widths[i + 1]}));
    layers.emplace_back(w, b);
  }
}

Var VoxelMlp::operator()(const Var& x) const {
  Var h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = voxel_linear(h, layers[i].first, layers[i].second);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

ConvLstmCell::ConvLstmCell(ParamStore& ps, const std::string& name, int cin, int hidden,
                           Rng& rng)
    : gates(ps, name + ".gates", cin + hidden, 4 * hidden, 3, 1, 1, rng), hidden(hidden) {
  // forget-gate bias starts at 1 so early training keeps state
  for (int i = hidden; i < 2 * hidden; ++i) gates.b.val()[i] = 1.0;
}

std::pair<Var, Var> ConvLstmCell::step(const Var& x, const Var& h_prev, const Var& c_prev) const {
  Var z = gates(concat_dim1({x, h_prev}));
  Var i = sigmoid(slice_dim1(z, 0, hidden));
  Var f = sigmoid(slice_dim1(z, hidden, 2 * hidden));
  Var o = sigmoid(slice_dim1(z, 2 * hidden, 3 * hidden));
  Var g = tanh_op(slice_dim1(z, 3 * hidden, 4 * hidden));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh_op(c));
  return {h, c};
}

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.val().shape());
    v_.emplace_back(p.val().shape());
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Adam::step(double clip_norm) {
  double norm_sq = 0.0;
  for (auto& p : params_) {
    const Tensor& g = p.grad();
    for (int64_t i = 0; i < g.numel(); ++i) norm_sq += g[i] * g[i];
  }
  const double norm = std::sqrt(norm_sq);
  double scale = 1.0;
  if (clip_norm > 0.0 && norm > clip_norm) scale = clip_norm / norm;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor& w = params_[k].val();
    const Tensor& g = params_[k].grad();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (int64_t i = 0; i < w.numel(); ++i) {
      const double gi = g[i] * scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
  return norm;
}

}  // namespace lvc
