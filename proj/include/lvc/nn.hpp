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

#ifndef LVC_NN_HPP_
#define LVC_NN_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lvc/autograd.hpp"
#include "lvc/common.hpp"

namespace lvc {

// Named parameter registry. Each model owns one; checkpoints serialize it.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init) {
    Var v(std::move(init), /*requires_grad=*/true);
    items_.emplace_back(name, v);
    return v;
  }
  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  std::vector<Var> params() const {
    std::vector<Var> out;
    out.reserve(items_.size());
    for (const auto& [n, v] : items_) out.push_back(v);
    return out;
  }
  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& [name, v] : items_) n += v.numel();
    return n;
  }
  std::map<std::string, Tensor> dump() const {
    std::map<std::string, Tensor> out;
    for (const auto& [n, v] : items_) out[n] = v.val();
    return out;
  }
  // copies values in; throws ConfigMismatchError on missing names / shape drift
  void load(const std::map<std::string, Tensor>& named, const std::string& scope) {
    for (auto& [n, v] : items_) {
      auto it = named.find(n);
      if (it == named.end())
        throw ConfigMismatchError("checkpoint is missing parameter " + n + " (" + scope + ")");
      if (!(it->second.shape() == v.val().shape()))
        throw ConfigMismatchError("checkpoint shape mismatch for " + n);
      v.val() = it->second;
    }
  }

 private:
  std::vector<std::pair<std::string, Var>> items_;
};

Tensor init_conv_weight(std::vector<int> shape, int fan_in, Rng& rng);

struct Conv2d {
  Var w, b;
  int stride = 1, pad = 0;
  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride, int pad,
         Rng& rng);
  Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

struct Deconv2d {
  Var w, b;
  int stride = 1, pad = 0, out_pad = 0;
  Deconv2d() = default;
  Deconv2d(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride,
           int pad, int out_pad, Rng& rng);
  Var operator()(const Var& x) const { return conv2d_transpose(x, w, b, stride, pad, out_pad); }
};

struct ResBlock {
  Conv2d c1, c2;
  ResBlock() = default;
  ResBlock(ParamStore& ps, const std::string& name, int ch, Rng& rng);
  Var operator()(const Var& x) const { return add(x, c2(relu(c1(x)))); }
};

// Embedded-Gaussian non-local block with a residual connection.
struct NonLocalBlock {
  Conv2d theta, phi, g, out;
  int inner = 0;
  NonLocalBlock() = default;
  NonLocalBlock(ParamStore& ps, const std::string& name, int ch, Rng& rng);
  Var operator()(const Var& x) const;
};

// Non-local attention module: trunk of residual blocks gated by a sigmoid
// attention mask computed from a non-local branch; identity skip around it.
struct Nlam {
  bool enabled = true;
  ResBlock t1, t2, t3;
  NonLocalBlock nl;
  ResBlock m1, m2;
  Conv2d mask_out;
  Nlam() = default;
  Nlam(ParamStore& ps, const std::string& name, int ch, bool enabled, Rng& rng);
  Var operator()(const Var& x) const;
};

struct MaskedConv3dLayer {
  Var w, b;
  MaskedConv3dLayer() = default;
  MaskedConv3dLayer(ParamStore& ps, const std::string& name, int features, Rng& rng);
  Var operator()(const Var& x) const { return masked_conv3d(x, w, b); }
};

// cascade of 1x1x1 convolutions over voxel features, ReLU between stages
struct VoxelMlp {
  std::vector<std::pair<Var, Var>> layers;  // (w,b)
  VoxelMlp() = default;
  VoxelMlp(ParamStore& ps, const std::string& name, const std::vector<int>& widths, Rng& rng);
  Var operator()(const Var& x) const;
};

// Standard ConvLSTM cell, 3x3 kernels. Gate order in the conv output: i,f,o,g.
struct ConvLstmCell {
  Conv2d gates;
  int hidden = 0;
  ConvLstmCell() = default;
  ConvLstmCell(ParamStore& ps, const std::string& name, int cin, int hidden, Rng& rng);
  // returns (h_t, c_t)
  std::pair<Var, Var> step(const Var& x, const Var& h_prev, const Var& c_prev) const;
};

class Adam {
 public:
  explicit Adam(std::vector<Var> params, double lr = 1e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void zero_grad();
  // returns the global grad norm before clipping (clip <= 0 disables)
  double step(double clip_norm = 0.0);

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace lvc

#endif  // LVC_NN_HPP_
