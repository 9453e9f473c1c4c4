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

#ifndef LVC_AUTOGRAD_HPP_
#define LVC_AUTOGRAD_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "lvc/tensor.hpp"

namespace lvc {

// Eager reverse-mode autodiff. Every op computes its value immediately and,
// when grad recording is enabled, registers a closure that scatters the
// output gradient into its parents. Backward-through-time for the recurrent
// paths falls out of the tape for free.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily in backward()
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents
  int visit_mark = 0;                      // scratch for topological sort

  Tensor& ensure_grad() {
    if (grad.empty()) grad = Tensor(value.shape());
    return grad;
  }
};

bool grad_enabled();
void set_grad_enabled(bool on);

// RAII scope that disables tape recording (inference / coding paths).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Value-semantic handle to a tape node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor& val() const { return node_->value; }
  Tensor& val() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  int64_t numel() const { return node_->value.numel(); }
  NodePtr node() const { return node_; }

  void zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
  }

  static Var from_node(NodePtr n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  NodePtr node_;
};

// Runs reverse-mode accumulation from a scalar (1-element) root.
void backward(const Var& root);

// ---- elementwise / reduction ops ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var add_const(const Var& a, const Tensor& t);  // constant offset (e.g. quantization noise)
Var neg(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);
Var softplus(const Var& a);
Var exp_op(const Var& a);
Var log_op(const Var& a);
Var abs_op(const Var& a);
Var square(const Var& a);
Var sqrt_op(const Var& a);
Var pow_scalar(const Var& a, double p);  // a must be > 0 elementwise
Var clamp_min(const Var& a, double lo);  // grad passes where a > lo
Var sum(const Var& a);
Var mean(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return mul_scalar(a, s); }
inline Var operator*(double s, const Var& a) { return mul_scalar(a, s); }
inline Var operator+(const Var& a, double s) { return add_scalar(a, s); }
inline Var operator-(const Var& a, double s) { return add_scalar(a, -s); }

// ---- shape ops ----
Var reshape(const Var& a, std::vector<int> shape);
Var concat_dim0(const std::vector<Var>& parts);          // concat along dim 0
Var slice_dim0(const Var& a, int begin, int end);        // [begin, end) along dim 0
Var concat_dim1(const std::vector<Var>& parts);          // concat along dim 1 (rank >= 2)
Var slice_dim1(const Var& a, int begin, int end);        // [begin, end) along dim 1
Var slice_hw(const Var& a, int y0, int y1, int x0, int x1);  // spatial crop of [N,C,H,W]
Var broadcast_channel(const Var& p, const std::vector<int>& shape);  // p:[C] -> [N,C,H,W]

// ---- neural net ops (NCHW) ----
// x: [N,Ci,H,W], w: [Co,Ci,kh,kw], b: [Co] (may be undefined Var for no bias)
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// transposed conv; w: [Ci,Co,kh,kw]; out = (in-1)*stride - 2*pad + k + out_pad
Var conv2d_transpose(const Var& x, const Var& w, const Var& b, int stride, int pad, int out_pad);
// depthwise valid-mode correlation with a fixed (non-learned) separable kernel
Var separable_filter2d_valid(const Var& x, const std::vector<double>& k);
// 2x2 average pooling, ceil mode, averaging over the pixels actually covered
Var avg_pool2x2(const Var& x);
// volume-causal masked 3d conv: x [N,C,H,W] seen as a (C,H,W) volume with one
// feature; w [F,5,5,5]; out [N,F,C,H,W]. Tap (dc,dy,dx) contributes iff
// (dy,dx,dc) < (0,0,0) lexicographically, matching the (y,x,c) scan order.
Var masked_conv3d(const Var& x, const Var& w, const Var& b);
// per-voxel linear layer on [N,F,C,H,W]: w [G,F], b [G] -> [N,G,C,H,W]
Var voxel_linear(const Var& x, const Var& w, const Var& b);
// insert a feature axis: [N,C,H,W] -> [N,1,C,H,W]
Var as_voxel_feature(const Var& x);
// collapse a single feature axis back: [N,1,C,H,W] -> [N,C,H,W]
Var from_voxel_feature(const Var& x);

// softmax over the last dim of a [R,Cols] tensor
Var softmax_rows(const Var& a);
// matmul of [M,K] x [K,N]
Var matmul(const Var& a, const Var& b);
Var transpose2d(const Var& a);

// backward warping: ref [N,C,H,W], flow [N,2,H,W] (dim1: u horizontal, v
// vertical); output(x,y) samples ref at (x+u, y+v), bilinear, coordinates
// clamped to the image; differentiable in both inputs (zero flow-grad where a
// coordinate clamps).
Var warp_bilinear(const Var& ref, const Var& flow);

// discretized-Gaussian codelength in bits per element:
//   p = Phi((v+.5-mu)/sigma) - Phi((v-.5-mu)/sigma), floored at 1e-9
// differentiable in v, mu and sigma.
Var gaussian_bits(const Var& v, const Var& mu, const Var& sigma);

// standard normal CDF (plain helper, double precision)
double norm_cdf(double x);

}  // namespace lvc

#endif  // LVC_AUTOGRAD_HPP_
