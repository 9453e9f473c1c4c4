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

#include "lvc/autograd.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <unordered_set>
#include <utility>

namespace lvc {

namespace {

thread_local bool g_grad_enabled = true;

using RM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RM>;
using CMapRM = Eigen::Map<const RM>;

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node());
      n->backward_fn = std::move(bwd);
    }
  }
  return Var::from_node(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.val().same_shape(b.val()))
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         Tensor::shape_str(a.shape()) + " vs " + Tensor::shape_str(b.shape()));
}

// gather patches of src (C,H,W plane of one batch item) into cols[C*k*k, GH*GW]
void im2col(const double* src, int C, int H, int W, int k, int stride, int pad, int GH, int GW,
            double* cols) {
  const int64_t G = static_cast<int64_t>(GH) * GW;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols + ((static_cast<int64_t>(c) * k + ky) * k + kx) * G;
        for (int gy = 0; gy < GH; ++gy) {
          const int sy = gy * stride - pad + ky;
          if (sy < 0 || sy >= H) {
            std::memset(dst + static_cast<int64_t>(gy) * GW, 0, sizeof(double) * GW);
            continue;
          }
          const double* row = src + (static_cast<int64_t>(c) * H + sy) * W;
          double* out = dst + static_cast<int64_t>(gy) * GW;
          for (int gx = 0; gx < GW; ++gx) {
            const int sx = gx * stride - pad + kx;
            out[gx] = (sx >= 0 && sx < W) ? row[sx] : 0.0;
          }
        }
      }
    }
  }
}

// scatter-add of cols back into dst (C,H,W)
void col2im(const double* cols, int C, int H, int W, int k, int stride, int pad, int GH, int GW,
            double* dst) {
  const int64_t G = static_cast<int64_t>(GH) * GW;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* col = cols + ((static_cast<int64_t>(c) * k + ky) * k + kx) * G;
        for (int gy = 0; gy < GH; ++gy) {
          const int sy = gy * stride - pad + ky;
          if (sy < 0 || sy >= H) continue;
          double* row = dst + (static_cast<int64_t>(c) * H + sy) * W;
          const double* in = col + static_cast<int64_t>(gy) * GW;
          for (int gx = 0; gx < GW; ++gx) {
            const int sx = gx * stride - pad + kx;
            if (sx >= 0 && sx < W) row[sx] += in[gx];
          }
        }
      }
    }
  }
}

Var unary_op(const Var& a, Tensor value, std::function<double(double, double)> dfn) {
  // dfn(x, y) -> local derivative given input x and output y
  Tensor x = a.val();  // capture by value: cheap relative to conv workloads
  Tensor y = value;
  return make_op(std::move(value), {a},
                 [x = std::move(x), y = std::move(y), dfn = std::move(dfn)](Node& n) {
                   Tensor& ga = n.parents[0]->ensure_grad();
                   const int64_t m = ga.numel();
                   for (int64_t i = 0; i < m; ++i)
                     ga[i] += n.grad[i] * dfn(x[i], y[i]);
                 });
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

void backward(const Var& root) {
  if (!root.defined() || root.numel() != 1)
    throw BadInputError("backward: root must be a defined scalar");
  if (!root.requires_grad()) return;

  // iterative post-order over the tape
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---------------- elementwise ----------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      if (!n.parents[k]->requires_grad) continue;
      Tensor& g = n.parents[k]->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  Tensor av = a.val(), bv2 = b.val();
  return make_op(std::move(out), {a, b}, [av = std::move(av), bv2 = std::move(bv2)](Node& n) {
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * bv2[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] /= bv[i];
  Tensor av = a.val(), bv2 = b.val();
  return make_op(std::move(out), {a, b}, [av = std::move(av), bv2 = std::move(bv2)](Node& n) {
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] / bv2[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i)
        g[i] -= n.grad[i] * av[i] / (bv2[i] * bv2[i]);
    }
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var mul_scalar(const Var& a, double s) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return make_op(std::move(out), {a}, [s](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * s;
  });
}

Var add_const(const Var& a, const Tensor& t) {
  if (!a.val().same_shape(t)) throw DimensionError("add_const: shape mismatch");
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += t[i];
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var relu(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return unary_op(a, std::move(out), [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : slope * out[i];
  return unary_op(a, std::move(out),
                  [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return unary_op(a, std::move(out), [](double, double y) { return y * (1.0 - y); });
}

Var tanh_op(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return unary_op(a, std::move(out), [](double, double y) { return 1.0 - y * y; });
}

Var softplus(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double x = out[i];
    out[i] = x > 30.0 ? x : std::log1p(std::exp(x));
  }
  return unary_op(a, std::move(out),
                  [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var exp_op(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
  return unary_op(a, std::move(out), [](double, double y) { return y; });
}

Var log_op(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
  return unary_op(a, std::move(out), [](double x, double) { return 1.0 / x; });
}

Var abs_op(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::fabs(out[i]);
  return unary_op(a, std::move(out),
                  [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= out[i];
  return unary_op(a, std::move(out), [](double x, double) { return 2.0 * x; });
}

Var sqrt_op(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(out[i]);
  return unary_op(a, std::move(out), [](double, double y) { return 0.5 / y; });
}

Var pow_scalar(const Var& a, double p) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::pow(out[i], p);
  return unary_op(a, std::move(out),
                  [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var clamp_min(const Var& a, double lo) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > lo ? out[i] : lo;
  return unary_op(a, std::move(out), [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double s = 0.0;
  const Tensor& av = a.val();
  for (int64_t i = 0; i < av.numel(); ++i) s += av[i];
  return make_op(Tensor::scalar(s), {a}, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const double gs = n.grad[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += gs;
  });
}

Var mean(const Var& a) {
  const int64_t m = a.numel();
  double s = 0.0;
  const Tensor& av = a.val();
  for (int64_t i = 0; i < m; ++i) s += av[i];
  return make_op(Tensor::scalar(s / static_cast<double>(m)), {a}, [m](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const double gs = n.grad[0] / static_cast<double>(m);
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += gs;
  });
}

// ---------------- shape ----------------

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = a.val().reshaped(std::move(shape));
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var concat_dim0(const std::vector<Var>& parts) {
  if (parts.empty()) throw BadInputError("concat_dim0: no inputs");
  const auto& s0 = parts[0].shape();
  int64_t inner = 1;
  for (size_t i = 1; i < s0.size(); ++i) inner *= s0[i];
  int d0_total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != s0.size()) throw DimensionError("concat_dim0: rank mismatch");
    for (size_t i = 1; i < s.size(); ++i)
      if (s[i] != s0[i]) throw DimensionError("concat_dim0: incompatible shapes");
    d0_total += s[0];
  }
  std::vector<int> oshape = s0;
  oshape[0] = d0_total;
  Tensor out(oshape);
  int64_t off = 0;
  std::vector<int64_t> blocks;
  for (const auto& p : parts) {
    const int64_t block = p.val().numel();
    std::memcpy(out.data() + off, p.val().data(), sizeof(double) * block);
    blocks.push_back(block);
    off += block;
  }
  return make_op(std::move(out), parts, [blocks](Node& n) {
    int64_t off = 0;
    for (size_t k = 0; k < n.parents.size(); ++k) {
      if (n.parents[k]->requires_grad) {
        Tensor& g = n.parents[k]->ensure_grad();
        const double* src = n.grad.data() + off;
        for (int64_t i = 0; i < blocks[k]; ++i) g[i] += src[i];
      }
      off += blocks[k];
    }
  });
}

Var slice_dim0(const Var& a, int begin, int end) {
  const auto& s = a.shape();
  if (s.empty() || begin < 0 || end > s[0] || begin >= end)
    throw DimensionError("slice_dim0: bad range");
  int64_t inner = 1;
  for (size_t i = 1; i < s.size(); ++i) inner *= s[i];
  std::vector<int> oshape = s;
  oshape[0] = end - begin;
  Tensor out(oshape);
  std::memcpy(out.data(), a.val().data() + begin * inner,
              sizeof(double) * static_cast<size_t>((end - begin) * inner));
  return make_op(std::move(out), {a}, [begin, inner](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    double* dst = g.data() + begin * inner;
    for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += n.grad[i];
  });
}

Var concat_dim1(const std::vector<Var>& parts) {
  if (parts.empty()) throw BadInputError("concat_dim1: no inputs");
  const auto& s0 = parts[0].shape();
  if (s0.size() < 2) throw DimensionError("concat_dim1: rank must be >= 2");
  int64_t inner = 1;
  for (size_t i = 2; i < s0.size(); ++i) inner *= s0[i];
  const int n0 = s0[0];
  int mid_total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != s0.size() || s[0] != n0)
      throw DimensionError("concat_dim1: incompatible shapes");
    for (size_t i = 2; i < s.size(); ++i)
      if (s[i] != s0[i]) throw DimensionError("concat_dim1: incompatible shapes");
    mid_total += s[1];
  }
  std::vector<int> oshape = s0;
  oshape[1] = mid_total;
  Tensor out(oshape);
  std::vector<int> mids;
  for (const auto& p : parts) mids.push_back(p.shape()[1]);
  int64_t off = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].val();
    const int64_t block = mids[k] * inner;
    for (int n = 0; n < n0; ++n)
      std::memcpy(out.data() + (static_cast<int64_t>(n) * mid_total) * inner + off,
                  v.data() + static_cast<int64_t>(n) * block, sizeof(double) * block);
    off += block;
  }
  return make_op(std::move(out), parts, [mids, inner, n0, mid_total](Node& n) {
    int64_t off = 0;
    for (size_t k = 0; k < n.parents.size(); ++k) {
      const int64_t block = mids[k] * inner;
      if (n.parents[k]->requires_grad) {
        Tensor& g = n.parents[k]->ensure_grad();
        for (int b = 0; b < n0; ++b) {
          const double* src = n.grad.data() + (static_cast<int64_t>(b) * mid_total) * inner + off;
          double* dst = g.data() + static_cast<int64_t>(b) * block;
          for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      off += block;
    }
  });
}

Var slice_dim1(const Var& a, int begin, int end) {
  const auto& s = a.shape();
  if (s.size() < 2 || begin < 0 || end > s[1] || begin >= end)
    throw DimensionError("slice_dim1: bad range");
  int64_t inner = 1;
  for (size_t i = 2; i < s.size(); ++i) inner *= s[i];
  std::vector<int> oshape = s;
  oshape[1] = end - begin;
  Tensor out(oshape);
  const int64_t block = static_cast<int64_t>(end - begin) * inner;
  const int64_t src_mid = static_cast<int64_t>(s[1]) * inner;
  for (int n = 0; n < s[0]; ++n)
    std::memcpy(out.data() + static_cast<int64_t>(n) * block,
                a.val().data() + n * src_mid + begin * inner, sizeof(double) * block);
  const int n0 = s[0];
  return make_op(std::move(out), {a}, [begin, inner, block, src_mid, n0](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int b = 0; b < n0; ++b) {
      double* dst = g.data() + b * src_mid + begin * inner;
      const double* src = n.grad.data() + static_cast<int64_t>(b) * block;
      for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
}

Var slice_hw(const Var& a, int y0, int y1, int x0, int x1) {
  const auto& s = a.shape();
  if (s.size() != 4 || y0 < 0 || y1 > s[2] || x0 < 0 || x1 > s[3] || y0 >= y1 || x0 >= x1)
    throw DimensionError("slice_hw: bad range");
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  const int OH = y1 - y0, OW = x1 - x0;
  Tensor out({N, C, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < OH; ++y) {
        const double* src =
            a.val().data() + ((static_cast<int64_t>(n) * C + c) * H + y + y0) * W + x0;
        double* dst = out.data() + ((static_cast<int64_t>(n) * C + c) * OH + y) * OW;
        std::memcpy(dst, src, sizeof(double) * OW);
      }
  return make_op(std::move(out), {a}, [N, C, H, W, OH, OW, y0, x0](Node& nd) {
    Tensor& g = nd.parents[0]->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < OH; ++y) {
          double* dst = g.data() + ((static_cast<int64_t>(n) * C + c) * H + y + y0) * W + x0;
          const double* src =
              nd.grad.data() + ((static_cast<int64_t>(n) * C + c) * OH + y) * OW;
          for (int x = 0; x < OW; ++x) dst[x] += src[x];
        }
  });
}

Var broadcast_channel(const Var& p, const std::vector<int>& shape) {
  if (p.shape().size() != 1 || shape.size() != 4 || p.shape()[0] != shape[1])
    throw DimensionError("broadcast_channel: expects p:[C] -> [N,C,H,W]");
  Tensor out(shape);
  const int N = shape[0], C = shape[1];
  const int64_t hw = static_cast<int64_t>(shape[2]) * shape[3];
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double* dst = out.data() + (static_cast<int64_t>(n) * C + c) * hw;
      const double v = p.val()[c];
      for (int64_t i = 0; i < hw; ++i) dst[i] = v;
    }
  return make_op(std::move(out), {p}, [N, C, hw](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < C; ++c) {
        const double* src = n.grad.data() + (static_cast<int64_t>(b) * C + c) * hw;
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += src[i];
        g[c] += s;
      }
  });
}

// ---------------- conv ----------------

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4) throw DimensionError("conv2d: rank");
  const int N = xs[0], Ci = xs[1], H = xs[2], W = xs[3];
  const int Co = ws[0], k = ws[2];
  if (ws[1] != Ci || ws[3] != k) throw DimensionError("conv2d: weight shape");
  const int OH = (H + 2 * pad - k) / stride + 1;
  const int OW = (W + 2 * pad - k) / stride + 1;
  if (OH <= 0 || OW <= 0) throw DimensionError("conv2d: output collapsed");
  const int64_t CKK = static_cast<int64_t>(Ci) * k * k;
  const int64_t G = static_cast<int64_t>(OH) * OW;

  Tensor out({N, Co, OH, OW});
  Tensor cols_all({N, static_cast<int>(CKK), static_cast<int>(G)});
  for (int n = 0; n < N; ++n) {
    double* cols = cols_all.data() + n * CKK * G;
    im2col(x.val().data() + static_cast<int64_t>(n) * Ci * H * W, Ci, H, W, k, stride, pad, OH,
           OW, cols);
    CMapRM Wm(w.val().data(), Co, CKK);
    CMapRM Cm(cols, CKK, G);
    MapRM Om(out.data() + static_cast<int64_t>(n) * Co * G, Co, G);
    Om.noalias() = Wm * Cm;
    if (b.defined())
      for (int co = 0; co < Co; ++co) Om.row(co).array() += b.val()[co];
  }
  std::vector<Var> parents = b.defined() ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_op(std::move(out), parents,
                 [N, Ci, H, W, Co, k, stride, pad, OH, OW, CKK, G,
                  cols_all = std::move(cols_all)](Node& n) {
                   Node* xn = n.parents[0].get();
                   Node* wn = n.parents[1].get();
                   Node* bn = n.parents.size() > 2 ? n.parents[2].get() : nullptr;
                   Tensor dcols({static_cast<int>(CKK), static_cast<int>(G)});
                   for (int bi = 0; bi < N; ++bi) {
                     CMapRM Gm(n.grad.data() + static_cast<int64_t>(bi) * Co * G, Co, G);
                     if (wn->requires_grad) {
                       CMapRM Cm(cols_all.data() + bi * CKK * G, CKK, G);
                       MapRM dWm(wn->ensure_grad().data(), Co, CKK);
                       dWm.noalias() += Gm * Cm.transpose();
                     }
                     if (xn->requires_grad) {
                       CMapRM Wm(wn->value.data(), Co, CKK);
                       MapRM dCm(dcols.data(), CKK, G);
                       dCm.noalias() = Wm.transpose() * Gm;
                       col2im(dcols.data(), Ci, H, W, k, stride, pad, OH, OW,
                              xn->ensure_grad().data() + static_cast<int64_t>(bi) * Ci * H * W);
                     }
                     if (bn && bn->requires_grad) {
                       Tensor& db = bn->ensure_grad();
                       for (int co = 0; co < Co; ++co) db[co] += Gm.row(co).sum();
                     }
                   }
                 });
}

Var conv2d_transpose(const Var& x, const Var& w, const Var& b, int stride, int pad,
                     int out_pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4) throw DimensionError("conv2d_transpose: rank");
  const int N = xs[0], Ci = xs[1], IH = xs[2], IW = xs[3];
  const int Co = ws[1], k = ws[2];
  if (ws[0] != Ci || ws[3] != k) throw DimensionError("conv2d_transpose: weight shape");
  const int OH = (IH - 1) * stride - 2 * pad + k + out_pad;
  const int OW = (IW - 1) * stride - 2 * pad + k + out_pad;
  const int64_t CoKK = static_cast<int64_t>(Co) * k * k;
  const int64_t G = static_cast<int64_t>(IH) * IW;

  Tensor out({N, Co, OH, OW});
  Tensor cols({static_cast<int>(CoKK), static_cast<int>(G)});
  for (int n = 0; n < N; ++n) {
    CMapRM Wm(w.val().data(), Ci, CoKK);
    CMapRM Xm(x.val().data() + static_cast<int64_t>(n) * Ci * G, Ci, G);
    MapRM Cm(cols.data(), CoKK, G);
    Cm.noalias() = Wm.transpose() * Xm;
    double* optr = out.data() + static_cast<int64_t>(n) * Co * OH * OW;
    col2im(cols.data(), Co, OH, OW, k, stride, pad, IH, IW, optr);
    if (b.defined()) {
      for (int co = 0; co < Co; ++co) {
        double* p = optr + static_cast<int64_t>(co) * OH * OW;
        const double bv = b.val()[co];
        for (int64_t i = 0; i < static_cast<int64_t>(OH) * OW; ++i) p[i] += bv;
      }
    }
  }
  std::vector<Var> parents = b.defined() ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_op(std::move(out), parents,
                 [N, Ci, Co, IH, IW, OH, OW, k, stride, pad, CoKK, G](Node& n) {
                   Node* xn = n.parents[0].get();
                   Node* wn = n.parents[1].get();
                   Node* bn = n.parents.size() > 2 ? n.parents[2].get() : nullptr;
                   Tensor dcols({static_cast<int>(CoKK), static_cast<int>(G)});
                   for (int bi = 0; bi < N; ++bi) {
                     const double* gptr = n.grad.data() + static_cast<int64_t>(bi) * Co * OH * OW;
                     im2col(gptr, Co, OH, OW, k, stride, pad, IH, IW, dcols.data());
                     CMapRM dCm(dcols.data(), CoKK, G);
                     if (xn->requires_grad) {
                       CMapRM Wm(wn->value.data(), Ci, CoKK);
                       MapRM dXm(xn->ensure_grad().data() + static_cast<int64_t>(bi) * Ci * G, Ci,
                                 G);
                       dXm.noalias() += Wm * dCm;
                     }
                     if (wn->requires_grad) {
                       CMapRM Xm(xn->value.data() + static_cast<int64_t>(bi) * Ci * G, Ci, G);
                       MapRM dWm(wn->ensure_grad().data(), Ci, CoKK);
                       dWm.noalias() += Xm * dCm.transpose();
                     }
                     if (bn && bn->requires_grad) {
                       Tensor& db = bn->ensure_grad();
                       for (int co = 0; co < Co; ++co) {
                         const double* p = gptr + static_cast<int64_t>(co) * OH * OW;
                         double s = 0.0;
                         for (int64_t i = 0; i < static_cast<int64_t>(OH) * OW; ++i) s += p[i];
                         db[co] += s;
                       }
                     }
                   }
                 });
}

Var separable_filter2d_valid(const Var& x, const std::vector<double>& kvec) {
  const auto& xs = x.shape();
  if (xs.size() != 4) throw DimensionError("separable_filter2d_valid: rank");
  const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int k = static_cast<int>(kvec.size());
  const int OH = H - k + 1, OW = W - k + 1;
  if (OH <= 0 || OW <= 0) throw DimensionError("separable_filter2d_valid: input too small");

  // horizontal pass then vertical pass
  Tensor tmp({N, C, H, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y) {
        const double* row = x.val().data() + ((static_cast<int64_t>(n) * C + c) * H + y) * W;
        double* trow = tmp.data() + ((static_cast<int64_t>(n) * C + c) * H + y) * OW;
        for (int ox = 0; ox < OW; ++ox) {
          double s = 0.0;
          for (int i = 0; i < k; ++i) s += kvec[i] * row[ox + i];
          trow[ox] = s;
        }
      }
  Tensor out({N, C, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < OH; ++oy) {
        double* orow = out.data() + ((static_cast<int64_t>(n) * C + c) * OH + oy) * OW;
        for (int ox = 0; ox < OW; ++ox) {
          double s = 0.0;
          for (int j = 0; j < k; ++j)
            s += kvec[j] *
                 tmp[((static_cast<int64_t>(n) * C + c) * H + oy + j) * OW + ox];
          orow[ox] = s;
        }
      }
  return make_op(std::move(out), {x}, [N, C, H, W, OH, OW, k, kvec](Node& n) {
    Tensor& gx = n.parents[0]->ensure_grad();
    // scatter: dx[y+j][x+i] += k[j]*k[i]*dout[y][x]
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < OH; ++oy)
          for (int ox = 0; ox < OW; ++ox) {
            const double g = n.grad[((static_cast<int64_t>(b) * C + c) * OH + oy) * OW + ox];
            if (g == 0.0) continue;
            for (int j = 0; j < k; ++j) {
              double* row = gx.data() + ((static_cast<int64_t>(b) * C + c) * H + oy + j) * W + ox;
              const double gj = g * kvec[j];
              for (int i = 0; i < k; ++i) row[i] += gj * kvec[i];
            }
          }
  });
}

Var avg_pool2x2(const Var& x) {
  const auto& xs = x.shape();
  if (xs.size() != 4) throw DimensionError("avg_pool2x2: rank");
  const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int OH = (H + 1) / 2, OW = (W + 1) / 2;
  Tensor out({N, C, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double s = 0.0;
          int cnt = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int y = 2 * oy + dy, xx = 2 * ox + dx;
              if (y < H && xx < W) {
                s += x.val()[((static_cast<int64_t>(n) * C + c) * H + y) * W + xx];
                ++cnt;
              }
            }
          out[((static_cast<int64_t>(n) * C + c) * OH + oy) * OW + ox] = s / cnt;
        }
  return make_op(std::move(out), {x}, [N, C, H, W, OH, OW](Node& n) {
    Tensor& gx = n.parents[0]->ensure_grad();
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < OH; ++oy)
          for (int ox = 0; ox < OW; ++ox) {
            int cnt = 0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                if (2 * oy + dy < H && 2 * ox + dx < W) ++cnt;
            const double g =
                n.grad[((static_cast<int64_t>(b) * C + c) * OH + oy) * OW + ox] / cnt;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const int y = 2 * oy + dy, xx = 2 * ox + dx;
                if (y < H && xx < W)
                  gx[((static_cast<int64_t>(b) * C + c) * H + y) * W + xx] += g;
              }
          }
  });
}

// mask rule shared with the per-element coding path (see context_eval.cpp)
static inline bool mask3d_allowed(int dc, int dy, int dx) {
  if (dy != 0) return dy < 0;
  if (dx != 0) return dx < 0;
  return dc < 0;
}

Var masked_conv3d(const Var& x, const Var& w, const Var& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4) throw DimensionError("masked_conv3d: input rank");
  if (ws.size() != 4 || ws[1] != 5 || ws[2] != 5 || ws[3] != 5)
    throw DimensionError("masked_conv3d: weight must be [F,5,5,5]");
  const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int F = ws[0];
  Tensor out({N, F, C, H, W});
  const int64_t chw = static_cast<int64_t>(C) * H * W;
  for (int n = 0; n < N; ++n) {
    const double* xin = x.val().data() + n * chw;
    for (int f = 0; f < F; ++f) {
      double* op = out.data() + (static_cast<int64_t>(n) * F + f) * chw;
      const double bias = b.defined() ? b.val()[f] : 0.0;
      for (int64_t i = 0; i < chw; ++i) op[i] = bias;
    }
    for (int dc = -2; dc <= 2; ++dc)
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          if (!mask3d_allowed(dc, dy, dx)) continue;
          for (int f = 0; f < F; ++f) {
            const double wv = w.val().at(f, dc + 2, dy + 2, dx + 2);
            if (wv == 0.0) continue;
            double* op = out.data() + (static_cast<int64_t>(n) * F + f) * chw;
            for (int c = std::max(0, -dc); c < std::min(C, C - dc); ++c)
              for (int y = std::max(0, -dy); y < std::min(H, H - dy); ++y) {
                const double* src =
                    xin + (static_cast<int64_t>(c + dc) * H + (y + dy)) * W + dx;
                double* dst = op + (static_cast<int64_t>(c) * H + y) * W;
                const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                for (int xx = x0; xx < x1; ++xx) dst[xx] += wv * src[xx];
              }
          }
        }
  }
  std::vector<Var> parents = b.defined() ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_op(std::move(out), parents, [N, C, H, W, F, chw](Node& n) {
    Node* xn = n.parents[0].get();
    Node* wn = n.parents[1].get();
    Node* bn = n.parents.size() > 2 ? n.parents[2].get() : nullptr;
    for (int bi = 0; bi < N; ++bi) {
      for (int dc = -2; dc <= 2; ++dc)
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            if (!mask3d_allowed(dc, dy, dx)) continue;
            for (int f = 0; f < F; ++f) {
              const double wv = wn->value.at(f, dc + 2, dy + 2, dx + 2);
              const double* gp = n.grad.data() + (static_cast<int64_t>(bi) * F + f) * chw;
              double wgrad = 0.0;
              for (int c = std::max(0, -dc); c < std::min(C, C - dc); ++c)
                for (int y = std::max(0, -dy); y < std::min(H, H - dy); ++y) {
                  const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                  const double* grow = gp + (static_cast<int64_t>(c) * H + y) * W;
                  const int64_t soff =
                      bi * chw + (static_cast<int64_t>(c + dc) * H + (y + dy)) * W + dx;
                  if (xn->requires_grad) {
                    double* gxrow = xn->ensure_grad().data() + soff;
                    for (int xx = x0; xx < x1; ++xx) gxrow[xx] += wv * grow[xx];
                  }
                  if (wn->requires_grad) {
                    const double* xrow = xn->value.data() + soff;
                    for (int xx = x0; xx < x1; ++xx) wgrad += grow[xx] * xrow[xx];
                  }
                }
              if (wn->requires_grad)
                wn->ensure_grad().at(f, dc + 2, dy + 2, dx + 2) += wgrad;
            }
          }
      if (bn && bn->requires_grad) {
        Tensor& db = bn->ensure_grad();
        for (int f = 0; f < F; ++f) {
          const double* gp = n.grad.data() + (static_cast<int64_t>(bi) * F + f) * chw;
          double s = 0.0;
          for (int64_t i = 0; i < chw; ++i) s += gp[i];
          db[f] += s;
        }
      }
    }
  });
}

Var voxel_linear(const Var& x, const Var& w, const Var& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 5) throw DimensionError("voxel_linear: input rank");
  if (ws.size() != 2 || ws[1] != xs[1]) throw DimensionError("voxel_linear: weight shape");
  const int N = xs[0], F = xs[1], G = ws[0];
  const int64_t M = static_cast<int64_t>(xs[2]) * xs[3] * xs[4];
  Tensor out({N, G, xs[2], xs[3], xs[4]});
  for (int n = 0; n < N; ++n) {
    CMapRM Xm(x.val().data() + n * F * M, F, M);
    CMapRM Wm(w.val().data(), G, F);
    MapRM Om(out.data() + n * G * M, G, M);
    Om.noalias() = Wm * Xm;
    if (b.defined())
      for (int g = 0; g < G; ++g) Om.row(g).array() += b.val()[g];
  }
  std::vector<Var> parents = b.defined() ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_op(std::move(out), parents, [N, F, G, M](Node& n) {
    Node* xn = n.parents[0].get();
    Node* wn = n.parents[1].get();
    Node* bn = n.parents.size() > 2 ? n.parents[2].get() : nullptr;
    for (int bi = 0; bi < N; ++bi) {
      CMapRM Gm(n.grad.data() + bi * G * M, G, M);
      if (xn->requires_grad) {
        CMapRM Wm(wn->value.data(), G, F);
        MapRM dXm(xn->ensure_grad().data() + bi * F * M, F, M);
        dXm.noalias() += Wm.transpose() * Gm;
      }
      if (wn->requires_grad) {
        CMapRM Xm(xn->value.data() + bi * F * M, F, M);
        MapRM dWm(wn->ensure_grad().data(), G, F);
        dWm.noalias() += Gm * Xm.transpose();
      }
      if (bn && bn->requires_grad) {
        Tensor& db = bn->ensure_grad();
        for (int g = 0; g < G; ++g) db[g] += Gm.row(g).sum();
      }
    }
  });
}

Var as_voxel_feature(const Var& x) {
  const auto& s = x.shape();
  if (s.size() != 4) throw DimensionError("as_voxel_feature: rank");
  return reshape(x, {s[0], 1, s[1], s[2], s[3]});
}

Var from_voxel_feature(const Var& x) {
  const auto& s = x.shape();
  if (s.size() != 5 || s[1] != 1) throw DimensionError("from_voxel_feature: shape");
  return reshape(x, {s[0], s[2], s[3], s[4]});
}

Var softmax_rows(const Var& a) {
  const auto& s = a.shape();
  if (s.size() != 2) throw DimensionError("softmax_rows: rank");
  const int R = s[0], C = s[1];
  Tensor out = a.val();
  for (int r = 0; r < R; ++r) {
    double* row = out.data() + static_cast<int64_t>(r) * C;
    double mx = row[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (int c = 0; c < C; ++c) row[c] /= sum;
  }
  Tensor y = out;
  return make_op(std::move(out), {a}, [R, C, y = std::move(y)](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int r = 0; r < R; ++r) {
      const double* yr = y.data() + static_cast<int64_t>(r) * C;
      const double* gr = n.grad.data() + static_cast<int64_t>(r) * C;
      double dot = 0.0;
      for (int c = 0; c < C; ++c) dot += yr[c] * gr[c];
      double* gp = g.data() + static_cast<int64_t>(r) * C;
      for (int c = 0; c < C; ++c) gp[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) throw DimensionError("matmul: shapes");
  const int M = as[0], K = as[1], N2 = bs[1];
  Tensor out({M, N2});
  CMapRM Am(a.val().data(), M, K);
  CMapRM Bm(b.val().data(), K, N2);
  MapRM Om(out.data(), M, N2);
  Om.noalias() = Am * Bm;
  return make_op(std::move(out), {a, b}, [M, K, N2](Node& n) {
    Node* an = n.parents[0].get();
    Node* bn = n.parents[1].get();
    CMapRM Gm(n.grad.data(), M, N2);
    if (an->requires_grad) {
      CMapRM Bm(bn->value.data(), K, N2);
      MapRM dAm(an->ensure_grad().data(), M, K);
      dAm.noalias() += Gm * Bm.transpose();
    }
    if (bn->requires_grad) {
      CMapRM Am(an->value.data(), M, K);
      MapRM dBm(bn->ensure_grad().data(), K, N2);
      dBm.noalias() += Am.transpose() * Gm;
    }
  });
}

Var transpose2d(const Var& a) {
  const auto& s = a.shape();
  if (s.size() != 2) throw DimensionError("transpose2d: rank");
  const int R = s[0], C = s[1];
  Tensor out({C, R});
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out.at(c, r) = a.val().at(r, c);
  return make_op(std::move(out), {a}, [R, C](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) g.at(r, c) += n.grad.at(c, r);
  });
}

// ---------------- warping ----------------

Var warp_bilinear(const Var& ref, const Var& flow) {
  const auto& rs = ref.shape();
  const auto& fs = flow.shape();
  if (rs.size() != 4 || fs.size() != 4 || fs[1] != 2 || rs[0] != fs[0] || rs[2] != fs[2] ||
      rs[3] != fs[3])
    throw DimensionError("warp_bilinear: ref [N,C,H,W] and flow [N,2,H,W] must align");
  const int N = rs[0], C = rs[1], H = rs[2], W = rs[3];
  Tensor out({N, C, H, W});
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double u = flow.val().at(n, 0, y, x);
        const double v = flow.val().at(n, 1, y, x);
        double sx = x + u, sy = y + v;
        sx = std::min(std::max(sx, 0.0), static_cast<double>(W - 1));
        sy = std::min(std::max(sy, 0.0), static_cast<double>(H - 1));
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const int x1 = std::min(x0 + 1, W - 1);
        const int y1 = std::min(y0 + 1, H - 1);
        const double fx = sx - x0, fy = sy - y0;
        for (int c = 0; c < C; ++c) {
          const double v00 = ref.val().at(n, c, y0, x0);
          const double v01 = ref.val().at(n, c, y0, x1);
          const double v10 = ref.val().at(n, c, y1, x0);
          const double v11 = ref.val().at(n, c, y1, x1);
          out.at(n, c, y, x) =
              (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
        }
      }
  return make_op(std::move(out), {ref, flow}, [N, C, H, W](Node& n) {
    Node* rn = n.parents[0].get();
    Node* fn = n.parents[1].get();
    const Tensor& fv = fn->value;
    const Tensor& rv = rn->value;
    for (int b = 0; b < N; ++b)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double u = fv.at(b, 0, y, x);
          const double v = fv.at(b, 1, y, x);
          double sx = x + u, sy = y + v;
          const bool cx = sx <= 0.0 || sx >= W - 1;
          const bool cy = sy <= 0.0 || sy >= H - 1;
          sx = std::min(std::max(sx, 0.0), static_cast<double>(W - 1));
          sy = std::min(std::max(sy, 0.0), static_cast<double>(H - 1));
          const int x0 = static_cast<int>(std::floor(sx));
          const int y0 = static_cast<int>(std::floor(sy));
          const int x1 = std::min(x0 + 1, W - 1);
          const int y1 = std::min(y0 + 1, H - 1);
          const double fx = sx - x0, fy = sy - y0;
          double du = 0.0, dv = 0.0;
          for (int c = 0; c < C; ++c) {
            const double g = n.grad.at(b, c, y, x);
            if (g == 0.0 && !rn->requires_grad) continue;
            const double v00 = rv.at(b, c, y0, x0);
            const double v01 = rv.at(b, c, y0, x1);
            const double v10 = rv.at(b, c, y1, x0);
            const double v11 = rv.at(b, c, y1, x1);
            if (rn->requires_grad) {
              Tensor& gr = rn->ensure_grad();
              gr.at(b, c, y0, x0) += g * (1 - fy) * (1 - fx);
              gr.at(b, c, y0, x1) += g * (1 - fy) * fx;
              gr.at(b, c, y1, x0) += g * fy * (1 - fx);
              gr.at(b, c, y1, x1) += g * fy * fx;
            }
            du += g * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
            dv += g * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
          }
          if (fn->requires_grad) {
            Tensor& gf = fn->ensure_grad();
            if (!cx) gf.at(b, 0, y, x) += du;
            if (!cy) gf.at(b, 1, y, x) += dv;
          }
        }
  });
}

// ---------------- likelihood ----------------

namespace {

// W. J. Cody's rational approximation for erf/erfc; double precision,
// fixed evaluation order so CDF tables reproduce across builds.
double erf_series(double x) {
  // |x| <= 0.46875
  static const double a[5] = {3.16112374387056560e0, 1.13864154151050156e2,
                              3.77485237685302021e2, 3.20937758913846947e3,
                              1.85777706184603153e-1};
  static const double b[4] = {2.36012909523441209e1, 2.44024637934444173e2,
                              1.28261652607737228e3, 2.84423683343917062e3};
  const double z = x * x;
  double num = a[4] * z;
  double den = z;
  for (int i = 0; i < 3; ++i) {
    num = (num + a[i]) * z;
    den = (den + b[i]) * z;
  }
  return x * (num + a[3]) / (den + b[3]);
}

double erfc_mid(double x) {
  // 0.46875 < x <= 4
  static const double c[9] = {5.64188496988670089e-1, 8.88314979438837594e0,
                              6.61191906371416295e1,  2.98635138197400131e2,
                              8.81952221241769090e2,  1.71204761263407058e3,
                              2.05107837782607147e3,  1.23033935479799725e3,
                              2.15311535474403846e-8};
  static const double d[8] = {1.57449261107098347e1, 1.17693950891312499e2,
                              5.37181101862009858e2, 1.62138957456669019e3,
                              3.29079923573345963e3, 4.36261909014324716e3,
                              3.43936767414372164e3, 1.23033935480374942e3};
  double num = c[8] * x;
  double den = x;
  for (int i = 0; i < 7; ++i) {
    num = (num + c[i]) * x;
    den = (den + d[i]) * x;
  }
  const double frac = (num + c[7]) / (den + d[7]);
  const double xsq = std::floor(x * 16.0) / 16.0;
  const double del = (x - xsq) * (x + xsq);
  return std::exp(-xsq * xsq) * std::exp(-del) * frac;
}

double erfc_far(double x) {
  // x > 4
  static const double p[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                              1.25781726111229246e-1, 1.60837851487422766e-2,
                              6.58749161529837803e-4, 1.63153871373020978e-2};
  static const double q[5] = {2.56852019228982242e0,  1.87295284992346047e0,
                              5.27905102951428412e-1, 6.05183413124413191e-2,
                              2.33520497626869185e-3};
  if (x >= 26.5) return 0.0;
  const double z = 1.0 / (x * x);
  double num = p[5] * z;
  double den = z;
  for (int i = 0; i < 4; ++i) {
    num = (num + p[i]) * z;
    den = (den + q[i]) * z;
  }
  double frac = z * (num + p[4]) / (den + q[4]);
  frac = (0.564189583547756287 - frac) / x;  // 1/sqrt(pi)
  const double xsq = std::floor(x * 16.0) / 16.0;
  const double del = (x - xsq) * (x + xsq);
  return std::exp(-xsq * xsq) * std::exp(-del) * frac;
}

double erfc_cody(double x) {
  const double ax = std::fabs(x);
  double r;
  if (ax <= 0.46875) {
    return 1.0 - erf_series(x);
  } else if (ax <= 4.0) {
    r = erfc_mid(ax);
  } else {
    r = erfc_far(ax);
  }
  return x < 0.0 ? 2.0 - r : r;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

double norm_cdf(double x) { return 0.5 * erfc_cody(-x * kInvSqrt2); }

Var gaussian_bits(const Var& v, const Var& mu, const Var& sigma) {
  check_same_shape(v, mu, "gaussian_bits");
  check_same_shape(v, sigma, "gaussian_bits");
  const int64_t m = v.numel();
  Tensor out(v.shape());
  Tensor pcache(v.shape());
  const double ln2 = 0.6931471805599453094;
  for (int64_t i = 0; i < m; ++i) {
    const double s = sigma.val()[i];
    const double a = (v.val()[i] + 0.5 - mu.val()[i]) / s;
    const double b = (v.val()[i] - 0.5 - mu.val()[i]) / s;
    const double p = norm_cdf(a) - norm_cdf(b);
    pcache[i] = p;
    out[i] = -std::log(std::max(p, 1e-9)) / ln2;
  }
  Tensor vv = v.val(), mv = mu.val(), sv = sigma.val();
  return make_op(std::move(out), {v, mu, sigma},
                 [m, ln2, pcache = std::move(pcache), vv = std::move(vv), mv = std::move(mv),
                  sv = std::move(sv)](Node& n) {
                   Node* vn = n.parents[0].get();
                   Node* mn = n.parents[1].get();
                   Node* sn = n.parents[2].get();
                   for (int64_t i = 0; i < m; ++i) {
                     const double p = pcache[i];
                     if (p <= 1e-9) continue;  // clamped: no gradient
                     const double s = sv[i];
                     const double a = (vv[i] + 0.5 - mv[i]) / s;
                     const double b = (vv[i] - 0.5 - mv[i]) / s;
                     const double pa = kInvSqrt2Pi * std::exp(-0.5 * a * a);
                     const double pb = kInvSqrt2Pi * std::exp(-0.5 * b * b);
                     const double dbits_dp = -n.grad[i] / (p * ln2);
                     if (vn->requires_grad) vn->ensure_grad()[i] += dbits_dp * (pa - pb) / s;
                     if (mn->requires_grad) mn->ensure_grad()[i] += dbits_dp * (pb - pa) / s;
                     if (sn->requires_grad)
                       sn->ensure_grad()[i] += dbits_dp * (pb * b - pa * a) / s;
                   }
                 });
}

}  // namespace lvc
