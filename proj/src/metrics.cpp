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

#include "lvc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lvc/common.hpp"

namespace lvc {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr int kWin = 11;
const double kMsWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::vector<double> gaussian_kernel11() {
  std::vector<double> k(kWin);
  double s = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += k[i];
  }
  for (auto& v : k) v /= s;
  return k;
}

// plain separable valid-mode blur of one [H,W] plane
Tensor blur_plane(const Tensor& p, const std::vector<double>& k) {
  const int H = p.dim(0), W = p.dim(1);
  const int OW = W - kWin + 1, OH = H - kWin + 1;
  Tensor tmp({H, OW});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < OW; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWin; ++i) s += k[i] * p.at(y, x + i);
      tmp.at(y, x) = s;
    }
  Tensor out({OH, OW});
  for (int y = 0; y < OH; ++y)
    for (int x = 0; x < OW; ++x) {
      double s = 0.0;
      for (int j = 0; j < kWin; ++j) s += k[j] * tmp.at(y + j, x);
      out.at(y, x) = s;
    }
  return out;
}

Tensor downsample_plane(const Tensor& p) {
  const int H = p.dim(0), W = p.dim(1);
  const int OH = (H + 1) / 2, OW = (W + 1) / 2;
  Tensor out({OH, OW});
  for (int y = 0; y < OH; ++y)
    for (int x = 0; x < OW; ++x) {
      double s = 0.0;
      int c = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const int yy = 2 * y + dy, xx = 2 * x + dx;
          if (yy < H && xx < W) {
            s += p.at(yy, xx);
            ++c;
          }
        }
      out.at(y, x) = s / c;
    }
  return out;
}

// (mean luminance-ssim, mean contrast-structure) of one plane pair
std::pair<double, double> ssim_plane(const Tensor& a, const Tensor& b,
                                     const std::vector<double>& k) {
  Tensor mua = blur_plane(a, k), mub = blur_plane(b, k);
  const int H = a.dim(0), W = a.dim(1);
  Tensor aa({H, W}), bb({H, W}), ab({H, W});
  for (int64_t i = 0; i < aa.numel(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  Tensor eaa = blur_plane(aa, k), ebb = blur_plane(bb, k), eab = blur_plane(ab, k);
  double lum = 0.0, cs = 0.0;
  for (int64_t i = 0; i < mua.numel(); ++i) {
    const double ma = mua[i], mb = mub[i];
    const double va = eaa[i] - ma * ma;
    const double vb = ebb[i] - mb * mb;
    const double cov = eab[i] - ma * mb;
    const double cs_i = (2.0 * cov + kC2) / (va + vb + kC2);
    lum += (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1) * cs_i;
    cs += cs_i;
  }
  return {lum / mua.numel(), cs / mua.numel()};
}

}  // namespace

int msssim_scales(int h, int w) {
  int scales = 1;
  int mh = h, mw = w;
  while (scales < 5) {
    mh = (mh + 1) / 2;
    mw = (mw + 1) / 2;
    if (std::min(mh, mw) < kWin) break;
    ++scales;
  }
  return scales;
}

double msssim(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b) || a.rank() != 3 || a.dim(0) != 3)
    throw DimensionError("msssim: expects matching [3,H,W] frames");
  const int H = a.dim(1), W = a.dim(2);
  if (std::min(H, W) < kWin) throw DimensionError("msssim: input smaller than the 11x11 window");
  const int scales = msssim_scales(H, W);
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += kMsWeights[s];
  const auto k = gaussian_kernel11();

  double score = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    Tensor pa({H, W}), pb({H, W});
    for (int64_t i = 0; i < pa.numel(); ++i) {
      pa[i] = a[ch * pa.numel() + i];
      pb[i] = b[ch * pb.numel() + i];
    }
    double acc = 1.0;
    for (int s = 0; s < scales; ++s) {
      auto [lum, cs] = ssim_plane(pa, pb, k);
      const double weight = kMsWeights[s] / wsum;
      const double term = s + 1 == scales ? lum : cs;
      acc *= std::pow(std::max(term, 1e-6), weight);
      if (s + 1 < scales) {
        pa = downsample_plane(pa);
        pb = downsample_plane(pb);
      }
    }
    score += acc;
  }
  return score / 3.0;
}

Var msssim_var(const Var& a, const Var& b) {
  const auto& s = a.shape();
  if (!(s == b.shape()) || s.size() != 4)
    throw DimensionError("msssim_var: expects matching [N,3,H,W]");
  const int scales = msssim_scales(s[2], s[3]);
  double wsum = 0.0;
  for (int sc = 0; sc < scales; ++sc) wsum += kMsWeights[sc];
  const auto k = gaussian_kernel11();

  Var xa = a, xb = b;
  Var acc;
  for (int sc = 0; sc < scales; ++sc) {
    Var mua = separable_filter2d_valid(xa, k);
    Var mub = separable_filter2d_valid(xb, k);
    Var eaa = separable_filter2d_valid(mul(xa, xa), k);
    Var ebb = separable_filter2d_valid(mul(xb, xb), k);
    Var eab = separable_filter2d_valid(mul(xa, xb), k);
    Var va = sub(eaa, mul(mua, mua));
    Var vb = sub(ebb, mul(mub, mub));
    Var cov = sub(eab, mul(mua, mub));
    Var cs = div(add_scalar(mul_scalar(cov, 2.0), kC2), add_scalar(add(va, vb), kC2));
    Var term;
    if (sc + 1 == scales) {
      Var lum = div(add_scalar(mul_scalar(mul(mua, mub), 2.0), kC1),
                    add_scalar(add(mul(mua, mua), mul(mub, mub)), kC1));
      term = mean(mul(lum, cs));
    } else {
      term = mean(cs);
    }
    Var powed = pow_scalar(clamp_min(term, 1e-6), kMsWeights[sc] / wsum);
    acc = sc == 0 ? powed : mul(acc, powed);
    if (sc + 1 < scales) {
      xa = avg_pool2x2(xa);
      xb = avg_pool2x2(xb);
    }
  }
  return acc;
}

// ---------------- BD-rate ----------------

namespace {

struct Pchip {
  std::vector<double> x, y, m;  // knots, values, slopes
};

Pchip pchip_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  std::vector<double> h(n - 1), d(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    if (h[i] <= 0.0) throw BadInputError("bd_rate: quality values must be strictly increasing");
    d[i] = (y[i + 1] - y[i]) / h[i];
  }
  std::vector<double> m(n, 0.0);
  // Fritsch-Carlson monotone slopes
  for (size_t i = 1; i + 1 < n; ++i) {
    if (d[i - 1] == 0.0 || d[i] == 0.0 || (d[i - 1] > 0) != (d[i] > 0)) {
      m[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }
  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double m0 = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m0 * d0 <= 0.0)
      m0 = 0.0;
    else if ((d0 > 0) != (d1 > 0) && std::fabs(m0) > 3.0 * std::fabs(d0))
      m0 = 3.0 * d0;
    return m0;
  };
  m[0] = endpoint(h[0], h[1], d[0], d[1]);
  m[n - 1] = endpoint(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
  return {x, y, m};
}

// integral of the cubic Hermite segment over t in [t0,t1] (times h)
double hermite_integral(double yk, double yk1, double mk, double mk1, double h, double t0,
                        double t1) {
  auto F = [&](double t) {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    const double i00 = 0.5 * t4 - t3 + t;
    const double i10 = 0.25 * t4 - 2.0 / 3.0 * t3 + 0.5 * t2;
    const double i01 = -0.5 * t4 + t3;
    const double i11 = 0.25 * t4 - t3 / 3.0;
    return i00 * yk + i10 * h * mk + i01 * yk1 + i11 * h * mk1;
  };
  return h * (F(t1) - F(t0));
}

double pchip_integrate(const Pchip& p, double lo, double hi) {
  double acc = 0.0;
  for (size_t i = 0; i + 1 < p.x.size(); ++i) {
    const double a = std::max(lo, p.x[i]);
    const double b = std::min(hi, p.x[i + 1]);
    if (b <= a) continue;
    const double h = p.x[i + 1] - p.x[i];
    const double t0 = (a - p.x[i]) / h;
    const double t1 = (b - p.x[i]) / h;
    acc += hermite_integral(p.y[i], p.y[i + 1], p.m[i], p.m[i + 1], h, t0, t1);
  }
  return acc;
}

Pchip curve_to_pchip(std::vector<RatePoint>& pts) {
  if (pts.size() < 4) throw BadInputError("bd_rate: need at least 4 rate points per curve");
  std::sort(pts.begin(), pts.end(),
            [](const RatePoint& a, const RatePoint& b) { return a.quality < b.quality; });
  std::vector<double> q, lr;
  for (const auto& p : pts) {
    if (p.bpp <= 0.0) throw BadInputError("bd_rate: rates must be positive");
    q.push_back(p.quality);
    lr.push_back(std::log10(p.bpp));
  }
  return pchip_fit(q, lr);
}

}  // namespace

double bd_rate_percent(std::vector<RatePoint> anchor, std::vector<RatePoint> test) {
  Pchip pa = curve_to_pchip(anchor);
  Pchip pt = curve_to_pchip(test);
  const double lo = std::max(pa.x.front(), pt.x.front());
  const double hi = std::min(pa.x.back(), pt.x.back());
  if (hi <= lo) throw BadInputError("bd_rate: quality ranges do not overlap");
  const double avg_diff = (pchip_integrate(pt, lo, hi) - pchip_integrate(pa, lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

}  // namespace lvc
