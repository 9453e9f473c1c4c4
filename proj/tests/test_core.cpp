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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "lvc/autograd.hpp"
#include "lvc/bitstream.hpp"
#include "lvc/common.hpp"
#include "lvc/nn.hpp"
#include "lvc/range_coder.hpp"

using namespace lvc;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// central finite differences against the tape, sampled positions
double max_grad_rel_err(const std::function<Var()>& loss_fn, std::vector<Var> inputs,
                        Rng& rng, int probes_per_input = 8, double h = 1e-4) {
  for (auto& v : inputs) v.zero_grad();
  Var loss = loss_fn();
  backward(loss);
  double worst = 0.0;
  for (auto& v : inputs) {
    const Tensor grad = v.grad();
    for (int p = 0; p < probes_per_input; ++p) {
      const int64_t i = rng.uniform_int(0, v.numel() - 1);
      const double keep = v.val()[i];
      double fplus, fminus;
      {
        NoGradGuard ng;
        v.val()[i] = keep + h;
        fplus = loss_fn().val()[0];
        v.val()[i] = keep - h;
        fminus = loss_fn().val()[0];
        v.val()[i] = keep;
      }
      const double fd = (fplus - fminus) / (2.0 * h);
      const double denom = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6});
      worst = std::max(worst, std::fabs(fd - grad[i]) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
  Rng rng(7);
  Var a(random_tensor({2, 3, 4, 4}, rng, 0.2, 1.5), true);
  Var b(random_tensor({2, 3, 4, 4}, rng, 0.2, 1.5), true);
  auto loss = [&] {
    Var x = mul(sigmoid(a), tanh_op(b));
    x = add(x, softplus(sub(a, b)));
    x = mul(x, exp_op(mul_scalar(b, 0.1)));
    x = add(x, sqrt_op(add_scalar(square(a), 1.0)));
    return mean(x);
  };
  CHECK(max_grad_rel_err(loss, {a, b}, rng, 16) < 1e-4);
}

TEST_CASE("conv2d / conv2d_transpose gradients") {
  Rng rng(11);
  Var x(random_tensor({2, 3, 8, 8}, rng), true);
  Var w(random_tensor({4, 3, 5, 5}, rng, -0.3, 0.3), true);
  Var b(random_tensor({4}, rng), true);
  auto loss = [&] { return mean(square(conv2d(x, w, b, 2, 2))); };
  CHECK(max_grad_rel_err(loss, {x, w, b}, rng) < 1e-4);

  Var wt(random_tensor({3, 4, 5, 5}, rng, -0.3, 0.3), true);
  Var bt(random_tensor({4}, rng), true);
  auto loss_t = [&] { return mean(square(conv2d_transpose(x, wt, bt, 2, 2, 1))); };
  CHECK(max_grad_rel_err(loss_t, {x, wt, bt}, rng) < 1e-4);
  // shape: deconv k5 s2 p2 op1 exactly doubles
  CHECK(conv2d_transpose(x, wt, bt, 2, 2, 1).shape() == std::vector<int>{2, 4, 16, 16});
}

TEST_CASE("masked_conv3d and voxel_linear gradients") {
  Rng rng(13);
  Var x(random_tensor({1, 4, 3, 5}, rng), true);
  Var w(random_tensor({3, 5, 5, 5}, rng, -0.2, 0.2), true);
  Var b(random_tensor({3}, rng), true);
  Var lw(random_tensor({2, 4}, rng), true);
  Var lb(random_tensor({2}, rng), true);
  auto loss = [&] {
    Var f = masked_conv3d(x, w, b);                 // [1,3,4,3,5]
    Var g = concat_dim1({f, as_voxel_feature(x)});  // [1,4,4,3,5]
    return mean(square(voxel_linear(g, lw, lb)));
  };
  CHECK(max_grad_rel_err(loss, {x, w, b, lw, lb}, rng, 12) < 1e-4);
}

TEST_CASE("masked_conv3d output is causal in (y,x,c) scan order") {
  Rng rng(17);
  const int C = 4, H = 3, W = 5;
  Tensor vol = random_tensor({1, C, H, W}, rng);
  Var w(random_tensor({2, 5, 5, 5}, rng, -0.5, 0.5), false);
  Var b(random_tensor({2}, rng), false);
  NoGradGuard ng;
  Tensor base = masked_conv3d(Var(vol), w, b).val();
  auto scan_index = [&](int c, int y, int x) { return (y * W + x) * C + c; };
  for (int trial = 0; trial < 200; ++trial) {
    const int c = static_cast<int>(rng.uniform_int(0, C - 1));
    const int y = static_cast<int>(rng.uniform_int(0, H - 1));
    const int x = static_cast<int>(rng.uniform_int(0, W - 1));
    const int cj = static_cast<int>(rng.uniform_int(0, C - 1));
    const int yj = static_cast<int>(rng.uniform_int(0, H - 1));
    const int xj = static_cast<int>(rng.uniform_int(0, W - 1));
    if (scan_index(cj, yj, xj) < scan_index(c, y, x)) continue;  // only non-causal probes
    Tensor pert = vol;
    pert.at(0, cj, yj, xj) += 3.0;
    Tensor outp = masked_conv3d(Var(pert), w, b).val();
    for (int f = 0; f < 2; ++f)
      CHECK(outp.at(0, f, c, y, x) == base.at(0, f, c, y, x));
  }
}

TEST_CASE("warp_bilinear gradients (away from clamp boundaries)") {
  Rng rng(19);
  Var ref(random_tensor({1, 2, 7, 7}, rng, 0.0, 1.0), true);
  Tensor fl = random_tensor({1, 2, 7, 7}, rng, -0.4, 0.4);
  // push sample points off integer lattice so bilinear is smooth at the probe
  for (int64_t i = 0; i < fl.numel(); ++i) fl[i] += (fl[i] >= 0 ? 0.13 : -0.13);
  Var flow(fl, true);
  auto loss = [&] { return mean(square(warp_bilinear(ref, flow))); };
  CHECK(max_grad_rel_err(loss, {ref, flow}, rng, 24) < 1e-4);
}

TEST_CASE("gaussian_bits gradients and values") {
  Rng rng(23);
  Var v(random_tensor({40}, rng, -3.0, 3.0), true);
  Var mu(random_tensor({40}, rng, -2.0, 2.0), true);
  Var sr(random_tensor({40}, rng, -1.0, 1.0), true);
  auto loss = [&] {
    Var sigma = add_scalar(softplus(sr), 0.01);
    return mean(gaussian_bits(v, mu, sigma));
  };
  CHECK(max_grad_rel_err(loss, {v, mu, sr}, rng, 20) < 1e-4);

  // p(0; mu=0, sigma=1) = Phi(0.5) - Phi(-0.5), erf closed form
  const double expected = std::erf(0.5 / std::sqrt(2.0));
  CHECK(gaussian_likelihood(0.0, 0.0, 1.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(gaussian_likelihood(0.0, 0.0, 1.0) == doctest::Approx(0.3829249).epsilon(1e-6));

  // symmetry about the mean
  for (int v0 = -4; v0 <= 4; ++v0)
    CHECK(gaussian_likelihood(v0, 1.0, 0.7) ==
          doctest::Approx(gaussian_likelihood(2.0 - v0, 1.0, 0.7)).epsilon(1e-12));

  // normalization over a wide alphabet
  double s = 0.0;
  for (int vv = -1000; vv <= 1000; ++vv) s += gaussian_likelihood(vv, 0.0, 1.0);
  CHECK(std::fabs(s - 1.0) < 1e-9);
  // and for a broad sigma (full-alphabet sum within 1e-6)
  double s2 = 0.0;
  for (int vv = -1000; vv <= 1000; ++vv) s2 += gaussian_likelihood(vv, 3.3, 40.0);
  CHECK(std::fabs(s2 - 1.0) < 1e-6);
}

TEST_CASE("norm_cdf agrees with libm erfc") {
  for (double x = -8.0; x <= 8.0; x += 0.0625) {
    const double ref = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(norm_cdf(x) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("softmax/matmul/nonlocal composite gradients") {
  Rng rng(29);
  ParamStore ps;
  NonLocalBlock nl(ps, "nl", 4, rng);
  Var x(random_tensor({2, 4, 3, 3}, rng), true);
  auto loss = [&] { return mean(square(nl(x))); };
  std::vector<Var> inputs = {x};
  for (auto& p : ps.params()) inputs.push_back(p);
  CHECK(max_grad_rel_err(loss, inputs, rng, 6) < 1e-4);
}

TEST_CASE("separable filter and avg pool gradients") {
  Rng rng(31);
  Var x(random_tensor({1, 2, 9, 9}, rng), true);
  const std::vector<double> k = {0.25, 0.5, 0.25};
  auto loss = [&] { return mean(square(separable_filter2d_valid(x, k))); };
  CHECK(max_grad_rel_err(loss, {x}, rng, 12) < 1e-4);
  auto loss2 = [&] { return mean(square(avg_pool2x2(x))); };
  CHECK(max_grad_rel_err(loss2, {x}, rng, 12) < 1e-4);
  CHECK(avg_pool2x2(x).shape() == std::vector<int>{1, 2, 5, 5});
}

TEST_CASE("convlstm cell: bounds, zero weights, gradients") {
  Rng rng(37);
  ParamStore ps;
  ConvLstmCell cell(ps, "lstm", 3, 4, rng);
  Var f(random_tensor({1, 3, 4, 4}, rng, -5.0, 5.0), true);
  Var h0(Tensor({1, 4, 4, 4}), false);
  Var c0(Tensor({1, 4, 4, 4}), false);
  auto [h1, c1] = cell.step(f, h0, c0);
  CHECK(h1.shape() == std::vector<int>{1, 4, 4, 4});
  for (int64_t i = 0; i < h1.numel(); ++i) CHECK(std::fabs(h1.val()[i]) < 1.0);

  auto loss = [&] {
    auto [ha, ca] = cell.step(f, h0, c0);
    auto [hb, cb] = cell.step(f, ha, ca);  // unrolled twice: BPTT path
    return mean(square(hb));
  };
  std::vector<Var> inputs = {f};
  for (auto& p : ps.params()) inputs.push_back(p);
  CHECK(max_grad_rel_err(loss, inputs, rng, 6) < 1e-4);

  // all-zero weights and biases collapse the state to zero
  for (auto& p : ps.params()) p.val().fill(0.0);
  auto [hz, cz] = cell.step(f, h0, c0);
  for (int64_t i = 0; i < hz.numel(); ++i) CHECK(hz.val()[i] == 0.0);
  for (int64_t i = 0; i < cz.numel(); ++i) CHECK(cz.val()[i] == 0.0);
}

// ---------------- entropy coder ----------------

TEST_CASE("build_cdf: erf oracle, floor rule, symmetry") {
  // sigma at the floor: everything concentrates on 0, the rest keeps mass 1
  CdfTable tight = build_cdf(0.0, 0.01, -2, 2);
  CHECK(tight.mass(0) == kCdfTotal - 4);
  for (int v : {-2, -1, 1, 2}) CHECK(tight.mass(v) == 1);

  CdfTable unit = build_cdf(0.0, 1.0, -8, 8);
  const double p0 = std::erf(0.5 / std::sqrt(2.0));
  // the center symbol absorbs the per-symbol floors of the ~7 tail symbols
  // plus its own rounding error, so the bound is 9/65536
  CHECK(std::fabs(unit.mass(0) / 65536.0 - p0) <= 9.0 / 65536.0);
  for (int v = 1; v <= 8; ++v) {
    const int64_t d = static_cast<int64_t>(unit.mass(v)) - unit.mass(-v);
    CHECK(std::abs(d) <= 1);
  }
  CHECK(unit.cumulative.front() == 0);
  CHECK(unit.cumulative.back() == kCdfTotal);
  for (size_t i = 1; i < unit.cumulative.size(); ++i)
    CHECK(unit.cumulative[i] > unit.cumulative[i - 1]);

  CHECK_THROWS_AS(build_cdf(0.0, 1.0, 3, 2), BadInputError);
}

TEST_CASE("range coder: uniform alphabet lands at the entropy") {
  CdfTable uni;
  uni.v_min = 0;
  uni.v_max = 255;
  uni.cumulative.resize(257);
  for (int i = 0; i <= 256; ++i) uni.cumulative[i] = static_cast<uint32_t>(i * 256);
  Rng rng(41);
  const int n = 100000;
  std::vector<int> sym(n);
  RangeEncoder enc;
  for (int i = 0; i < n; ++i) {
    sym[i] = static_cast<int>(rng.uniform_int(0, 255));
    enc.encode_symbol(uni, sym[i]);
  }
  const auto bytes = enc.finish();
  CHECK(bytes.size() >= 100000);
  CHECK(bytes.size() <= 100100);  // +0.1%
  RangeDecoder dec(bytes);
  for (int i = 0; i < n; ++i) CHECK(dec.decode_symbol(uni) == sym[i]);
}

TEST_CASE("range coder: zero-entropy stream stays under 32 bytes") {
  CdfTable one;
  one.v_min = 7;
  one.v_max = 7;
  one.cumulative = {0, kCdfTotal};
  RangeEncoder enc;
  for (int i = 0; i < 10000; ++i) enc.encode_symbol(one, 7);
  const auto bytes = enc.finish();
  CHECK(bytes.size() <= 32);
  RangeDecoder dec(bytes);
  for (int i = 0; i < 10000; ++i) CHECK(dec.decode_symbol(one) == 7);
}

TEST_CASE("range coder: randomized gaussian round trips incl. sigma floor") {
  Rng rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const int span = static_cast<int>(rng.uniform_int(0, 40));
    const int v_min = static_cast<int>(rng.uniform_int(-256, 255 - span));
    const int v_max = v_min + span;
    const int n = static_cast<int>(rng.uniform_int(1, 200));
    std::vector<CdfTable> cdfs(n);
    std::vector<int> sym(n);
    RangeEncoder enc;
    for (int i = 0; i < n; ++i) {
      const double mu = rng.uniform(v_min - 2.0, v_max + 2.0);
      const double sigma = trial % 3 == 0 ? 0.01 : rng.uniform(0.01, 30.0);
      cdfs[i] = build_cdf(mu, sigma, v_min, v_max);
      sym[i] = static_cast<int>(rng.uniform_int(v_min, v_max));
      enc.encode_symbol(cdfs[i], sym[i]);
    }
    const auto bytes = enc.finish();
    RangeDecoder dec(bytes);
    for (int i = 0; i < n; ++i) REQUIRE(dec.decode_symbol(cdfs[i]) == sym[i]);
  }
}

TEST_CASE("coded length stays within cross-entropy + 32 bytes + 0.1%") {
  Rng rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 20000;
    RangeEncoder enc;
    double ce_bits = 0.0;
    for (int i = 0; i < n; ++i) {
      const double mu = rng.uniform(-4.0, 4.0);
      const double sigma = rng.uniform(0.01, 8.0);
      const CdfTable cdf = build_cdf(mu, sigma, -64, 63);
      const int v = std::clamp(static_cast<int>(std::lround(mu + sigma * rng.gaussian())), -64, 63);
      enc.encode_symbol(cdf, v);
      ce_bits -= std::log2(cdf.mass(v) / 65536.0);
    }
    const auto bytes = enc.finish();
    CHECK(static_cast<double>(bytes.size()) <= ce_bits / 8.0 * 1.001 + 32.0);
  }
}

TEST_CASE("estimate_rate examples") {
  CHECK(estimate_rate_bits({0.5}, 0.0) == doctest::Approx(1.0));
  CHECK(estimate_rate_bits({0.25, 0.25, 0.25, 0.25}, 96.0) == doctest::Approx(8.0 + 96.0));
  // floor applies
  CHECK(estimate_rate_bits({1e-30}, 0.0) == doctest::Approx(-std::log2(1e-9)));
}

// ---------------- bitstream ----------------

TEST_CASE("header: 12 bytes, round trip, rejects") {
  BitstreamHeader h;
  h.orig_w = 1920;
  h.orig_h = 1080;
  h.frame_count = 100;
  h.gop_len = 10;
  h.model_id = 3;
  const auto bytes = serialize_header(h);
  CHECK(bytes.size() == 12);
  CHECK(parse_header(bytes.data(), bytes.size()) == h);

  Rng rng(53);
  for (int i = 0; i < 1000; ++i) {
    BitstreamHeader r;
    r.orig_w = static_cast<uint16_t>(rng.uniform_int(1, 65535));
    r.orig_h = static_cast<uint16_t>(rng.uniform_int(1, 65535));
    r.frame_count = static_cast<uint16_t>(rng.uniform_int(1, 65535));
    r.gop_len = static_cast<uint8_t>(rng.uniform_int(1, 255));
    r.model_id = static_cast<uint8_t>(rng.uniform_int(0, 255));
    const auto b = serialize_header(r);
    CHECK(parse_header(b.data(), b.size()) == r);
  }

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_header(bad.data(), bad.size()), CorruptStreamError);
  auto badver = bytes;
  badver[3] = '9';
  CHECK_THROWS_AS(parse_header(badver.data(), badver.size()), CorruptStreamError);
}

TEST_CASE("segments: round trip and truncation errors") {
  Rng rng(59);
  Bitstream bs;
  bs.header.orig_w = 64;
  bs.header.orig_h = 64;
  bs.header.frame_count = 3;
  bs.header.gop_len = 2;
  for (int f = 0; f < 3; ++f) {
    FrameSegment seg;
    seg.frame_type = f % 2 == 0 ? kFrameTypeIntra : kFrameTypeInter;
    const int ntens = seg.frame_type == kFrameTypeIntra ? 2 : 4;
    for (int t = 0; t < ntens; ++t) {
      CodedTensor ct;
      ct.v_min = static_cast<int16_t>(rng.uniform_int(-300, 0));
      ct.v_max = static_cast<int16_t>(rng.uniform_int(0, 300));
      ct.payload.resize(static_cast<size_t>(rng.uniform_int(0, 64)));
      for (auto& b : ct.payload) b = static_cast<uint8_t>(rng.uniform_int(0, 255));
      seg.tensors.push_back(ct);
    }
    bs.segments.push_back(seg);
  }
  const auto bytes = bs.serialize();
  const Bitstream back = Bitstream::parse(bytes);
  CHECK(back.header == bs.header);
  REQUIRE(back.segments.size() == 3);
  for (int f = 0; f < 3; ++f) {
    CHECK(back.segments[f].frame_type == bs.segments[f].frame_type);
    REQUIRE(back.segments[f].tensors.size() == bs.segments[f].tensors.size());
    for (size_t t = 0; t < back.segments[f].tensors.size(); ++t) {
      CHECK(back.segments[f].tensors[t].v_min == bs.segments[f].tensors[t].v_min);
      CHECK(back.segments[f].tensors[t].v_max == bs.segments[f].tensors[t].v_max);
      CHECK(back.segments[f].tensors[t].payload == bs.segments[f].tensors[t].payload);
    }
  }
  CHECK(bytes.size() == bs.total_bytes());

  for (size_t cut : {bytes.size() - 1, bytes.size() - 7, static_cast<size_t>(14)}) {
    std::vector<uint8_t> trunc(bytes.begin(), bytes.begin() + cut);
    CHECK_THROWS_AS(Bitstream::parse(trunc), CorruptStreamError);
  }
}

TEST_CASE("adam converges on a quadratic") {
  Rng rng(61);
  Var w(random_tensor({8}, rng, -2.0, 2.0), true);
  Adam opt({w}, 0.05);
  for (int i = 0; i < 400; ++i) {
    opt.zero_grad();
    Var loss = mean(square(add_scalar(w, -3.0)));
    backward(loss);
    opt.step();
  }
  for (int64_t i = 0; i < w.numel(); ++i) CHECK(w.val()[i] == doctest::Approx(3.0).epsilon(1e-3));
}
