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

#include "lvc/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lvc/bitstream.hpp"
#include "lvc/metrics.hpp"
#include "lvc/quantize.hpp"

namespace lvc {

double TrainConfig::lr_at_epoch(int epoch) const {
  const double lr = lr_init * std::pow(0.5, static_cast<double>(epoch / 10));
  return std::max(lr, lr_final);
}

void TrainConfig::validate() const {
  if (stage != "intra" && stage != "flow" && stage != "joint")
    throw BadInputError("train: stage must be intra|flow|joint");
  if ((stage == "intra" || stage == "joint") && lambda1 <= 0.0)
    throw BadInputError("train: lambda1 must be positive for stage " + stage);
  if ((stage == "flow" || stage == "joint") && lambda2_effective() <= 0.0)
    throw BadInputError("train: lambda2 must be positive for stage " + stage);
  if (stage == "joint" && n_unroll < 2)
    throw BadInputError("train: joint stage needs n_unroll >= 2");
  if (crop % 64 != 0) throw BadInputError("train: crop must be a multiple of 64");
  if (steps < 1 || batch < 1) throw BadInputError("train: degenerate steps/batch");
}

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BadInputError("cannot open train config: " + path);
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw BadInputError("train config line " + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "stage") cfg.stage = val;
      else if (key == "lambda1") cfg.lambda1 = std::stod(val);
      else if (key == "lambda2") cfg.lambda2 = std::stod(val);
      else if (key == "n_unroll") cfg.n_unroll = std::stoi(val);
      else if (key == "batch") cfg.batch = std::stoi(val);
      else if (key == "crop") cfg.crop = std::stoi(val);
      else if (key == "steps") cfg.steps = std::stoi(val);
      else if (key == "steps_per_epoch") cfg.steps_per_epoch = std::stoi(val);
      else if (key == "lr_init") cfg.lr_init = std::stod(val);
      else if (key == "lr_final") cfg.lr_final = std::stod(val);
      else if (key == "clip_norm") cfg.clip_norm = std::stod(val);
      else if (key == "tv_weight") cfg.tv_weight = std::stod(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "rate_point") cfg.rate_point = val;
      else if (key == "data_dir") cfg.data_dir = val;
      else if (key == "out") cfg.out_checkpoint = val;
      else if (key == "init") cfg.init_checkpoint = val;
      else throw BadInputError("train config: unknown key " + key);
    } catch (const std::invalid_argument&) {
      throw BadInputError("train config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  return cfg;
}

ClipDataset ClipDataset::from_dir(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw BadInputError("dataset: not a directory: " + root);
  ClipDataset ds;
  std::vector<std::string> subdirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) subdirs.push_back(e.path().string());
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) subdirs.push_back(root);
  for (const auto& d : subdirs) {
    std::vector<Frame> seq;
    for (const auto& f : list_frame_files(d)) seq.push_back(load_ppm(f));
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

Var total_variation(const Var& flow) {
  const auto& s = flow.shape();
  Var dx = sub(slice_hw(flow, 0, s[2], 1, s[3]), slice_hw(flow, 0, s[2], 0, s[3] - 1));
  Var dy = sub(slice_hw(flow, 1, s[2], 0, s[3]), slice_hw(flow, 0, s[2] - 1, 0, s[3]));
  const double n_dx = static_cast<double>(dx.numel());
  const double n_dy = static_cast<double>(dy.numel());
  Var total = add(sum(abs_op(dx)), sum(abs_op(dy)));
  return mul_scalar(total, 1.0 / (n_dx + n_dy));
}

Var warp_loss(const Var& pred, const Var& target, const Var& flow, double tv_weight) {
  if (!(pred.shape() == target.shape()))
    throw DimensionError("warp_loss: pred/target shape mismatch");
  Var l1 = mean(abs_op(sub(pred, target)));
  return add(l1, mul_scalar(total_variation(flow), tv_weight));
}

namespace {

// crops one [3,H,W] frame into a [1,3,c,c] constant Var
Var crop_var(const Frame& f, int y0, int x0, int c) {
  Tensor t({1, 3, c, c});
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < c; ++y)
      for (int x = 0; x < c; ++x) t.at(0, ch, y, x) = f.pixels.at(ch, y0 + y, x0 + x);
  return Var(std::move(t));
}

struct BitsAccum {
  Var bits;  // scalar sum
  void add_term(const Var& b) { bits = bits.defined() ? add(bits, sum(b)) : sum(b); }
};

// noisy-quantized intra/residual pass; returns (recon, bits) for one frame
struct IntraPass {
  Var recon;
  Var bits;  // latent + hyper codelength (scalar)
};

IntraPass intra_train_pass(IntraCodec& codec, const Var& x, Rng& rng) {
  const bool residual = codec.config().residual_role;
  Var input = residual ? add_scalar(mul_scalar(x, 0.5), 0.5) : x;
  Var y = codec.analysis(input);
  Var y_t = quantize_noise(y, rng);
  Var z = codec.hyper_analysis(y);
  Var z_t = quantize_noise(z, rng);
  Var hf = codec.hyper_synthesis(z_t);
  GaussianParams gp = codec.context_params(y_t, hf);
  GaussianParams zp = codec.z_prior_params(z.shape());
  BitsAccum acc;
  acc.add_term(gaussian_bits(y_t, gp.mu, gp.sigma));
  acc.add_term(gaussian_bits(z_t, zp.mu, zp.sigma));
  Var out = codec.synthesis(y_t);
  if (residual) out = add_scalar(mul_scalar(out, 2.0), -1.0);
  return {out, acc.bits};
}

// flow coding pass shared by the flow and joint stages: encodes motion
// features for (ref -> target), returns decoded flow, feature bits and the
// updated ConvLSTM state
struct FlowPass {
  Var flow;
  Var bits;
  Var h, c;
};

FlowPass flow_train_pass(VideoCodec& codec, const Var& ref, const Var& target, const Var& h,
                         const Var& c, bool temporal_prior, Rng& rng) {
  Var f = codec.flow().encode(ref, target);
  Var f_t = quantize_noise(f, rng);
  Var z = codec.tentropy().hyper_analysis(f);
  Var z_t = quantize_noise(z, rng);
  Var hf = codec.tentropy().hyper_synthesis(z_t);
  Var h_used = temporal_prior ? h : Var(Tensor(h.shape()));
  GaussianParams gp = codec.tentropy().context_params(f_t, hf, h_used);
  GaussianParams zp = codec.tentropy().z_prior_params(z.shape());
  BitsAccum acc;
  acc.add_term(gaussian_bits(f_t, gp.mu, gp.sigma));
  acc.add_term(gaussian_bits(z_t, zp.mu, zp.sigma));
  auto [hn, cn] = codec.tentropy().temporal_update(f_t, h, c);
  Var flow_field = codec.flow().decode(f_t);
  return {flow_field, acc.bits, hn, cn};
}

double framing_overhead_bpp(int n_unroll, int px) {
  // per-frame tensor framing + segment prefix, header amortized over the clip
  const double intra_overhead = kSegmentPrefixBytes + 2 * kTensorFramingBytes;
  const double inter_overhead = kSegmentPrefixBytes + 4 * kTensorFramingBytes;
  const double total_bytes = kHeaderBytes + intra_overhead +
                             (n_unroll - 1) * inter_overhead;
  return 8.0 * total_bytes / (static_cast<double>(px) * n_unroll);
}

}  // namespace

RdParts rd_loss_rollout(VideoCodec& codec, const std::vector<const Frame*>& clip,
                        const TrainConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(clip.size());
  if (n < 2) throw BadInputError("rd rollout: need at least two frames");
  const int H = (*clip[0]).height(), W = (*clip[0]).width();
  const double px = static_cast<double>(H) * W;
  const double l1 = cfg.lambda1, l2 = cfg.lambda2_effective();

  std::vector<Var> xs;
  for (const Frame* f : clip)
    xs.push_back(Var(f->pixels.reshaped({1, 3, H, W})));

  RdParts parts;
  IntraPass ip = intra_train_pass(codec.intra(), xs[0], rng);
  Var d1_sum = sub(Var(Tensor::scalar(1.0)), msssim_var(ip.recon, xs[0]));
  Var rs_bpp = mul_scalar(ip.bits, 1.0 / px);
  Var rt_bpp_sum;
  Var d2_sum;

  const int fc = codec.config().flow.feature_ch;
  Var h(Tensor({1, fc, H / 16, W / 16}));
  Var c(Tensor({1, fc, H / 16, W / 16}));
  Var ref = ip.recon;

  for (int t = 1; t < n; ++t) {
    FlowPass fp = flow_train_pass(codec, ref, xs[t], h, c, codec.config().temporal_prior, rng);
    h = fp.h;
    c = fp.c;
    Var pred = warp_bilinear(ref, fp.flow);
    Var d2 = warp_loss(pred, xs[t], fp.flow, cfg.tv_weight);
    d2_sum = d2_sum.defined() ? add(d2_sum, d2) : d2;

    Var resid = sub(xs[t], pred);
    IntraPass rp = intra_train_pass(codec.residual(), resid, rng);
    Var xhat = add(pred, rp.recon);
    d1_sum = add(d1_sum, sub(Var(Tensor::scalar(1.0)), msssim_var(xhat, xs[t])));

    Var rt_bpp = mul_scalar(add(fp.bits, rp.bits), 1.0 / px);
    rt_bpp_sum = rt_bpp_sum.defined() ? add(rt_bpp, rt_bpp_sum) : rt_bpp;
    ref = xhat;
  }

  parts.overhead_bpp = framing_overhead_bpp(n, static_cast<int>(px));
  Var total = add(mul_scalar(d1_sum, l1 / n), mul_scalar(d2_sum, l2 / n));
  total = add(total, rs_bpp);
  total = add(total, mul_scalar(rt_bpp_sum, 1.0 / (n - 1)));
  total = add_scalar(total, parts.overhead_bpp);
  parts.total = total;
  parts.d1_mean = d1_sum.val()[0] / n;
  parts.d2_mean = d2_sum.val()[0] / (n - 1);
  parts.intra_bpp = rs_bpp.val()[0];
  parts.inter_bpp_mean = rt_bpp_sum.val()[0] / (n - 1);
  return parts;
}

namespace {

struct Sampler {
  const ClipDataset& data;
  Rng& rng;
  int crop;

  const Frame& frame(int seq, int t) const { return data.sequences[seq][t]; }

  // picks sequence, start index, and crop origin valid for `len` frames
  std::tuple<int, int, int, int> pick_clip(int len) const {
    std::vector<int> ok;
    for (size_t s = 0; s < data.sequences.size(); ++s)
      if (static_cast<int>(data.sequences[s].size()) >= len) ok.push_back(static_cast<int>(s));
    if (ok.empty()) throw BadInputError("dataset: no sequence long enough for the rollout");
    const int seq = ok[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(ok.size()) - 1))];
    const int maxs = static_cast<int>(data.sequences[seq].size()) - len;
    const int start = static_cast<int>(rng.uniform_int(0, maxs));
    const Frame& f = data.sequences[seq][0];
    if (f.height() < crop || f.width() < crop)
      throw BadInputError("dataset: frames smaller than the crop size");
    const int y0 = static_cast<int>(rng.uniform_int(0, f.height() - crop));
    const int x0 = static_cast<int>(rng.uniform_int(0, f.width() - crop));
    return {seq, start, y0, x0};
  }
};

Var intra_batch(const Sampler& s, int batch) {
  Tensor t({batch, 3, s.crop, s.crop});
  for (int b = 0; b < batch; ++b) {
    auto [seq, start, y0, x0] = s.pick_clip(1);
    const Frame& f = s.frame(seq, start);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < s.crop; ++y)
        for (int x = 0; x < s.crop; ++x)
          t.at(b, ch, y, x) = f.pixels.at(ch, y0 + y, x0 + x);
  }
  return Var(std::move(t));
}

std::vector<Var> clip_batch(const Sampler& s, int len) {
  auto [seq, start, y0, x0] = s.pick_clip(len);
  std::vector<Var> out;
  for (int t = 0; t < len; ++t) out.push_back(crop_var(s.frame(seq, start + t), y0, x0, s.crop));
  return out;
}

Var intra_stage_loss(VideoCodec& codec, const Var& x, double lambda1, Rng& rng) {
  IntraPass ip = intra_train_pass(codec.intra(), x, rng);
  Var d1 = sub(Var(Tensor::scalar(1.0)), msssim_var(ip.recon, x));
  const auto& s = x.shape();
  const double px = static_cast<double>(s[0]) * s[2] * s[3];
  return add(mul_scalar(d1, lambda1), mul_scalar(ip.bits, 1.0 / px));
}

Var flow_stage_loss(VideoCodec& codec, const std::vector<Var>& xs, const TrainConfig& cfg,
                    double rate_weight, Rng& rng) {
  const auto& s = xs[0].shape();
  const double px = static_cast<double>(s[2]) * s[3];
  const int n = static_cast<int>(xs.size());
  const int fc = codec.config().flow.feature_ch;
  Var h(Tensor({1, fc, s[2] / 16, s[3] / 16}));
  Var c(Tensor({1, fc, s[2] / 16, s[3] / 16}));
  Var d2_sum, bits_sum;
  for (int t = 1; t < n; ++t) {
    // stage 2 trains on uncompressed consecutive frames
    FlowPass fp = flow_train_pass(codec, xs[t - 1], xs[t], h, c,
                                  codec.config().temporal_prior, rng);
    h = fp.h;
    c = fp.c;
    Var pred = warp_bilinear(xs[t - 1], fp.flow);
    Var d2 = warp_loss(pred, xs[t], fp.flow, cfg.tv_weight);
    d2_sum = d2_sum.defined() ? add(d2_sum, d2) : d2;
    bits_sum = bits_sum.defined() ? add(bits_sum, fp.bits) : fp.bits;
  }
  Var loss = mul_scalar(d2_sum, cfg.lambda2_effective() / (n - 1));
  return add(loss, mul_scalar(bits_sum, rate_weight / ((n - 1) * px)));
}

void warm_start_residual(VideoCodec& codec) {
  // residual coder shares the intra architecture; start it from the intra
  // weights when shapes line up
  auto intra_named = codec.intra().params().dump();
  for (const auto& [name, v] : codec.residual().params().items()) {
    std::string alt = name;
    const auto pos = alt.find("residual.");
    alt.replace(pos, 9, "intra.");
    auto it = intra_named.find(alt);
    Var handle = v;  // Var is a shared handle; the copy writes through
    if (it != intra_named.end() && it->second.shape() == handle.val().shape())
      handle.val() = it->second;
  }
}

}  // namespace

TrainResult train_stage(const TrainConfig& cfg, VideoCodec& codec, const ClipDataset& data,
                        const nlohmann::json& prev_provenance) {
  cfg.validate();
  std::vector<std::string> stages_done;
  if (prev_provenance.contains("stages"))
    stages_done = prev_provenance.at("stages").get<std::vector<std::string>>();
  auto has_stage = [&](const char* s) {
    return std::find(stages_done.begin(), stages_done.end(), s) != stages_done.end();
  };
  if (cfg.stage == "joint" && (!has_stage("intra") || !has_stage("flow")))
    throw BadInputError("joint stage requires a checkpoint with completed intra and flow stages");

  std::vector<std::pair<std::string, Var>> named;
  auto collect = [&](const ParamStore& ps) {
    for (const auto& item : ps.items()) named.push_back(item);
  };
  if (cfg.stage == "intra") {
    collect(codec.intra().params());
  } else if (cfg.stage == "flow") {
    collect(codec.flow().params());
    collect(codec.tentropy().params());
  } else {
    if (!has_stage("joint")) warm_start_residual(codec);
    collect(codec.intra().params());
    collect(codec.residual().params());
    collect(codec.flow().params());
    collect(codec.tentropy().params());
  }
  std::vector<Var> trainable;
  for (const auto& [n, v] : named) trainable.push_back(v);

  Rng rng(cfg.seed);
  Sampler sampler{data, rng, cfg.crop};
  Adam opt(trainable, cfg.lr_at_epoch(0));

  TrainResult res;
  for (int step = 0; step < cfg.steps; ++step) {
    opt.set_lr(cfg.lr_at_epoch(step / cfg.steps_per_epoch));
    opt.zero_grad();
    Var loss;
    if (cfg.stage == "intra") {
      loss = intra_stage_loss(codec, intra_batch(sampler, cfg.batch), cfg.lambda1, rng);
    } else if (cfg.stage == "flow") {
      // rate pressure ramps in over the first half of the stage so motion
      // learning is not squashed before the decoder works
      const double ramp =
          std::min(1.0, 0.05 + static_cast<double>(step) / (0.5 * cfg.steps));
      loss = flow_stage_loss(codec, clip_batch(sampler, cfg.n_unroll), cfg, ramp, rng);
    } else {
      auto [seq, start, y0, x0] = sampler.pick_clip(cfg.n_unroll);
      std::vector<Frame> cropped;
      std::vector<const Frame*> clip;
      cropped.reserve(cfg.n_unroll);
      for (int t = 0; t < cfg.n_unroll; ++t) {
        Frame f;
        f.orig_h = cfg.crop;
        f.orig_w = cfg.crop;
        f.pixels = Tensor({3, cfg.crop, cfg.crop});
        const Frame& src = sampler.frame(seq, start + t);
        for (int ch = 0; ch < 3; ++ch)
          for (int y = 0; y < cfg.crop; ++y)
            for (int x = 0; x < cfg.crop; ++x)
              f.pixels.at(ch, y, x) = src.pixels.at(ch, y0 + y, x0 + x);
        cropped.push_back(std::move(f));
      }
      for (const auto& f : cropped) clip.push_back(&f);
      loss = rd_loss_rollout(codec, clip, cfg, rng).total;
    }
    backward(loss);
    if (step == 0) {
      for (const auto& [name, p] : named) {
        const Tensor& g = p.grad();
        bool all_zero = true;
        for (int64_t i = 0; i < g.numel() && all_zero; ++i) all_zero = g[i] == 0.0;
        if (all_zero) res.dead_params.push_back(name);
      }
    }
    opt.step(cfg.clip_norm);
    res.losses.push_back(loss.val()[0]);
  }

  stages_done.push_back(cfg.stage);
  res.provenance["stages"] = stages_done;
  nlohmann::json stage_cfg = {{"stage", cfg.stage},
                              {"lambda1", cfg.lambda1},
                              {"lambda2", cfg.lambda2_effective()},
                              {"n_unroll", cfg.n_unroll},
                              {"steps", cfg.steps},
                              {"seed", cfg.seed},
                              {"rate_point", cfg.rate_point}};
  if (prev_provenance.contains("history"))
    res.provenance["history"] = prev_provenance.at("history");
  res.provenance["history"].push_back(stage_cfg);
  res.provenance["rate_point"] = cfg.rate_point;
  return res;
}

}  // namespace lvc
