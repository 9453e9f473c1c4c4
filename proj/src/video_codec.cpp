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

#include "lvc/video_codec.hpp"

#include <algorithm>
#include <cmath>

#include "lvc/latent_coding.hpp"
#include "lvc/metrics.hpp"
#include "lvc/quantize.hpp"

namespace lvc {

namespace {

nlohmann::json intra_cfg_json(const IntraCodecConfig& c) {
  return {{"n_ch", c.n_ch},
          {"m_ch", c.m_ch},
          {"hyper_ch", c.hyper_ch},
          {"ctx_features", c.ctx_features},
          {"fusion_hidden", c.fusion_hidden},
          {"nlam", c.nlam},
          {"residual_role", c.residual_role},
          {"sigma_min", c.sigma_min}};
}

IntraCodecConfig intra_cfg_from(const nlohmann::json& j) {
  IntraCodecConfig c;
  c.n_ch = j.at("n_ch");
  c.m_ch = j.at("m_ch");
  c.hyper_ch = j.at("hyper_ch");
  c.ctx_features = j.at("ctx_features");
  c.fusion_hidden = j.at("fusion_hidden").get<std::vector<int>>();
  c.nlam = j.at("nlam");
  c.residual_role = j.at("residual_role");
  c.sigma_min = j.at("sigma_min");
  return c;
}

Tensor clamp01(const Tensor& t) {
  Tensor out = t;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
  return out;
}

Frame crop_to(const Tensor& padded, int h, int w) {
  Frame f;
  f.pixels = padded;
  f.orig_h = h;
  f.orig_w = w;
  Frame out;
  out.orig_h = h;
  out.orig_w = w;
  out.pixels = Tensor({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.pixels.at(c, y, x) = padded.at(c, y, x);
  return out;
}

}  // namespace

nlohmann::json codec_config_to_json(const CodecConfig& cfg) {
  return {{"intra", intra_cfg_json(cfg.intra)},
          {"residual", intra_cfg_json(cfg.residual)},
          {"flow",
           {{"width", cfg.flow.width}, {"feature_ch", cfg.flow.feature_ch}, {"nlam", cfg.flow.nlam}}},
          {"tentropy",
           {{"flow_ch", cfg.tentropy.flow_ch},
            {"hyper_ch", cfg.tentropy.hyper_ch},
            {"ctx_features", cfg.tentropy.ctx_features},
            {"fusion_hidden", cfg.tentropy.fusion_hidden},
            {"lstm_hidden", cfg.tentropy.lstm_hidden},
            {"nlam", cfg.tentropy.nlam},
            {"sigma_min", cfg.tentropy.sigma_min}}},
          {"temporal_prior", cfg.temporal_prior}};
}

CodecConfig codec_config_from_json(const nlohmann::json& j) {
  CodecConfig cfg;
  cfg.intra = intra_cfg_from(j.at("intra"));
  cfg.residual = intra_cfg_from(j.at("residual"));
  cfg.flow.width = j.at("flow").at("width");
  cfg.flow.feature_ch = j.at("flow").at("feature_ch");
  cfg.flow.nlam = j.at("flow").at("nlam");
  const auto& t = j.at("tentropy");
  cfg.tentropy.flow_ch = t.at("flow_ch");
  cfg.tentropy.hyper_ch = t.at("hyper_ch");
  cfg.tentropy.ctx_features = t.at("ctx_features");
  cfg.tentropy.fusion_hidden = t.at("fusion_hidden").get<std::vector<int>>();
  cfg.tentropy.lstm_hidden = t.at("lstm_hidden");
  cfg.tentropy.nlam = t.at("nlam");
  cfg.tentropy.sigma_min = t.at("sigma_min");
  cfg.temporal_prior = j.at("temporal_prior");
  return cfg;
}

uint8_t codec_model_id(const CodecConfig& cfg) {
  const std::string s = codec_config_to_json(cfg).dump();
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<uint8_t>(h & 0xFF);
}

namespace {
// structural config with the eval-time ablation switch normalized away
std::string structural_dump(const CodecConfig& cfg) {
  nlohmann::json j = codec_config_to_json(cfg);
  j["temporal_prior"] = true;
  return j.dump();
}
}  // namespace

CodecConfig toy_codec_config() {
  CodecConfig cfg;
  cfg.intra.n_ch = 24;
  cfg.intra.m_ch = 32;
  cfg.intra.hyper_ch = 24;
  cfg.intra.ctx_features = 10;
  cfg.intra.fusion_hidden = {20, 10};
  cfg.residual = cfg.intra;
  cfg.residual.residual_role = true;
  cfg.flow.width = 24;
  cfg.tentropy.ctx_features = 10;
  cfg.tentropy.fusion_hidden = {20, 10};
  return cfg;
}

VideoCodec::VideoCodec(CodecConfig cfg, uint64_t seed) : cfg_(cfg) {
  if (!cfg_.residual.residual_role)
    throw BadInputError("codec config: residual block must have residual_role");
  if (cfg_.flow.feature_ch != cfg_.tentropy.flow_ch)
    throw BadInputError("codec config: flow feature channels disagree with the entropy model");
  intra_ = std::make_unique<IntraCodec>(cfg_.intra, "intra", seed + 1);
  residual_ = std::make_unique<IntraCodec>(cfg_.residual, "residual", seed + 2);
  flow_ = std::make_unique<FlowCodec>(cfg_.flow, "flow", seed + 3);
  tentropy_ = std::make_unique<TemporalEntropyModel>(cfg_.tentropy, "tprior", seed + 4);
}

uint8_t VideoCodec::model_id() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::string cfg = codec_config_to_json(cfg_).dump();
  mix(cfg.data(), cfg.size());
  for (const auto* ps : {&intra_->params(), &residual_->params(), &flow_->params(),
                         &tentropy_->params()})
    for (const auto& [name, v] : ps->items()) {
      mix(name.data(), name.size());
      mix(v.val().data(), static_cast<size_t>(v.val().numel()) * sizeof(double));
    }
  return static_cast<uint8_t>(h & 0xFF);
}

std::vector<Var> VideoCodec::all_params() const {
  std::vector<Var> out;
  for (const auto* ps : {&intra_->params(), &residual_->params(), &flow_->params(),
                         &tentropy_->params()}) {
    auto p = ps->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Checkpoint VideoCodec::to_checkpoint() const {
  Checkpoint ck;
  ck.config["codec"] = codec_config_to_json(cfg_);
  ck.config["model_id"] = model_id();
  for (const auto* ps : {&intra_->params(), &residual_->params(), &flow_->params(),
                         &tentropy_->params()})
    for (const auto& [name, t] : ps->dump()) ck.tensors[name] = t;
  return ck;
}

void VideoCodec::load_checkpoint(const Checkpoint& ck) {
  const CodecConfig stored = codec_config_from_json(ck.config.at("codec"));
  // the temporal-prior switch may be toggled at eval time; everything else
  // is structural
  if (structural_dump(stored) != structural_dump(cfg_))
    throw ConfigMismatchError("checkpoint built with a different model configuration");
  intra_->params().load(ck.tensors, "intra");
  residual_->params().load(ck.tensors, "residual");
  flow_->params().load(ck.tensors, "flow");
  tentropy_->params().load(ck.tensors, "tprior");
}

SequenceResult VideoCodec::encode_sequence(const std::vector<Frame>& frames, int gop_len) const {
  if (frames.empty()) throw BadInputError("encode: no frames");
  if (gop_len < 1 || gop_len > 255) throw BadInputError("encode: gop length must be in [1,255]");
  if (frames.size() > 65535) throw BadInputError("encode: too many frames for the header");
  const int oh = frames[0].height(), ow = frames[0].width();
  for (const auto& f : frames)
    if (f.height() != oh || f.width() != ow)
      throw DimensionError("encode: frame dimensions drift mid-sequence");

  const int n = static_cast<int>(frames.size());
  SequenceResult res;
  res.stream.header.orig_w = static_cast<uint16_t>(ow);
  res.stream.header.orig_h = static_cast<uint16_t>(oh);
  res.stream.header.frame_count = static_cast<uint16_t>(n);
  res.stream.header.gop_len = static_cast<uint8_t>(gop_len);
  res.stream.header.model_id = model_id();

  const int fc = cfg_.flow.feature_ch;
  Tensor ref;  // previous padded reconstruction
  TemporalState state;
  const ContextEval flow_ctx = tentropy_->context_eval();
  const StaticPrior flow_zp = tentropy_->z_prior();

  for (int t = 0; t < n; ++t) {
    const Frame padded = pad_frame(frames[t]);
    const int H = padded.height(), W = padded.width();
    FrameSegment seg;
    FrameStats st;
    Tensor recon;

    if (t % gop_len == 0) {
      const FrameCodeResult r = intra_->code_frame(padded.pixels);
      seg.frame_type = kFrameTypeIntra;
      seg.tensors = {r.hyper, r.latent};
      st.frame_type = kFrameTypeIntra;
      st.intra_bits = r.coded_bits();
      res.estimate_bits += r.latent_bits_estimate + r.hyper_bits_estimate;
      recon = r.recon;
      state = TemporalState::zeros(fc, H / 16, W / 16);
    } else {
      // motion: fused features from (previous recon, current source)
      const Tensor f_cont = flow_->encode_eval(ref, padded.pixels);
      const Tensor f_q = quantize_round(f_cont);
      const Tensor z_q = quantize_round(tentropy_->hyper_analysis_eval(f_cont));
      const CodedTensor z_coded = encode_static(z_q, flow_zp);
      const Tensor hyper_vol = tentropy_->hyper_synthesis_eval(z_q);
      const Tensor h_prev = cfg_.temporal_prior ? state.h : Tensor(state.h.shape());
      const CodedTensor f_coded = encode_context(f_q, hyper_vol, &h_prev, flow_ctx);
      st.flow_feature_bits_estimate = estimate_bits_context(f_q, hyper_vol, &h_prev, flow_ctx);
      res.estimate_bits += estimate_bits_static(z_q, flow_zp) + st.flow_feature_bits_estimate;
      if (cfg_.temporal_prior) state = tentropy_->update_state_eval(f_q, state);

      const Tensor flow_field = flow_->decode_eval(f_q);
      const Tensor pred = warp_eval(ref, flow_field);

      Tensor resid(pred.shape());
      for (int64_t i = 0; i < resid.numel(); ++i) resid[i] = padded.pixels[i] - pred[i];
      const FrameCodeResult rr = residual_->code_frame(resid);
      res.estimate_bits += rr.latent_bits_estimate + rr.hyper_bits_estimate;

      Tensor sum(pred.shape());
      for (int64_t i = 0; i < sum.numel(); ++i) sum[i] = pred[i] + rr.recon[i];
      recon = clamp01(sum);

      seg.frame_type = kFrameTypeInter;
      seg.tensors = {z_coded, f_coded, rr.hyper, rr.latent};
      st.frame_type = kFrameTypeInter;
      st.flow_bits = 8.0 * static_cast<double>(z_coded.payload.size() + f_coded.payload.size());
      st.residual_bits = rr.coded_bits();
      st.warp_msssim = msssim(crop_to(pred, oh, ow).pixels, frames[t].pixels);
    }

    st.total_bits = 8.0 * static_cast<double>(seg.total_bytes());
    if (t == 0) st.total_bits += 8.0 * kHeaderBytes;  // header accounted on frame 0
    const Frame out = crop_to(recon, oh, ow);
    st.msssim = msssim(out.pixels, frames[t].pixels);
    res.recons.push_back(out);
    res.stats.push_back(st);
    res.stream.segments.push_back(std::move(seg));
    ref = recon;
  }

  res.bpp = 8.0 * static_cast<double>(res.stream.total_bytes()) /
            (static_cast<double>(oh) * ow * n);
  return res;
}

std::vector<Frame> VideoCodec::decode_sequence(const Bitstream& bs) const {
  if (bs.header.model_id != model_id())
    throw ConfigMismatchError("bitstream model id does not match the loaded checkpoint");
  const int oh = bs.header.orig_h, ow = bs.header.orig_w;
  const int gop = bs.header.gop_len;
  if (oh < 1 || ow < 1 || gop < 1) throw CorruptStreamError("decode: degenerate header");
  const int H = (oh + 63) / 64 * 64, W = (ow + 63) / 64 * 64;
  const int lh = H / 16, lw = W / 16;
  const int zh = lh / 4, zw = lw / 4;
  const int fc = cfg_.flow.feature_ch;

  std::vector<Frame> out;
  Tensor ref;
  TemporalState state;
  const ContextEval flow_ctx = tentropy_->context_eval();
  const StaticPrior flow_zp = tentropy_->z_prior();

  for (int t = 0; t < bs.header.frame_count; ++t) {
    const FrameSegment& seg = bs.segments[t];
    const bool expect_intra = t % gop == 0;
    if ((seg.frame_type == kFrameTypeIntra) != expect_intra)
      throw CorruptStreamError("decode: frame type disagrees with the GOP structure");
    Tensor recon;
    if (seg.frame_type == kFrameTypeIntra) {
      if (seg.tensors.size() != 2) throw CorruptStreamError("decode: intra segment needs 2 tensors");
      recon = intra_->decode_frame(seg.tensors[0], seg.tensors[1], H, W);
      state = TemporalState::zeros(fc, lh, lw);
    } else {
      if (seg.tensors.size() != 4) throw CorruptStreamError("decode: inter segment needs 4 tensors");
      const Tensor z_q = decode_static(seg.tensors[0], cfg_.tentropy.hyper_ch, zh, zw, flow_zp);
      const Tensor hyper_vol = tentropy_->hyper_synthesis_eval(z_q);
      const Tensor h_prev = cfg_.temporal_prior ? state.h : Tensor(state.h.shape());
      const Tensor f_q = decode_context(seg.tensors[1], fc, lh, lw, hyper_vol, &h_prev, flow_ctx);
      if (cfg_.temporal_prior) state = tentropy_->update_state_eval(f_q, state);

      const Tensor flow_field = flow_->decode_eval(f_q);
      const Tensor pred = warp_eval(ref, flow_field);
      const Tensor resid = residual_->decode_frame(seg.tensors[2], seg.tensors[3], H, W);
      Tensor sum(pred.shape());
      for (int64_t i = 0; i < sum.numel(); ++i) sum[i] = pred[i] + resid[i];
      recon = clamp01(sum);
    }
    out.push_back(crop_to(recon, oh, ow));
    ref = recon;
  }
  return out;
}

}  // namespace lvc
