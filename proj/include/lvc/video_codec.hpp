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

#ifndef LVC_VIDEO_CODEC_HPP_
#define LVC_VIDEO_CODEC_HPP_

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvc/bitstream.hpp"
#include "lvc/checkpoint.hpp"
#include "lvc/flow_codec.hpp"
#include "lvc/frame.hpp"
#include "lvc/intra_codec.hpp"
#include "lvc/temporal_entropy.hpp"

namespace lvc {

// Full model family: intra coder, residual coder (same architecture, own
// weights), flow codec, and the temporal entropy model for the flow
// features.
struct CodecConfig {
  IntraCodecConfig intra;
  IntraCodecConfig residual;
  FlowCodecConfig flow;
  TemporalEntropyConfig tentropy;
  bool temporal_prior = true;  // h_prev forced to zero when false

  CodecConfig() { residual.residual_role = true; }
};

nlohmann::json codec_config_to_json(const CodecConfig& cfg);
CodecConfig codec_config_from_json(const nlohmann::json& j);
// structural hash; bitstreams carry it and decode refuses a mismatch
uint8_t codec_model_id(const CodecConfig& cfg);
// convenience: a small configuration for desk-scale experiments
CodecConfig toy_codec_config();

struct FrameStats {
  uint8_t frame_type = kFrameTypeIntra;
  double intra_bits = 0.0;     // payload bits
  double flow_bits = 0.0;      // flow hyper + features payload bits
  double residual_bits = 0.0;  // residual hyper + latent payload bits
  double total_bits = 0.0;     // incl. framing; frame 0 also carries the header
  double msssim = 0.0;
  double warp_msssim = 0.0;  // prediction quality before residual (inter only)
  // continuous-likelihood codelength of the flow features alone (no hyper),
  // the quantity the temporal-prior ablation compares
  double flow_feature_bits_estimate = 0.0;
};

struct SequenceResult {
  Bitstream stream;
  std::vector<Frame> recons;  // cropped to original dims
  std::vector<FrameStats> stats;
  double bpp = 0.0;
  double estimate_bits = 0.0;  // continuous-likelihood rate estimate (payloads)
};

class VideoCodec {
 public:
  VideoCodec(CodecConfig cfg, uint64_t seed);

  const CodecConfig& config() const { return cfg_; }
  // config hash mixed with a checksum of the weights: a stream decodes only
  // against the checkpoint that produced it (and the same ablation switches)
  uint8_t model_id() const;

  IntraCodec& intra() { return *intra_; }
  IntraCodec& residual() { return *residual_; }
  FlowCodec& flow() { return *flow_; }
  TemporalEntropyModel& tentropy() { return *tentropy_; }
  const IntraCodec& intra() const { return *intra_; }
  const IntraCodec& residual() const { return *residual_; }
  const FlowCodec& flow() const { return *flow_; }
  const TemporalEntropyModel& tentropy() const { return *tentropy_; }

  std::vector<Var> all_params() const;

  Checkpoint to_checkpoint() const;
  void load_checkpoint(const Checkpoint& ck);  // validates structural config

  // GOP pipeline: frame 1 of each GOP intra, the rest flow + residual, with
  // the ConvLSTM temporal state reset at every GOP start.
  SequenceResult encode_sequence(const std::vector<Frame>& frames, int gop_len) const;
  std::vector<Frame> decode_sequence(const Bitstream& bs) const;

 private:
  CodecConfig cfg_;
  std::unique_ptr<IntraCodec> intra_;
  std::unique_ptr<IntraCodec> residual_;
  std::unique_ptr<FlowCodec> flow_;
  std::unique_ptr<TemporalEntropyModel> tentropy_;
};

}  // namespace lvc

#endif  // LVC_VIDEO_CODEC_HPP_
