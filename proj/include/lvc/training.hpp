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

#ifndef LVC_TRAINING_HPP_
#define LVC_TRAINING_HPP_

#include <string>
#include <vector>

#include "json.hpp"
#include "lvc/frame.hpp"
#include "lvc/video_codec.hpp"

namespace lvc {

// Staged schedule: `intra` pretrains the image coder, `flow` pretrains flow
// learning+coding on uncompressed pairs with the warp loss, `joint`
// fine-tunes everything over an n-frame recurrent rollout where the decoded
// previous reconstruction replaces the clean reference.
struct TrainConfig {
  std::string stage = "intra";  // intra | flow | joint
  double lambda1 = 8.0;
  double lambda2 = -1.0;  // < 0: use the fixed 1.0*lambda1 coupling
  int n_unroll = 5;
  int batch = 4;  // crops per intra step; flow/joint use one clip per step
  int crop = 64;
  int steps = 600;
  int steps_per_epoch = 100;
  double lr_init = 1e-4;
  double lr_final = 1e-5;
  double clip_norm = 5.0;
  double tv_weight = 0.1;
  uint64_t seed = 1;
  std::string rate_point = "rp0";
  std::string data_dir;
  std::string out_checkpoint;
  std::string init_checkpoint;  // required for the joint stage

  double lambda2_effective() const { return lambda2 < 0.0 ? lambda1 : lambda2; }
  double lr_at_epoch(int epoch) const;
  void validate() const;
};

// human-readable key=value config files; '#' starts a comment
TrainConfig parse_train_config(const std::string& path);

struct ClipDataset {
  std::vector<std::vector<Frame>> sequences;
  // each subdirectory of root with .ppm files is one sequence; a root that
  // itself holds .ppm files is a single sequence
  static ClipDataset from_dir(const std::string& root);
};

// D2 of Eq-style training: mean L1(pred, target) + tv_weight * TV(flow),
// TV = mean absolute forward difference over both axes and both channels.
Var warp_loss(const Var& pred, const Var& target, const Var& flow, double tv_weight = 0.1);
Var total_variation(const Var& flow);

// one full rate-distortion rollout (frame 1 intra, rest inter); exposes the
// loss decomposition for tests and logging
struct RdParts {
  Var total;
  double d1_mean = 0.0;
  double d2_mean = 0.0;
  double intra_bpp = 0.0;      // R_s
  double inter_bpp_mean = 0.0; // mean R_t
  double overhead_bpp = 0.0;   // segment framing + amortized header (constant)
};
RdParts rd_loss_rollout(VideoCodec& codec, const std::vector<const Frame*>& clip,
                        const TrainConfig& cfg, Rng& rng);

struct TrainResult {
  std::vector<double> losses;            // per step
  std::vector<std::string> dead_params;  // all-zero gradient at the stage start
  nlohmann::json provenance;             // stage history for the checkpoint config
};

// Runs one stage in place on `codec`. `prev_provenance` carries the stage
// history of the initializing checkpoint (empty json for a fresh model).
TrainResult train_stage(const TrainConfig& cfg, VideoCodec& codec, const ClipDataset& data,
                        const nlohmann::json& prev_provenance);

}  // namespace lvc

#endif  // LVC_TRAINING_HPP_
