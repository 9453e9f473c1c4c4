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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lvc/metrics.hpp"
#include "lvc/synth.hpp"
#include "lvc/training.hpp"

using namespace lvc;

namespace {

CodecConfig tiny_cfg() {
  CodecConfig cfg;
  cfg.intra.n_ch = 8;
  cfg.intra.m_ch = 6;
  cfg.intra.hyper_ch = 6;
  cfg.intra.ctx_features = 4;
  cfg.intra.fusion_hidden = {8, 6};
  cfg.residual = cfg.intra;
  cfg.residual.residual_role = true;
  cfg.flow.width = 8;
  cfg.flow.feature_ch = 16;
  cfg.tentropy.flow_ch = 16;
  cfg.tentropy.hyper_ch = 8;
  cfg.tentropy.lstm_hidden = 16;
  cfg.tentropy.ctx_features = 4;
  cfg.tentropy.fusion_hidden = {8, 6};
  return cfg;
}

ClipDataset tiny_data() {
  SynthSpec spec;
  spec.kind = "translate";
  spec.frames = 6;
  spec.sequences = 2;
  spec.max_disp = 1.5;
  spec.seed = 11;
  ClipDataset ds;
  for (auto& s : synth_generate(spec)) ds.sequences.push_back(std::move(s.frames));
  return ds;
}

}  // namespace

TEST_CASE("warp_loss: zero at perfect prediction with constant flow") {
  Rng rng(3);
  Tensor img({1, 3, 8, 8});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  Tensor flow({1, 2, 8, 8}, 0.7);  // constant: TV vanishes
  NoGradGuard ng;
  const double v = warp_loss(Var(img), Var(img), Var(flow), 0.1).val()[0];
  CHECK(v == 0.0);
}

TEST_CASE("warp_loss: checkerboard flow isolates the smoothness term") {
  Tensor img({1, 3, 8, 8}, 0.5);
  Tensor flow({1, 2, 8, 8});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) flow.at(0, 0, y, x) = (x + y) % 2 == 0 ? 1.0 : -1.0;
  NoGradGuard ng;
  // u-diffs are 2 everywhere, v-diffs 0: union mean = 1, so D2 = 0.1
  CHECK(total_variation(Var(flow)).val()[0] == doctest::Approx(1.0));
  const double v = warp_loss(Var(img), Var(img), Var(flow), 0.1).val()[0];
  CHECK(v == doctest::Approx(0.1));
  CHECK(v > 0.0);
}

TEST_CASE("warp_loss gradient w.r.t. flow matches finite differences") {
  Rng rng(7);
  Tensor img({1, 3, 7, 7});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  Tensor tgt({1, 3, 7, 7});
  for (int64_t i = 0; i < tgt.numel(); ++i) tgt[i] = rng.uniform();
  Tensor fl({1, 2, 7, 7});
  for (int64_t i = 0; i < fl.numel(); ++i) fl[i] = rng.uniform(-0.4, 0.4) + 0.17;

  Var flow(fl, true);
  Var ref(img), target(tgt);
  auto loss_fn = [&] { return warp_loss(warp_bilinear(ref, flow), target, flow, 0.1); };
  flow.zero_grad();
  Var loss = loss_fn();
  backward(loss);
  const Tensor grad = flow.grad();

  Rng probe_rng(13);
  const double h = 1e-5;
  for (int probe = 0; probe < 50; ++probe) {
    const int64_t i = probe_rng.uniform_int(0, fl.numel() - 1);
    const double keep = flow.val()[i];
    double fp, fm;
    {
      NoGradGuard ng;
      flow.val()[i] = keep + h;
      fp = loss_fn().val()[0];
      flow.val()[i] = keep - h;
      fm = loss_fn().val()[0];
      flow.val()[i] = keep;
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6});
    CHECK(std::fabs(fd - grad[i]) / denom < 1e-4);
  }
}

TEST_CASE("rd_loss decomposition follows the training objective") {
  VideoCodec codec(tiny_cfg(), 5);
  const auto data = tiny_data();
  std::vector<const Frame*> clip;
  for (int t = 0; t < 3; ++t) clip.push_back(&data.sequences[0][t]);

  TrainConfig cfg;
  cfg.stage = "joint";
  cfg.n_unroll = 3;
  Rng rng(17);

  SUBCASE("degenerate weights leave pure rate terms") {
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    RdParts parts = rd_loss_rollout(codec, clip, cfg, rng);
    const double expect = parts.intra_bpp + parts.inter_bpp_mean + parts.overhead_bpp;
    CHECK(parts.total.val()[0] == doctest::Approx(expect).epsilon(1e-9));
  }

  SUBCASE("full decomposition identity") {
    cfg.lambda1 = 8.0;
    cfg.lambda2 = -1.0;  // couple to 0.1*lambda1
    RdParts parts = rd_loss_rollout(codec, clip, cfg, rng);
    const int n = 3;
    const double expect = cfg.lambda1 * parts.d1_mean +
                          cfg.lambda2_effective() * parts.d2_mean * (n - 1) / n +
                          parts.intra_bpp + parts.inter_bpp_mean + parts.overhead_bpp;
    CHECK(parts.total.val()[0] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("train config: validation and schedule") {
  TrainConfig cfg;
  cfg.stage = "intra";
  cfg.lambda1 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), BadInputError);
  cfg.lambda1 = 8.0;
  cfg.validate();
  cfg.stage = "joint";
  cfg.n_unroll = 1;
  CHECK_THROWS_AS(cfg.validate(), BadInputError);
  cfg.n_unroll = 5;
  cfg.validate();
  CHECK(cfg.lambda2_effective() == doctest::Approx(8.0));

  CHECK(cfg.lr_at_epoch(0) == doctest::Approx(1e-4));
  CHECK(cfg.lr_at_epoch(10) == doctest::Approx(5e-5));
  CHECK(cfg.lr_at_epoch(20) == doctest::Approx(2.5e-5));
  CHECK(cfg.lr_at_epoch(60) == doctest::Approx(1e-5));

  const auto path = std::filesystem::temp_directory_path() / "lvc_train_cfg.txt";
  {
    std::ofstream f(path);
    f << "# toy run\nstage = flow\nlambda1 = 16\nsteps=25\nseed = 9\nrate_point = rp2\n";
  }
  const TrainConfig parsed = parse_train_config(path.string());
  CHECK(parsed.stage == "flow");
  CHECK(parsed.lambda1 == doctest::Approx(16.0));
  CHECK(parsed.steps == 25);
  CHECK(parsed.seed == 9);
  CHECK(parsed.rate_point == "rp2");
  std::filesystem::remove(path);
}

TEST_CASE("joint stage requires the staged prerequisites") {
  VideoCodec codec(tiny_cfg(), 7);
  const auto data = tiny_data();
  TrainConfig cfg;
  cfg.stage = "joint";
  cfg.steps = 1;
  cfg.n_unroll = 2;
  CHECK_THROWS_AS(train_stage(cfg, codec, data, nlohmann::json::object()), BadInputError);
  nlohmann::json prov;
  prov["stages"] = {"intra"};
  CHECK_THROWS_AS(train_stage(cfg, codec, data, prov), BadInputError);
}

TEST_CASE("same seed, same losses (single-device determinism)") {
  const auto data = tiny_data();
  TrainConfig cfg;
  cfg.stage = "intra";
  cfg.steps = 3;
  cfg.batch = 2;
  cfg.seed = 33;

  VideoCodec a(tiny_cfg(), 5);
  VideoCodec b(tiny_cfg(), 5);
  const TrainResult ra = train_stage(cfg, a, data, nlohmann::json::object());
  const TrainResult rb = train_stage(cfg, b, data, nlohmann::json::object());
  REQUIRE(ra.losses.size() == rb.losses.size());
  for (size_t i = 0; i < ra.losses.size(); ++i) REQUIRE(ra.losses[i] == rb.losses[i]);
}

TEST_CASE("gradient reaches every trainable parameter at each stage start") {
  const auto data = tiny_data();
  VideoCodec codec(tiny_cfg(), 9);

  TrainConfig ci;
  ci.stage = "intra";
  ci.steps = 1;
  ci.batch = 2;
  const TrainResult ri = train_stage(ci, codec, data, nlohmann::json::object());
  CHECK(ri.dead_params.empty());

  TrainConfig cf;
  cf.stage = "flow";
  cf.steps = 1;
  cf.n_unroll = 3;
  const TrainResult rf = train_stage(cf, codec, data, ri.provenance);
  CHECK(rf.dead_params.empty());

  TrainConfig cj;
  cj.stage = "joint";
  cj.steps = 1;
  cj.n_unroll = 3;
  const TrainResult rj = train_stage(cj, codec, data, rf.provenance);
  CHECK(rj.dead_params.empty());

  // provenance accumulates the stage history
  const auto stages = rj.provenance.at("stages").get<std::vector<std::string>>();
  REQUIRE(stages.size() == 3);
  CHECK(stages[2] == "joint");
}

TEST_CASE("unrolled weight sharing: parameter count independent of n_unroll") {
  VideoCodec a(tiny_cfg(), 11);
  const auto data = tiny_data();
  int64_t count_before = 0;
  for (const auto& p : a.all_params()) count_before += p.numel();

  nlohmann::json prov;
  prov["stages"] = {"intra", "flow"};
  for (int n : {2, 5}) {
    TrainConfig cfg;
    cfg.stage = "joint";
    cfg.steps = 1;
    cfg.n_unroll = n;
    train_stage(cfg, a, data, prov);
    int64_t count = 0;
    for (const auto& p : a.all_params()) count += p.numel();
    CHECK(count == count_before);
  }
}
