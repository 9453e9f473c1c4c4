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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lvc/bitstream.hpp"
#include "lvc/checkpoint.hpp"
#include "lvc/metrics.hpp"
#include "lvc/synth.hpp"
#include "lvc/training.hpp"
#include "lvc/video_codec.hpp"

namespace {

using namespace lvc;

// exit codes: 0 ok, 2 bad input, 3 corrupt stream, 4 config mismatch
constexpr int kExitBadInput = 2;
constexpr int kExitCorrupt = 3;
constexpr int kExitMismatch = 4;

VideoCodec codec_from_checkpoint(const std::string& path, bool no_temporal_prior) {
  const Checkpoint ck = Checkpoint::load(path);
  CodecConfig cfg = codec_config_from_json(ck.config.at("codec"));
  if (no_temporal_prior) cfg.temporal_prior = false;
  VideoCodec codec(cfg, 0);
  codec.load_checkpoint(ck);
  return codec;
}

std::vector<Frame> load_sequence(const std::string& dir, int max_frames) {
  std::vector<Frame> frames;
  for (const auto& f : list_frame_files(dir)) {
    frames.push_back(load_ppm(f));
    if (max_frames > 0 && static_cast<int>(frames.size()) >= max_frames) break;
  }
  return frames;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  synth_dataset(spec, out);
  std::printf("wrote %d sequence(s) of %d frames (%dx%d, %s) under %s\n", spec.sequences,
              spec.frames, spec.width, spec.height, spec.kind.c_str(), out.c_str());
  return 0;
}

int cmd_train(TrainConfig cfg, bool no_nlam, bool no_temporal_prior,
              const std::string& loss_log) {
  if (cfg.data_dir.empty()) throw BadInputError("train: --data is required");
  if (cfg.out_checkpoint.empty()) throw BadInputError("train: --out is required");
  const ClipDataset data = ClipDataset::from_dir(cfg.data_dir);

  nlohmann::json prev = nlohmann::json::object();
  std::unique_ptr<VideoCodec> codec;
  if (!cfg.init_checkpoint.empty()) {
    const Checkpoint ck = Checkpoint::load(cfg.init_checkpoint);
    CodecConfig ccfg = codec_config_from_json(ck.config.at("codec"));
    codec = std::make_unique<VideoCodec>(ccfg, cfg.seed);
    codec->load_checkpoint(ck);
    if (ck.config.contains("train")) prev = ck.config.at("train");
  } else {
    CodecConfig ccfg = toy_codec_config();
    if (no_nlam) {
      ccfg.intra.nlam = false;
      ccfg.residual.nlam = false;
      ccfg.flow.nlam = false;
      ccfg.tentropy.nlam = false;
    }
    ccfg.temporal_prior = !no_temporal_prior;
    codec = std::make_unique<VideoCodec>(ccfg, cfg.seed);
  }

  const TrainResult res = train_stage(cfg, *codec, data, prev);
  if (!res.dead_params.empty()) {
    std::fprintf(stderr, "warning: %zu parameter tensor(s) saw no gradient at stage start:\n",
                 res.dead_params.size());
    for (const auto& n : res.dead_params) std::fprintf(stderr, "  %s\n", n.c_str());
  }
  Checkpoint out = codec->to_checkpoint();
  out.config["train"] = res.provenance;
  out.save(cfg.out_checkpoint);

  if (!loss_log.empty()) {
    std::ofstream f(loss_log);
    f << "step,loss\n";
    for (size_t i = 0; i < res.losses.size(); ++i) f << i << "," << res.losses[i] << "\n";
  }
  std::printf("stage %s: %zu steps, final loss %.5f -> %s\n", cfg.stage.c_str(),
              res.losses.size(), res.losses.back(), cfg.out_checkpoint.c_str());
  return 0;
}

int cmd_encode(const std::string& input, const std::string& ckpt, const std::string& out,
               int gop, int frames, bool no_temporal_prior) {
  VideoCodec codec = codec_from_checkpoint(ckpt, no_temporal_prior);
  const auto seq = load_sequence(input, frames);
  const SequenceResult res = codec.encode_sequence(seq, gop);
  write_file(out, res.stream.serialize());
  double mean_q = 0.0;
  for (const auto& st : res.stats) mean_q += st.msssim;
  mean_q /= static_cast<double>(res.stats.size());
  std::printf("encoded %zu frames: %zu bytes, %.4f bpp, MS-SSIM %.4f -> %s\n", seq.size(),
              res.stream.total_bytes(), res.bpp, mean_q, out.c_str());
  return 0;
}

int cmd_decode(const std::string& input, const std::string& ckpt, const std::string& out,
               bool no_temporal_prior) {
  VideoCodec codec = codec_from_checkpoint(ckpt, no_temporal_prior);
  const Bitstream bs = Bitstream::parse(read_file(input));
  const auto frames = codec.decode_sequence(bs);
  std::filesystem::create_directories(out);
  for (size_t t = 0; t < frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.ppm", t);
    save_ppm((std::filesystem::path(out) / name).string(), frames[t]);
  }
  std::printf("decoded %zu frames -> %s\n", frames.size(), out.c_str());
  return 0;
}

int cmd_eval(const std::string& input, const std::vector<std::string>& ckpts, int gop,
             int frames, double fps, bool kbps_gop_n, bool no_temporal_prior,
             const std::string& report) {
  const auto seq = load_sequence(input, frames);
  std::ostringstream table;
  table << "# rate_point bpp msssim kbps\n";
  std::printf("%-12s %10s %10s %12s %12s\n", "rate_point", "bpp", "msssim", "kbps", "bytes");
  for (const auto& ck : ckpts) {
    VideoCodec codec = codec_from_checkpoint(ck, no_temporal_prior);
    const SequenceResult res = codec.encode_sequence(seq, gop);
    // decoder must reproduce the encoder reconstructions exactly
    const auto decoded = codec.decode_sequence(Bitstream::parse(res.stream.serialize()));
    for (size_t t = 0; t < decoded.size(); ++t)
      if (max_abs_diff(decoded[t].pixels, res.recons[t].pixels) != 0.0)
        throw CorruptStreamError("decoder mismatch against encoder reconstruction");
    double mean_q = 0.0;
    for (const auto& st : res.stats) mean_q += st.msssim;
    mean_q /= static_cast<double>(res.stats.size());
    const double n_frames = static_cast<double>(seq.size());
    const double tau = n_frames / fps;
    const int oh = seq[0].height(), ow = seq[0].width();
    // bpp -> kbps via H*W*n/tau; n is the frame count by default, the GOP
    // length behind --kbps-gop-n (the source formula is ambiguous)
    const double n_term = kbps_gop_n ? static_cast<double>(gop) : n_frames;
    const double kbps = res.bpp * oh * ow * n_term / tau / 1000.0;
    std::string name = "rp";
    const Checkpoint raw = Checkpoint::load(ck);
    if (raw.config.contains("train") && raw.config["train"].contains("rate_point"))
      name = raw.config["train"]["rate_point"];
    std::printf("%-12s %10.5f %10.5f %12.2f %12zu\n", name.c_str(), res.bpp, mean_q, kbps,
                res.stream.total_bytes());
    table << name << " " << res.bpp << " " << mean_q << " " << kbps << "\n";
  }
  if (!report.empty()) {
    std::ofstream f(report);
    f << table.str();
    std::printf("report -> %s\n", report.c_str());
  }
  return 0;
}

std::vector<RatePoint> read_curve(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BadInputError("cannot open curve file: " + path);
  std::vector<RatePoint> pts;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    double bpp, q;
    if (is >> bpp >> q) {
      pts.push_back({bpp, q});
      continue;
    }
    std::istringstream is2(line);
    std::string tag;
    if (is2 >> tag >> bpp >> q) pts.push_back({bpp, q});
  }
  if (pts.empty()) throw BadInputError("no rate points in " + path);
  return pts;
}

int cmd_bdrate(const std::string& anchor, const std::string& test) {
  const double bd = bd_rate_percent(read_curve(anchor), read_curve(test));
  std::printf("BD-rate: %+.3f%%\n", bd);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lvc: learned video codec with joint spatial-temporal entropy models"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate synthetic test sequences");
  SynthSpec spec;
  std::string synth_out;
  synth->add_option("--kind", spec.kind, "translate|rotate|static");
  synth->add_option("--frames", spec.frames);
  synth->add_option("--width", spec.width);
  synth->add_option("--height", spec.height);
  synth->add_option("--max-disp", spec.max_disp, "per-frame displacement bound (px)");
  synth->add_option("--sequences", spec.sequences);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--out", synth_out)->required();

  auto* train = app.add_subcommand("train", "run one training stage");
  TrainConfig tcfg;
  std::string train_config_file, loss_log;
  bool no_nlam = false, no_temporal = false;
  train->add_option("--config", train_config_file, "key=value config file");
  train->add_option("--stage", tcfg.stage, "intra|flow|joint");
  train->add_option("--data", tcfg.data_dir, "sequence root directory");
  train->add_option("--out", tcfg.out_checkpoint);
  train->add_option("--init", tcfg.init_checkpoint, "initializing checkpoint");
  train->add_option("--steps", tcfg.steps);
  train->add_option("--batch", tcfg.batch);
  train->add_option("--crop", tcfg.crop);
  train->add_option("--unroll", tcfg.n_unroll);
  train->add_option("--lambda1", tcfg.lambda1);
  train->add_option("--lambda2", tcfg.lambda2);
  train->add_option("--seed", tcfg.seed);
  train->add_option("--rate-point", tcfg.rate_point);
  train->add_option("--loss-log", loss_log, "per-step loss csv");
  train->add_flag("--no-nlam", no_nlam, "build the ablated model without attention blocks");
  train->add_flag("--no-temporal-prior", no_temporal, "train without the ConvLSTM prior");

  auto* enc = app.add_subcommand("encode", "encode a frame directory");
  std::string e_in, e_ck, e_out;
  int e_gop = 10, e_frames = 0;
  bool e_notemp = false;
  enc->add_option("--input", e_in)->required();
  enc->add_option("--checkpoint", e_ck)->required();
  enc->add_option("--out", e_out)->required();
  enc->add_option("--gop", e_gop);
  enc->add_option("--frames", e_frames, "encode only the first N frames");
  enc->add_flag("--no-temporal-prior", e_notemp);

  auto* dec = app.add_subcommand("decode", "decode a bitstream to frames");
  std::string d_in, d_ck, d_out;
  bool d_notemp = false;
  dec->add_option("--input", d_in)->required();
  dec->add_option("--checkpoint", d_ck)->required();
  dec->add_option("--out", d_out)->required();
  dec->add_flag("--no-temporal-prior", d_notemp);

  auto* ev = app.add_subcommand("eval", "encode+decode, report bpp / MS-SSIM / kbps");
  std::string v_in, v_report;
  std::vector<std::string> v_cks;
  int v_gop = 10, v_frames = 0;
  double v_fps = 30.0;
  bool v_kbps_gop = false, v_notemp = false;
  ev->add_option("--input", v_in)->required();
  ev->add_option("--checkpoint", v_cks, "one per rate point")->required();
  ev->add_option("--gop", v_gop);
  ev->add_option("--frames", v_frames);
  ev->add_option("--fps", v_fps);
  ev->add_option("--report", v_report, "tabular rate-distortion output");
  ev->add_flag("--kbps-gop-n", v_kbps_gop, "use the GOP length in the kbps conversion");
  ev->add_flag("--no-temporal-prior", v_notemp);

  auto* bd = app.add_subcommand("bdrate", "BD-rate between two rate curves");
  std::string b_anchor, b_test;
  bd->add_option("--anchor", b_anchor)->required();
  bd->add_option("--test", b_test)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitBadInput;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec, synth_out);
    if (train->parsed()) {
      if (!train_config_file.empty()) {
        TrainConfig file_cfg = parse_train_config(train_config_file);
        if (train->count("--stage") == 0) tcfg.stage = file_cfg.stage;
        if (train->count("--data") == 0) tcfg.data_dir = file_cfg.data_dir;
        if (train->count("--out") == 0) tcfg.out_checkpoint = file_cfg.out_checkpoint;
        if (train->count("--init") == 0) tcfg.init_checkpoint = file_cfg.init_checkpoint;
        if (train->count("--steps") == 0) tcfg.steps = file_cfg.steps;
        if (train->count("--batch") == 0) tcfg.batch = file_cfg.batch;
        if (train->count("--crop") == 0) tcfg.crop = file_cfg.crop;
        if (train->count("--unroll") == 0) tcfg.n_unroll = file_cfg.n_unroll;
        if (train->count("--lambda1") == 0) tcfg.lambda1 = file_cfg.lambda1;
        if (train->count("--lambda2") == 0) tcfg.lambda2 = file_cfg.lambda2;
        if (train->count("--seed") == 0) tcfg.seed = file_cfg.seed;
        if (train->count("--rate-point") == 0) tcfg.rate_point = file_cfg.rate_point;
        tcfg.steps_per_epoch = file_cfg.steps_per_epoch;
        tcfg.lr_init = file_cfg.lr_init;
        tcfg.lr_final = file_cfg.lr_final;
        tcfg.clip_norm = file_cfg.clip_norm;
        tcfg.tv_weight = file_cfg.tv_weight;
      }
      return cmd_train(tcfg, no_nlam, no_temporal, loss_log);
    }
    if (enc->parsed()) return cmd_encode(e_in, e_ck, e_out, e_gop, e_frames, e_notemp);
    if (dec->parsed()) return cmd_decode(d_in, d_ck, d_out, d_notemp);
    if (ev->parsed())
      return cmd_eval(v_in, v_cks, v_gop, v_frames, v_fps, v_kbps_gop, v_notemp, v_report);
    if (bd->parsed()) return cmd_bdrate(b_anchor, b_test);
  } catch (const ConfigMismatchError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMismatch;
  } catch (const CorruptStreamError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCorrupt;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadInput;
  }
  return 0;
}
