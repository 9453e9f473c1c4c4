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

#include "lvc/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lvc/common.hpp"

namespace lvc {

namespace {

// bilinear smooth-noise octave on a coarse lattice
struct Octave {
  int cell;
  int gw, gh;
  std::vector<double> grid;

  Octave(int canvas_w, int canvas_h, int cell, Rng& rng) : cell(cell) {
    gw = canvas_w / cell + 2;
    gh = canvas_h / cell + 2;
    grid.resize(static_cast<size_t>(gw) * gh);
    for (auto& v : grid) v = rng.uniform();
  }

  double at(double x, double y) const {
    const double gx = x / cell, gy = y / cell;
    const int x0 = static_cast<int>(std::floor(gx));
    const int y0 = static_cast<int>(std::floor(gy));
    const double fx = gx - x0, fy = gy - y0;
    auto g = [&](int yy, int xx) {
      return grid[static_cast<size_t>(std::clamp(yy, 0, gh - 1)) * gw +
                  std::clamp(xx, 0, gw - 1)];
    };
    const double a = g(y0, x0) * (1 - fx) + g(y0, x0 + 1) * fx;
    const double b = g(y0 + 1, x0) * (1 - fx) + g(y0 + 1, x0 + 1) * fx;
    return a * (1 - fy) + b * fy;
  }
};

// three-octave texture over a master canvas, sampled continuously
struct MasterTexture {
  std::vector<Octave> octs[3];

  MasterTexture(int canvas_w, int canvas_h, Rng& rng) {
    for (int c = 0; c < 3; ++c) {
      octs[c].emplace_back(canvas_w, canvas_h, 16, rng);
      octs[c].emplace_back(canvas_w, canvas_h, 6, rng);
      octs[c].emplace_back(canvas_w, canvas_h, 2, rng);
    }
  }

  double sample(int c, double x, double y) const {
    const double v = 0.4 * octs[c][0].at(x, y) + 0.3 * octs[c][1].at(x, y) +
                     0.3 * octs[c][2].at(x, y);
    return 0.05 + 0.9 * v;  // keep inside (0,1) with headroom
  }
};

}  // namespace

std::vector<SynthSequence> synth_generate(const SynthSpec& spec) {
  if (spec.kind != "translate" && spec.kind != "rotate" && spec.kind != "static")
    throw BadInputError("synth: kind must be translate|rotate|static");
  if (spec.frames < 1 || spec.width < 8 || spec.height < 8 || spec.sequences < 1)
    throw BadInputError("synth: degenerate spec");
  Rng rng(spec.seed);
  std::vector<SynthSequence> out;

  const double diag = 0.5 * std::hypot(spec.width, spec.height);
  for (int s = 0; s < spec.sequences; ++s) {
    const int margin = static_cast<int>(std::ceil(spec.max_disp * spec.frames + diag)) + 8;
    const int cw = spec.width + 2 * margin, ch = spec.height + 2 * margin;
    MasterTexture tex(cw, ch, rng);

    SynthSequence seq;
    seq.motion["kind"] = spec.kind;
    double vx = 0.0, vy = 0.0, omega = 0.0;
    if (spec.kind == "translate") {
      const double ang = rng.uniform(0.0, 6.283185307179586);
      const double speed = rng.uniform(0.15, 1.0) * spec.max_disp;
      vx = speed * std::cos(ang);
      vy = speed * std::sin(ang);
      seq.motion["vx"] = vx;
      seq.motion["vy"] = vy;
    } else if (spec.kind == "rotate") {
      omega = rng.uniform(0.3, 1.0) * spec.max_disp / std::max(diag, 1.0);
      if (rng.uniform() < 0.5) omega = -omega;
      seq.motion["omega"] = omega;
    }

    for (int t = 0; t < spec.frames; ++t) {
      const int tt = spec.kind == "static" ? 0 : t;
      Frame f;
      f.pixels = Tensor({3, spec.height, spec.width});
      f.orig_h = spec.height;
      f.orig_w = spec.width;
      const double cx = cw / 2.0, cy = ch / 2.0;
      const double cosr = std::cos(-omega * tt), sinr = std::sin(-omega * tt);
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          double sx, sy;
          if (spec.kind == "rotate") {
            const double rx = x - spec.width / 2.0, ry = y - spec.height / 2.0;
            sx = cx + rx * cosr - ry * sinr;
            sy = cy + rx * sinr + ry * cosr;
          } else {
            sx = margin + x + vx * tt;
            sy = margin + y + vy * tt;
          }
          for (int c = 0; c < 3; ++c) f.pixels.at(c, y, x) = tex.sample(c, sx, sy);
        }
      seq.frames.push_back(std::move(f));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto seqs = synth_generate(spec);
  fs::create_directories(out_dir);
  for (size_t s = 0; s < seqs.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%03zu", s);
    const fs::path seq_dir = fs::path(out_dir) / name;
    fs::create_directories(seq_dir);
    for (size_t t = 0; t < seqs[s].frames.size(); ++t) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%04zu.ppm", t);
      save_ppm((seq_dir / fname).string(), seqs[s].frames[t]);
    }
    std::ofstream mf(seq_dir / "motion.json");
    mf << seqs[s].motion.dump(2) << "\n";
  }
}

}  // namespace lvc
