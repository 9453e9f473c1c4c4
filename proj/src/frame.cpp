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

#include "lvc/frame.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "lvc/common.hpp"

namespace lvc {

namespace {

int read_pnm_token(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v;
  if (!(in >> v)) throw BadInputError("ppm: malformed header");
  return v;
}

}  // namespace

Frame load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw BadInputError("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw BadInputError("ppm: expected P6 in " + path);
  const int w = read_pnm_token(f);
  const int h = read_pnm_token(f);
  const int maxval = read_pnm_token(f);
  if (maxval != 255) throw BadInputError("ppm: only maxval 255 supported");
  f.get();  // single whitespace before raster
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw BadInputError("ppm: truncated raster in " + path);
  Frame frame;
  frame.pixels = Tensor({3, h, w});
  frame.orig_h = h;
  frame.orig_w = w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        frame.pixels.at(c, y, x) = raw[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0;
  return frame;
}

void save_ppm(const std::string& path, const Frame& frame) {
  const int h = frame.height(), w = frame.width();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw BadInputError("cannot open for writing: " + path);
  f << "P6\n" << w << " " << h << "\n255\n";
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(frame.pixels.at(c, y, x), 0.0, 1.0);
        raw[(static_cast<size_t>(y) * w + x) * 3 + c] =
            static_cast<uint8_t>(std::lround(v * 255.0));
      }
  f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw BadInputError("write failed: " + path);
}

Frame pad_frame(const Frame& frame, int multiple) {
  const int h = frame.height(), w = frame.width();
  const int ph = (h + multiple - 1) / multiple * multiple;
  const int pw = (w + multiple - 1) / multiple * multiple;
  Frame out;
  out.orig_h = frame.orig_h;
  out.orig_w = frame.orig_w;
  if (ph == h && pw == w) {
    out.pixels = frame.pixels;
    return out;
  }
  out.pixels = Tensor({3, ph, pw});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        out.pixels.at(c, y, x) = frame.pixels.at(c, std::min(y, h - 1), std::min(x, w - 1));
  return out;
}

Frame crop_frame(const Frame& frame, int h, int w) {
  if (h > frame.height() || w > frame.width()) throw DimensionError("crop larger than frame");
  Frame out;
  out.orig_h = h;
  out.orig_w = w;
  out.pixels = Tensor({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.pixels.at(c, y, x) = frame.pixels.at(c, y, x);
  return out;
}

std::vector<std::string> list_frame_files(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw BadInputError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".ppm") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw BadInputError("no .ppm frames in " + dir);
  return files;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace lvc
