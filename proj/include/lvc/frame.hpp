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

#ifndef LVC_FRAME_HPP_
#define LVC_FRAME_HPP_

#include <string>
#include <vector>

#include "lvc/tensor.hpp"

namespace lvc {

// One RGB frame. Pixels are stored planar [3,H,W] in [0,1]; orig_h/orig_w
// remember the pre-padding size so the decoder can crop.
struct Frame {
  Tensor pixels;  // [3,H,W]
  int orig_h = 0;
  int orig_w = 0;

  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

Frame load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Frame& frame);

// Replicate-pads to multiples of `multiple` (transforms need /64
// divisibility); keeps orig dims for the decoder-side crop.
Frame pad_frame(const Frame& frame, int multiple = 64);
Frame crop_frame(const Frame& frame, int h, int w);

// numbered RGB images in a directory, sorted by filename
std::vector<std::string> list_frame_files(const std::string& dir);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace lvc

#endif  // LVC_FRAME_HPP_
