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

#ifndef LVC_BITSTREAM_HPP_
#define LVC_BITSTREAM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "lvc/common.hpp"

namespace lvc {

// Stream layout (all integers little-endian):
//   header: 'L' 'V' 'C' <version byte '1'> | orig_w u16 | orig_h u16 |
//           frame_count u16 | gop_len u8 | model_id u8            (12 bytes)
//   per frame: segment_len u32 | frame_type u8 | coded tensors
//   per tensor: v_min i16 | v_max i16 | byte_len u32 | payload
// Intra segments carry [hyper, latent]; inter segments carry
// [flow-hyper, flow-feature, residual-hyper, residual-latent], hyper tensors
// always ahead of the latents they condition.

constexpr uint8_t kFrameTypeIntra = 0;
constexpr uint8_t kFrameTypeInter = 1;
constexpr int kHeaderBytes = 12;
constexpr int kSegmentPrefixBytes = 5;  // u32 length + u8 frame type
constexpr int kTensorFramingBytes = 8;  // i16 v_min + i16 v_max + u32 byte_len

struct BitstreamHeader {
  uint8_t version = '1';
  uint16_t orig_w = 0;
  uint16_t orig_h = 0;
  uint16_t frame_count = 0;
  uint8_t gop_len = 0;
  uint8_t model_id = 0;

  bool operator==(const BitstreamHeader&) const = default;
};

std::vector<uint8_t> serialize_header(const BitstreamHeader& h);
BitstreamHeader parse_header(const uint8_t* data, size_t size);

struct CodedTensor {
  int16_t v_min = 0;
  int16_t v_max = 0;
  std::vector<uint8_t> payload;
};

struct FrameSegment {
  uint8_t frame_type = kFrameTypeIntra;
  std::vector<CodedTensor> tensors;

  size_t payload_bytes() const {
    size_t n = 0;
    for (const auto& t : tensors) n += t.payload.size();
    return n;
  }
  // framing overhead this segment contributes (prefix + per-tensor headers)
  size_t framing_bytes() const { return kSegmentPrefixBytes + kTensorFramingBytes * tensors.size(); }
  size_t total_bytes() const { return framing_bytes() + payload_bytes(); }
};

void append_segment(std::vector<uint8_t>& out, const FrameSegment& seg);

// Reads one segment at `pos` (which is advanced); validates the declared
// lengths against the available bytes.
FrameSegment read_segment(const uint8_t* data, size_t size, size_t& pos);

// Whole-stream helpers.
struct Bitstream {
  BitstreamHeader header;
  std::vector<FrameSegment> segments;

  std::vector<uint8_t> serialize() const;
  static Bitstream parse(const std::vector<uint8_t>& bytes);

  size_t total_bytes() const {
    size_t n = kHeaderBytes;
    for (const auto& s : segments) n += s.total_bytes();
    return n;
  }
  size_t overhead_bytes() const {
    size_t n = kHeaderBytes;
    for (const auto& s : segments) n += s.framing_bytes();
    return n;
  }
};

void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::string& path);

}  // namespace lvc

#endif  // LVC_BITSTREAM_HPP_
