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

#include "lvc/bitstream.hpp"

#include <cstring>
#include <fstream>

namespace lvc {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<uint8_t> serialize_header(const BitstreamHeader& h) {
  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes);
  out.push_back('L');
  out.push_back('V');
  out.push_back('C');
  out.push_back(h.version);
  put_u16(out, h.orig_w);
  put_u16(out, h.orig_h);
  put_u16(out, h.frame_count);
  out.push_back(h.gop_len);
  out.push_back(h.model_id);
  return out;
}

BitstreamHeader parse_header(const uint8_t* data, size_t size) {
  if (size < kHeaderBytes) throw CorruptStreamError("header: stream shorter than 12 bytes");
  if (data[0] != 'L' || data[1] != 'V' || data[2] != 'C')
    throw CorruptStreamError("header: bad magic");
  if (data[3] != '1') throw CorruptStreamError("header: unsupported version");
  BitstreamHeader h;
  h.version = data[3];
  h.orig_w = get_u16(data + 4);
  h.orig_h = get_u16(data + 6);
  h.frame_count = get_u16(data + 8);
  h.gop_len = data[10];
  h.model_id = data[11];
  return h;
}

void append_segment(std::vector<uint8_t>& out, const FrameSegment& seg) {
  // length counts everything after the u32 prefix
  uint32_t len = 1;
  for (const auto& t : seg.tensors)
    len += kTensorFramingBytes + static_cast<uint32_t>(t.payload.size());
  put_u32(out, len);
  out.push_back(seg.frame_type);
  for (const auto& t : seg.tensors) {
    put_u16(out, static_cast<uint16_t>(t.v_min));
    put_u16(out, static_cast<uint16_t>(t.v_max));
    put_u32(out, static_cast<uint32_t>(t.payload.size()));
    out.insert(out.end(), t.payload.begin(), t.payload.end());
  }
}

FrameSegment read_segment(const uint8_t* data, size_t size, size_t& pos) {
  if (pos + 4 > size) throw CorruptStreamError("segment: truncated length prefix");
  const uint32_t len = get_u32(data + pos);
  pos += 4;
  if (len < 1 || pos + len > size) throw CorruptStreamError("segment: truncated body");
  const size_t end = pos + len;
  FrameSegment seg;
  seg.frame_type = data[pos++];
  if (seg.frame_type != kFrameTypeIntra && seg.frame_type != kFrameTypeInter)
    throw CorruptStreamError("segment: unknown frame type");
  while (pos < end) {
    if (pos + kTensorFramingBytes > end) throw CorruptStreamError("segment: truncated tensor header");
    CodedTensor t;
    t.v_min = static_cast<int16_t>(get_u16(data + pos));
    t.v_max = static_cast<int16_t>(get_u16(data + pos + 2));
    const uint32_t blen = get_u32(data + pos + 4);
    pos += kTensorFramingBytes;
    if (pos + blen > end) throw CorruptStreamError("segment: truncated tensor payload");
    t.payload.assign(data + pos, data + pos + blen);
    pos += blen;
    seg.tensors.push_back(std::move(t));
  }
  return seg;
}

std::vector<uint8_t> Bitstream::serialize() const {
  std::vector<uint8_t> out = serialize_header(header);
  for (const auto& s : segments) append_segment(out, s);
  return out;
}

Bitstream Bitstream::parse(const std::vector<uint8_t>& bytes) {
  Bitstream bs;
  bs.header = parse_header(bytes.data(), bytes.size());
  size_t pos = kHeaderBytes;
  for (int i = 0; i < bs.header.frame_count; ++i)
    bs.segments.push_back(read_segment(bytes.data(), bytes.size(), pos));
  if (pos != bytes.size()) throw CorruptStreamError("stream: trailing bytes after last segment");
  return bs;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw BadInputError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw BadInputError("write failed: " + path);
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw BadInputError("cannot open: " + path);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw BadInputError("read failed: " + path);
  return bytes;
}

}  // namespace lvc
