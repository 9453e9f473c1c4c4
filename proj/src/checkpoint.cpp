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

#include "lvc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "lvc/common.hpp"

namespace lvc {

namespace {

constexpr char kMagic[8] = {'L', 'V', 'C', 'K', 'P', 'T', '1', '\n'};

void put_u32(std::ofstream& f, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xFF);
  f.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::ifstream& f) {
  uint8_t b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw BadInputError("checkpoint: truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw BadInputError("cannot open checkpoint for writing: " + path);
  f.write(kMagic, sizeof(kMagic));
  const std::string cfg = config.dump();
  put_u32(f, static_cast<uint32_t>(cfg.size()));
  f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  put_u32(f, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) put_u32(f, static_cast<uint32_t>(t.dim(d)));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!f) throw BadInputError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw BadInputError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw BadInputError("not a checkpoint file: " + path);
  Checkpoint ck;
  const uint32_t cfg_len = get_u32(f);
  std::string cfg(cfg_len, '\0');
  f.read(cfg.data(), cfg_len);
  if (!f) throw BadInputError("checkpoint: truncated config");
  ck.config = nlohmann::json::parse(cfg);
  const uint32_t count = get_u32(f);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t rank = get_u32(f);
    std::vector<int> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(get_u32(f));
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw BadInputError("checkpoint: truncated tensor " + name);
    ck.tensors[name] = std::move(t);
  }
  return ck;
}

}  // namespace lvc
