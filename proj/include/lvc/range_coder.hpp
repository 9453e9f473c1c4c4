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

#ifndef LVC_RANGE_CODER_HPP_
#define LVC_RANGE_CODER_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "lvc/common.hpp"

namespace lvc {

// 16-bit probability precision: every CDF table carries total mass 2^16.
constexpr int kCdfPrecision = 16;
constexpr uint32_t kCdfTotal = 1u << kCdfPrecision;

// Quantized CDF over the integer alphabet [v_min, v_max]. cumulative has
// alphabet_size+1 entries, cumulative[0] == 0, cumulative[size] == 65536,
// strictly increasing (per-symbol mass >= 1).
struct CdfTable {
  int v_min = 0;
  int v_max = 0;
  std::vector<uint32_t> cumulative;

  int size() const { return v_max - v_min + 1; }
  uint32_t mass(int symbol_value) const {
    const int i = symbol_value - v_min;
    return cumulative[i + 1] - cumulative[i];
  }
};

// Builds the quantized table for a discretized Gaussian:
//   mass(v) ~ Phi((v+0.5-mu)/sigma) - Phi((v-0.5-mu)/sigma)
// normalized to total 2^16 with a per-symbol floor of 1; the rounding
// deficit/excess is absorbed by the largest-mass symbol (lowest index on
// ties, spilling over in decreasing-mass order in the degenerate case where
// the largest cannot absorb it all). All arithmetic is double precision with
// a fixed evaluation order followed by integer rounding.
CdfTable build_cdf(double mu, double sigma, int v_min, int v_max);

// Continuous per-symbol likelihood Phi((v+.5-mu)/s) - Phi((v-.5-mu)/s).
// Unfloored; estimate_rate_bits applies the 1e-9 floor.
double gaussian_likelihood(double v, double mu, double sigma);

// R = -sum log2(p) + overhead_bits. Probabilities are floored at 1e-9.
double estimate_rate_bits(const std::vector<double>& probabilities, double overhead_bits = 0.0);

// Byte-wise renormalizing range coder (32-bit range, 64-bit low with carry
// cache). Encoded streams start with one zero pad byte and close with a
// five-byte flush; total constant overhead stays well under 32 bytes.
class RangeEncoder {
 public:
  RangeEncoder() { out_.reserve(1024); }
  void encode(uint32_t cum, uint32_t freq);  // total is kCdfTotal
  void encode_symbol(const CdfTable& cdf, int value);
  std::vector<uint8_t> finish();

 private:
  void shift_low();
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  int64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(const uint8_t* data, size_t size);
  explicit RangeDecoder(const std::vector<uint8_t>& data)
      : RangeDecoder(data.data(), data.size()) {}
  // decodes one symbol value under cdf; throws CorruptStreamError when the
  // stream runs out or the decoded cumulative falls outside the table
  int decode_symbol(const CdfTable& cdf);

 private:
  uint8_t next_byte();
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t code_ = 0;  // 32-bit on purpose: tracks the encoder's low mod 2^32
  uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace lvc

#endif  // LVC_RANGE_CODER_HPP_
