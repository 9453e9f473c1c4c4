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

#include "lvc/range_coder.hpp"

#include <algorithm>
#include <cmath>

#include "lvc/autograd.hpp"  // norm_cdf

namespace lvc {

double gaussian_likelihood(double v, double mu, double sigma) {
  // raw CDF difference; the 1e-9 floor is applied by the rate computations
  return norm_cdf((v + 0.5 - mu) / sigma) - norm_cdf((v - 0.5 - mu) / sigma);
}

double estimate_rate_bits(const std::vector<double>& probabilities, double overhead_bits) {
  const double ln2 = 0.6931471805599453094;
  double bits = 0.0;
  for (double p : probabilities) bits -= std::log(std::max(p, 1e-9)) / ln2;
  return bits + overhead_bits;
}

CdfTable build_cdf(double mu, double sigma, int v_min, int v_max) {
  if (v_min > v_max) throw BadInputError("build_cdf: v_min > v_max");
  const int n = v_max - v_min + 1;
  if (static_cast<uint32_t>(n) > kCdfTotal)
    throw BadInputError("build_cdf: alphabet larger than CDF precision allows");

  // raw pmf, renormalized over the transmitted alphabet
  std::vector<double> pmf(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = static_cast<double>(v_min + i);
    pmf[i] = norm_cdf((v + 0.5 - mu) / sigma) - norm_cdf((v - 0.5 - mu) / sigma);
    total += pmf[i];
  }

  std::vector<uint32_t> mass(n);
  int64_t sum = 0;
  if (total <= 0.0) {
    // complete underflow: fall back to a uniform table
    const uint32_t base = kCdfTotal / n;
    for (int i = 0; i < n; ++i) mass[i] = base;
    sum = static_cast<int64_t>(base) * n;
  } else {
    for (int i = 0; i < n; ++i) {
      const double scaled = pmf[i] / total * static_cast<double>(kCdfTotal);
      int64_t m = std::llround(scaled);
      if (m < 1) m = 1;
      mass[i] = static_cast<uint32_t>(m);
      sum += m;
    }
  }

  int64_t diff = static_cast<int64_t>(kCdfTotal) - sum;
  if (diff != 0) {
    // absorb into the largest-mass symbol (first on ties)
    int big = 0;
    for (int i = 1; i < n; ++i)
      if (mass[i] > mass[big]) big = i;
    const int64_t adjusted = static_cast<int64_t>(mass[big]) + diff;
    if (adjusted >= 1) {
      mass[big] = static_cast<uint32_t>(adjusted);
      diff = 0;
    } else {
      // degenerate deficit: take from symbols in decreasing-mass order
      diff += static_cast<int64_t>(mass[big]) - 1;
      mass[big] = 1;
      std::vector<int> order(n);
      for (int i = 0; i < n; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return mass[a] > mass[b]; });
      for (int idx : order) {
        if (diff >= 0) break;
        const int64_t take = std::min<int64_t>(-diff, static_cast<int64_t>(mass[idx]) - 1);
        mass[idx] -= static_cast<uint32_t>(take);
        diff += take;
      }
      if (diff != 0) throw BadInputError("build_cdf: cannot normalize table");
    }
  }

  CdfTable cdf;
  cdf.v_min = v_min;
  cdf.v_max = v_max;
  cdf.cumulative.resize(n + 1);
  cdf.cumulative[0] = 0;
  for (int i = 0; i < n; ++i) cdf.cumulative[i + 1] = cdf.cumulative[i] + mass[i];
  return cdf;
}

// ---------------- encoder ----------------

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t byte = cache_;
    do {
      out_.push_back(static_cast<uint8_t>(byte + carry));
      byte = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(static_cast<uint32_t>(low_) >> 24);
  }
  ++cache_size_;
  low_ = (static_cast<uint32_t>(low_) << 8);
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq) {
  range_ >>= kCdfPrecision;
  low_ += static_cast<uint64_t>(cum) * range_;
  range_ *= freq;
  while (range_ < (1u << 24)) {
    shift_low();
    range_ <<= 8;
  }
}

void RangeEncoder::encode_symbol(const CdfTable& cdf, int value) {
  if (value < cdf.v_min || value > cdf.v_max)
    throw BadInputError("range encoder: symbol outside the transmitted alphabet");
  const int i = value - cdf.v_min;
  encode(cdf.cumulative[i], cdf.cumulative[i + 1] - cdf.cumulative[i]);
}

std::vector<uint8_t> RangeEncoder::finish() {
  if (!finished_) {
    for (int i = 0; i < 5; ++i) shift_low();
    finished_ = true;
  }
  return std::move(out_);
}

// ---------------- decoder ----------------

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
  next_byte();  // pad byte emitted by the encoder's cache priming
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= size_) throw CorruptStreamError("range decoder: stream truncated");
  return data_[pos_++];
}

int RangeDecoder::decode_symbol(const CdfTable& cdf) {
  range_ >>= kCdfPrecision;
  const uint32_t value = static_cast<uint32_t>(code_ / range_);
  if (value >= kCdfTotal)
    throw CorruptStreamError("range decoder: cumulative outside table bounds");
  // last cumulative <= value
  const auto it =
      std::upper_bound(cdf.cumulative.begin(), cdf.cumulative.end(), value) - 1;
  const int idx = static_cast<int>(it - cdf.cumulative.begin());
  if (idx < 0 || idx >= cdf.size())
    throw CorruptStreamError("range decoder: cumulative outside table bounds");
  code_ -= cdf.cumulative[idx] * range_;
  range_ *= cdf.cumulative[idx + 1] - cdf.cumulative[idx];
  while (range_ < (1u << 24)) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return cdf.v_min + idx;
}

}  // namespace lvc
