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

#include "lvc/tests_golden.hpp"

#include <string>
#include <vector>

#include "lvc/common.hpp"
#include "lvc/range_coder.hpp"

namespace lvc {

namespace {

std::string to_hex(const std::vector<uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xF]);
  }
  return s;
}

}  // namespace

nlohmann::json golden_entropy_json() {
  nlohmann::json out;
  out["format"] = "lvc-entropy-golden-1";

  // coded-byte cases: symbols and per-symbol (mu, sigma) regenerate from the
  // seed, exactly as in the verification test
  nlohmann::json cases = nlohmann::json::array();
  const struct {
    uint64_t seed;
    int n;
    int v_min, v_max;
  } specs[] = {
      {17, 64, -8, 8},    {18, 256, -32, 31},   {19, 1024, -256, 255},
      {20, 512, -2, 2},   {21, 2048, -64, 63},  {22, 128, 0, 0},
      {23, 4096, -16, 15}, {24, 333, -100, 100},
  };
  for (const auto& sp : specs) {
    Rng rng(sp.seed);
    RangeEncoder enc;
    for (int i = 0; i < sp.n; ++i) {
      const double mu = rng.uniform(sp.v_min - 1.0, sp.v_max + 1.0);
      const double sigma = i % 5 == 0 ? 0.01 : rng.uniform(0.01, 20.0);
      const CdfTable cdf = build_cdf(mu, sigma, sp.v_min, sp.v_max);
      const int v = static_cast<int>(rng.uniform_int(sp.v_min, sp.v_max));
      enc.encode_symbol(cdf, v);
    }
    nlohmann::json c;
    c["seed"] = sp.seed;
    c["n"] = sp.n;
    c["v_min"] = sp.v_min;
    c["v_max"] = sp.v_max;
    c["bytes_hex"] = to_hex(enc.finish());
    cases.push_back(c);
  }
  out["coded"] = cases;

  // one fully-spelled CDF table
  const CdfTable table = build_cdf(0.25, 1.75, -8, 8);
  nlohmann::json t;
  t["mu"] = 0.25;
  t["sigma"] = 1.75;
  t["v_min"] = -8;
  t["v_max"] = 8;
  t["cumulative"] = table.cumulative;
  out["cdf_table"] = t;
  return out;
}

}  // namespace lvc
