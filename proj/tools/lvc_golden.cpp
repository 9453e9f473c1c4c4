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

// Regenerates the entropy-coder golden vectors. The committed fixtures pin
// CDF construction and coded bytes across builds; run this only when the
// coder format intentionally changes, and commit the result.

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "lvc/range_coder.hpp"
#include "lvc/tests_golden.hpp"

int main(int argc, char** argv) {
  const std::string out = argc > 1 ? argv[1] : "tests/fixtures/golden_entropy.json";
  std::ofstream f(out);
  if (!f) {
    std::fprintf(stderr, "cannot open %s\n", out.c_str());
    return 1;
  }
  f << lvc::golden_entropy_json().dump(1) << "\n";
  std::printf("wrote %s\n", out.c_str());
  return 0;
}
