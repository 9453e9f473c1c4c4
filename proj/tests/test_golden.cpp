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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "lvc/tests_golden.hpp"

// The committed fixture pins the CDF quantization and coded bytes; a
// mismatch means the entropy coder no longer reproduces streams from other
// builds of this code.
TEST_CASE("entropy coder matches the committed golden vectors") {
  std::ifstream f(std::string(LVC_SOURCE_DIR) + "/tests/fixtures/golden_entropy.json");
  REQUIRE_MESSAGE(f.good(), "missing tests/fixtures/golden_entropy.json");
  nlohmann::json committed;
  f >> committed;

  const nlohmann::json current = lvc::golden_entropy_json();
  REQUIRE(current.at("format") == committed.at("format"));
  CHECK(current.at("cdf_table") == committed.at("cdf_table"));
  REQUIRE(current.at("coded").size() == committed.at("coded").size());
  for (size_t i = 0; i < current.at("coded").size(); ++i) {
    INFO("case ", i);
    CHECK(current.at("coded")[i] == committed.at("coded")[i]);
  }
}
