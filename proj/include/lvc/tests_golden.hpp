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

#ifndef LVC_TESTS_GOLDEN_HPP_
#define LVC_TESTS_GOLDEN_HPP_

#include "json.hpp"

namespace lvc {

// Deterministic golden-vector cases for the entropy coder: inputs are
// regenerated from the recorded seeds, so the fixture stores only expected
// bytes (and one full CDF table). Shared by the generator tool and the
// verification test.
nlohmann::json golden_entropy_json();

}  // namespace lvc

#endif  // LVC_TESTS_GOLDEN_HPP_
