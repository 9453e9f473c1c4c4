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

#ifndef LVC_CHECKPOINT_HPP_
#define LVC_CHECKPOINT_HPP_

#include <map>
#include <string>

#include "json.hpp"
#include "lvc/tensor.hpp"

namespace lvc {

// Self-describing parameter archive: a JSON config block (widths, flags,
// stage provenance, model id) followed by named double tensors. Integers and
// raw doubles are little-endian.
struct Checkpoint {
  nlohmann::json config;
  std::map<std::string, Tensor> tensors;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace lvc

#endif  // LVC_CHECKPOINT_HPP_
