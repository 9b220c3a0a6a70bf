// Copyright 2026 The Equilens Authors
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

#ifndef EQUILENS_WEIGHTS_IO_HPP_
#define EQUILENS_WEIGHTS_IO_HPP_

// Model directory layout:
//   manifest.json  spec plus {name, shape, offset} per tensor
//   weights.bin    little-endian f64 tensors, row-major, concatenated
//   vocab.json     tokenizer vocabulary as a JSON list

#include <filesystem>
#include <stdexcept>

#include "equilens/transformer.hpp"

namespace equilens {

class WeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

}  // namespace equilens

#endif  // EQUILENS_WEIGHTS_IO_HPP_
