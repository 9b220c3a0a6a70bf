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

#include "equilens/transformer.hpp"

namespace equilens {

void ModelSpec::validate() const {
  if (n_layers < 1) throw ModelError("model: n_layers must be >= 1");
  if (d_model < 1 || n_heads < 1) throw ModelError("model: d_model and n_heads must be >= 1");
  if (d_model % n_heads != 0) throw ModelError("model: d_model must be divisible by n_heads");
  if (d_ff < 1) throw ModelError("model: d_ff must be >= 1");
  if (max_context < 1) throw ModelError("model: max_context must be >= 1");
  if (vocab.empty()) throw ModelError("model: empty vocabulary");
}

template struct BasicModel<double>;
template ForwardResult<double> forward<double>(const BasicModel<double>&, std::span<const int>,
                                               const BasicHookPlan<double>&, std::optional<int>,
                                               AttentionPatterns<double>*);

}  // namespace equilens
