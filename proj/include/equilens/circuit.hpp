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

#ifndef EQUILENS_CIRCUIT_HPP_
#define EQUILENS_CIRCUIT_HPP_

// Planted-circuit constructor: weights whose opponent encoding, override
// layer and cooperative direction are known by construction.
//
// Every token embedding carries a large constant anchor coordinate, so the
// RMS norm at each position is nearly constant and the MLPs and attention
// heads act linearly on the remaining coordinates. Planted structure:
//   - opp_axis holds +1 (opponent's last action was action 1) or -1 at the
//     decision token and is scaled by `attenuation` in every block;
//   - coop_axis starts at -nash_bias plus an own-history term, receives
//     `override_strength` in every block whose output layer is >=
//     override_layer, and loses `final_correction` in the last block;
//   - the unembedding maps +coop_axis toward action 0 (Cooperate).
// Head 0 of every block tracks opponent-action positions with a zero
// output projection; head 1 mixes positional jitter into opp_axis; head 2
// of block 0 averages the agent's own actions onto coop_axis.

#include <cstdint>
#include <string>
#include <vector>

#include "equilens/tokenizer.hpp"
#include "equilens/transformer.hpp"
#include "json.hpp"

namespace equilens {

enum class Readout {
  kLogistic,
  // P(action 0) is a clipped linear function of the final coop value.
  kLinearProbability,
};

struct SyntheticCircuitConfig {
  int opp_axis = 0;
  int coop_axis = 1;
  double attenuation = 0.7;
  int override_layer = 6;
  double override_strength = 7.0;
  double final_correction = 19.5;
  double noise_scale = 0.05;

  double nash_bias = 3.5;
  double habit_strength = 5.0;
  double readout_gain = 0.1;
  double mixer_gain = 2.0;
  // Route the whole override through one attention head (block
  // override_layer - 1, head 3) that reads opponent-action positions.
  bool localized_override = false;
  Readout readout = Readout::kLogistic;
  double ramp_halfwidth = 28.0;
  double ramp_floor = 0.002;

  void validate(const ModelSpec& spec) const;
  nlohmann::ordered_json to_json() const;
};

// Overlays the keys of `j` on `base`; unknown keys throw ModelError.
SyntheticCircuitConfig circuit_config_from_json(const nlohmann::json& j,
                                                SyntheticCircuitConfig base = {});

// Presets.
SyntheticCircuitConfig instruct_like_circuit();
SyntheticCircuitConfig base_like_circuit();
SyntheticCircuitConfig clamp_calibrated_circuit();
SyntheticCircuitConfig head_localized_circuit();
SyntheticCircuitConfig circuit_preset(const std::string& name);
std::vector<std::string> circuit_preset_names();

struct CircuitLayout {
  int anchor = 0;
  int marker_theirs = 0;
  int marker_my_defect = 0;
  int my_action = 0;
  int jitter = 0;
  int opp = 0;
  int coop = 0;
  std::vector<int> free_axes;
};

CircuitLayout circuit_layout(const ModelSpec& spec, const SyntheticCircuitConfig& cfg);

// Standard spec over the standard tokenizer vocabulary.
ModelSpec default_model_spec();

Model build_synthetic_circuit(const ModelSpec& spec, const SyntheticCircuitConfig& cfg,
                              std::uint64_t seed);

}  // namespace equilens

#endif  // EQUILENS_CIRCUIT_HPP_
