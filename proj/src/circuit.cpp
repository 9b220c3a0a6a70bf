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

#include "equilens/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "equilens/rng.hpp"

namespace equilens {
namespace {

constexpr double kAnchor = 1e4;
constexpr double kTrackerGap = 10.0;
constexpr double kMixerGap = 3.0;
constexpr double kCopyGap = 12.0;
constexpr int kRampSegments = 60;

constexpr int kTracker = 0;
constexpr int kMixer = 1;
constexpr int kHabit = 2;
constexpr int kCopy = 3;

struct Ramp {
  std::vector<double> knots;
  std::vector<double> values;

  double slope(std::size_t seg) const {
    return (values[seg + 1] - values[seg]) / (knots[seg + 1] - knots[seg]);
  }
};

// Final coop value as a function of z such that the readout probability of
// action 0 is floor + (1 - 2 floor)(z + hw)/(2 hw) on [-hw, hw].
Ramp make_ramp(const SyntheticCircuitConfig& cfg) {
  Ramp r;
  const double hw = cfg.ramp_halfwidth;
  for (int i = 0; i <= kRampSegments; ++i) {
    const double z = -hw + 2.0 * hw * i / kRampSegments;
    const double p = cfg.ramp_floor + (1.0 - 2.0 * cfg.ramp_floor) * (z + hw) / (2.0 * hw);
    r.knots.push_back(z);
    r.values.push_back(std::log(p / (1.0 - p)) / (2.0 * cfg.readout_gain));
  }
  return r;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ModelError("circuit: " + msg);
}

}  // namespace

void SyntheticCircuitConfig::validate(const ModelSpec& spec) const {
  spec.validate();
  const int d = spec.d_model;
  require(opp_axis >= 0 && opp_axis < d, "opp_axis out of range");
  require(coop_axis >= 0 && coop_axis < d, "coop_axis out of range");
  require(opp_axis != coop_axis, "opp_axis and coop_axis collide");
  require(d >= 8, "d_model must be >= 8");
  require(spec.n_heads >= (localized_override ? 4 : 3), "too few heads for the planted circuit");
  require(override_layer >= 1 && override_layer < spec.n_layers,
          "override_layer must satisfy 1 <= override_layer < n_layers");
  require(attenuation > 0.0 && attenuation <= 1.0, "attenuation must lie in (0, 1]");
  require(noise_scale >= 0.0, "noise_scale must be >= 0");
  require(readout_gain > 0.0, "readout_gain must be > 0");
  require(std::isfinite(override_strength) && std::isfinite(final_correction) &&
              std::isfinite(nash_bias) && std::isfinite(habit_strength) &&
              std::isfinite(mixer_gain),
          "non-finite parameter");
  if (readout == Readout::kLinearProbability) {
    require(ramp_halfwidth > 0.0, "ramp_halfwidth must be > 0");
    require(ramp_floor > 0.0 && ramp_floor < 0.5, "ramp_floor must lie in (0, 0.5)");
    require(spec.d_ff >= kRampSegments + 3, "d_ff too small for the linear readout");
  } else {
    require(spec.d_ff >= 2, "d_ff must be >= 2");
  }
}

nlohmann::ordered_json SyntheticCircuitConfig::to_json() const {
  nlohmann::ordered_json j;
  j["opp_axis"] = opp_axis;
  j["coop_axis"] = coop_axis;
  j["attenuation"] = attenuation;
  j["override_layer"] = override_layer;
  j["override_strength"] = override_strength;
  j["final_correction"] = final_correction;
  j["noise_scale"] = noise_scale;
  j["nash_bias"] = nash_bias;
  j["habit_strength"] = habit_strength;
  j["readout_gain"] = readout_gain;
  j["mixer_gain"] = mixer_gain;
  j["localized_override"] = localized_override;
  j["readout"] = readout == Readout::kLogistic ? "logistic" : "linear_probability";
  j["ramp_halfwidth"] = ramp_halfwidth;
  j["ramp_floor"] = ramp_floor;
  return j;
}

SyntheticCircuitConfig circuit_config_from_json(const nlohmann::json& j,
                                                SyntheticCircuitConfig c) {
  if (!j.is_object()) throw ModelError("circuit: expected an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "opp_axis") c.opp_axis = v.get<int>();
      else if (key == "coop_axis") c.coop_axis = v.get<int>();
      else if (key == "attenuation") c.attenuation = v.get<double>();
      else if (key == "override_layer") c.override_layer = v.get<int>();
      else if (key == "override_strength") c.override_strength = v.get<double>();
      else if (key == "final_correction") c.final_correction = v.get<double>();
      else if (key == "noise_scale") c.noise_scale = v.get<double>();
      else if (key == "nash_bias") c.nash_bias = v.get<double>();
      else if (key == "habit_strength") c.habit_strength = v.get<double>();
      else if (key == "readout_gain") c.readout_gain = v.get<double>();
      else if (key == "mixer_gain") c.mixer_gain = v.get<double>();
      else if (key == "localized_override") c.localized_override = v.get<bool>();
      else if (key == "ramp_halfwidth") c.ramp_halfwidth = v.get<double>();
      else if (key == "ramp_floor") c.ramp_floor = v.get<double>();
      else if (key == "readout") {
        const auto s = v.get<std::string>();
        if (s == "logistic") c.readout = Readout::kLogistic;
        else if (s == "linear_probability") c.readout = Readout::kLinearProbability;
        else throw ModelError("circuit.readout: unknown value '" + s + "'");
      } else {
        throw ModelError("circuit." + key + ": unknown key");
      }
    } catch (const nlohmann::json::exception&) {
      throw ModelError("circuit." + key + ": wrong type");
    }
  }
  return c;
}

SyntheticCircuitConfig instruct_like_circuit() { return {}; }

SyntheticCircuitConfig base_like_circuit() {
  SyntheticCircuitConfig c;
  c.final_correction = 0.0;
  c.readout_gain = 0.5;
  return c;
}

SyntheticCircuitConfig clamp_calibrated_circuit() {
  SyntheticCircuitConfig c;
  c.readout = Readout::kLinearProbability;
  c.final_correction = c.override_strength * (8 - c.override_layer + 1);
  return c;
}

SyntheticCircuitConfig head_localized_circuit() {
  SyntheticCircuitConfig c;
  c.localized_override = true;
  return c;
}

std::vector<std::string> circuit_preset_names() {
  return {"instruct_like", "base_like", "clamp_calibrated", "head_localized"};
}

SyntheticCircuitConfig circuit_preset(const std::string& name) {
  if (name == "instruct_like") return instruct_like_circuit();
  if (name == "base_like") return base_like_circuit();
  if (name == "clamp_calibrated") return clamp_calibrated_circuit();
  if (name == "head_localized") return head_localized_circuit();
  throw ModelError("circuit: unknown preset '" + name + "'");
}

CircuitLayout circuit_layout(const ModelSpec& spec, const SyntheticCircuitConfig& cfg) {
  cfg.validate(spec);
  CircuitLayout lay;
  lay.opp = cfg.opp_axis;
  lay.coop = cfg.coop_axis;
  std::vector<int> spare;
  for (int i = 0; i < spec.d_model; ++i) {
    if (i != lay.opp && i != lay.coop) spare.push_back(i);
  }
  lay.anchor = spare[0];
  lay.marker_theirs = spare[1];
  lay.marker_my_defect = spare[2];
  lay.my_action = spare[3];
  lay.jitter = spare[4];
  lay.free_axes.assign(spare.begin() + 5, spare.end());
  return lay;
}

ModelSpec default_model_spec() {
  ModelSpec spec;
  spec.vocab = Tokenizer::standard().vocab();
  return spec;
}

Model build_synthetic_circuit(const ModelSpec& spec, const SyntheticCircuitConfig& cfg,
                              std::uint64_t seed) {
  const CircuitLayout lay = circuit_layout(spec, cfg);
  const Tokenizer tok(spec.vocab);
  const int d = spec.d_model;
  const int L = spec.n_layers;
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const double sqrt_dh = std::sqrt(static_cast<double>(spec.d_head()));
  // Unit of a normalized coordinate: a residual value of 1 normalizes to
  // about sqrt(d) / kAnchor.
  const double unit = sqrt_d / kAnchor;

  Model m = Model::zeros(spec);
  Rng rng(derive_seed(seed, "circuit"));
  auto noise = [&](Eigen::Ref<Eigen::VectorXd> row) {
    for (int a : lay.free_axes) row(a) = cfg.noise_scale * rng.normal();
  };

  Eigen::VectorXd mine_noise = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd theirs_noise = Eigen::VectorXd::Zero(d);
  noise(mine_noise);
  noise(theirs_noise);

  for (int t = 0; t < spec.vocab_size(); ++t) {
    auto row = m.token_embedding.row(t).transpose();
    const TokenInfo info = tok.classify(t);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e(lay.anchor) = kAnchor;
    e(lay.coop) = -cfg.nash_bias;
    switch (info.cls) {
      case TokenClass::kTheirs:
        e += theirs_noise;
        e(lay.marker_theirs) = 1.0;
        e(lay.opp) = info.action == 1 ? 1.0 : -1.0;
        break;
      case TokenClass::kMine:
        e += mine_noise;
        e(lay.my_action) = info.action == 0 ? 1.0 : -1.0;
        e(lay.marker_my_defect) = info.action == 1 ? 1.0 : 0.0;
        break;
      default:
        noise(e);
        break;
    }
    row = e;
  }
  for (int p = 0; p < spec.max_context; ++p) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    noise(e);
    e(lay.jitter) = cfg.noise_scale * rng.normal();
    m.pos_embedding.row(p) = e.transpose();
  }

  auto key_gain = [&](double gap) { return gap * sqrt_dh / (sqrt_d * unit); };
  const double s = cfg.localized_override ? 0.0 : cfg.override_strength;
  const double total_override = cfg.override_strength * (L - cfg.override_layer + 1);
  double coop_level = -cfg.nash_bias;

  for (int b = 0; b < L; ++b) {
    auto& blk = m.blocks[static_cast<std::size_t>(b)];

    blk.w_q[kTracker](lay.anchor, 0) = 1.0;
    blk.w_k[kTracker](lay.marker_theirs, 0) = key_gain(kTrackerGap);

    blk.w_q[kMixer](lay.anchor, 0) = 1.0;
    blk.w_k[kMixer](lay.marker_my_defect, 0) = key_gain(kMixerGap);
    blk.w_v[kMixer](lay.jitter, 0) = 1.0;
    blk.w_o[kMixer](0, lay.opp) = cfg.mixer_gain / unit;

    if (b == 0) {
      blk.w_v[kHabit](lay.my_action, 0) = 1.0;
      blk.w_o[kHabit](0, lay.coop) = cfg.habit_strength / unit;
    }
    if (cfg.localized_override && b == cfg.override_layer - 1) {
      blk.w_q[kCopy](lay.anchor, 0) = 1.0;
      blk.w_k[kCopy](lay.marker_theirs, 0) = key_gain(kCopyGap);
      blk.w_v[kCopy](lay.marker_theirs, 0) = 1.0;
      blk.w_o[kCopy](0, lay.coop) = total_override / unit;
      coop_level += total_override;
    }

    // Residual scale at this MLP's input, used to undo the normalization.
    const double scale = std::sqrt((kAnchor * kAnchor + coop_level * coop_level + 1.0) / d);

    blk.w_in(lay.opp, 0) = 1.0;
    blk.w_in(lay.opp, 1) = -1.0;
    blk.w_out(0, lay.opp) = (cfg.attenuation - 1.0) * scale;
    blk.w_out(1, lay.opp) = -(cfg.attenuation - 1.0) * scale;

    const bool last = b == L - 1;
    const bool overrides = b + 1 >= cfg.override_layer;
    if (!last || cfg.readout == Readout::kLogistic) {
      if (overrides) blk.b_out(lay.coop) += s;
      if (last) blk.b_out(lay.coop) -= cfg.final_correction;
      if (overrides) coop_level += s;
      continue;
    }

    // Linear-probability readout: coop_out = F(z) with z = x + shift, where
    // x is the coop value entering the MLP; implemented as a ReLU
    // interpolant of F.
    const Ramp ramp = make_ramp(cfg);
    const double shift = (overrides ? s : 0.0) - cfg.final_correction;
    const double s0 = ramp.slope(0);
    int unit_idx = 2;
    blk.w_in(lay.coop, unit_idx) = 1.0;
    blk.w_out(unit_idx, lay.coop) = (s0 - 1.0) * scale;
    ++unit_idx;
    blk.w_in(lay.coop, unit_idx) = -1.0;
    blk.w_out(unit_idx, lay.coop) = -(s0 - 1.0) * scale;
    ++unit_idx;
    for (int i = 1; i < kRampSegments; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double theta = ramp.knots[ui] - shift;
      blk.w_in(lay.coop, unit_idx) = 1.0;
      blk.w_in(lay.anchor, unit_idx) = -theta / kAnchor;
      blk.w_out(unit_idx, lay.coop) = (ramp.slope(ui) - ramp.slope(ui - 1)) * scale;
      ++unit_idx;
    }
    blk.b_out(lay.coop) = ramp.values[0] + s0 * (shift - ramp.knots[0]);
  }

  for (int t = 0; t < spec.vocab_size(); ++t) {
    const TokenInfo info = tok.classify(t);
    if (info.cls != TokenClass::kAction) continue;
    m.unembedding(lay.coop, t) = info.action == 0 ? cfg.readout_gain : -cfg.readout_gain;
  }
  return m;
}

}  // namespace equilens
