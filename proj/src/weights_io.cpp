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

#include "equilens/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace equilens {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t to_little(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((x >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  }
}

// Visits every tensor of the model in a fixed order.
template <typename M, typename F>
void for_each_tensor(M& model, F&& f) {
  f("token_embedding", model.token_embedding);
  f("pos_embedding", model.pos_embedding);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    auto& blk = model.blocks[b];
    const std::string p = "blocks." + std::to_string(b) + ".";
    f(p + "attn_gain", blk.attn_gain);
    for (std::size_t h = 0; h < blk.w_q.size(); ++h) {
      const std::string hp = p + "heads." + std::to_string(h) + ".";
      f(hp + "w_q", blk.w_q[h]);
      f(hp + "w_k", blk.w_k[h]);
      f(hp + "w_v", blk.w_v[h]);
      f(hp + "w_o", blk.w_o[h]);
    }
    f(p + "mlp_gain", blk.mlp_gain);
    f(p + "w_in", blk.w_in);
    f(p + "b_in", blk.b_in);
    f(p + "w_out", blk.w_out);
    f(p + "b_out", blk.b_out);
  }
  f("unembedding", model.unembedding);
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw WeightsError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw WeightsError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw WeightsError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_model(const Model& model, const fs::path& dir) {
  model.spec.validate();
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["format"] = "equilens-weights/1";
  manifest["spec"] = {{"n_layers", model.spec.n_layers},
                      {"d_model", model.spec.d_model},
                      {"n_heads", model.spec.n_heads},
                      {"d_ff", model.spec.d_ff},
                      {"max_context", model.spec.max_context}};
  manifest["tensors"] = ordered_json::array();

  std::ofstream bin(dir / "weights.bin", std::ios::binary);
  if (!bin) throw WeightsError("cannot write " + (dir / "weights.bin").string());
  std::uint64_t offset = 0;
  for_each_tensor(model, [&](const std::string& name, const auto& t) {
    const auto rows = static_cast<std::uint64_t>(t.rows());
    const auto cols = static_cast<std::uint64_t>(t.cols());
    ordered_json entry;
    entry["name"] = name;
    constexpr bool is_vector = std::decay_t<decltype(t)>::ColsAtCompileTime == 1;
    entry["shape"] = is_vector ? ordered_json::array({rows}) : ordered_json::array({rows, cols});
    entry["offset"] = offset;
    manifest["tensors"].push_back(entry);
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(t(r, c)));
        bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
      }
    }
    offset += rows * cols * 8;
  });
  if (!bin) throw WeightsError("write failed: " + (dir / "weights.bin").string());
  write_json(dir / "manifest.json", manifest);
  write_json(dir / "vocab.json", ordered_json(model.spec.vocab));
}

Model load_model(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  const json vocab = read_json(dir / "vocab.json");
  ModelSpec spec;
  try {
    if (manifest.at("format") != "equilens-weights/1") {
      throw WeightsError("unsupported weights format");
    }
    const auto& s = manifest.at("spec");
    spec.n_layers = s.at("n_layers").get<int>();
    spec.d_model = s.at("d_model").get<int>();
    spec.n_heads = s.at("n_heads").get<int>();
    spec.d_ff = s.at("d_ff").get<int>();
    spec.max_context = s.at("max_context").get<int>();
    spec.vocab = vocab.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw WeightsError((dir / "manifest.json").string() + ": " + e.what());
  }
  try {
    spec.validate();
  } catch (const ModelError& e) {
    throw WeightsError((dir / "manifest.json").string() + ": " + e.what());
  }
  Model model = Model::zeros(spec);

  std::ifstream bin(dir / "weights.bin", std::ios::binary);
  if (!bin) throw WeightsError("cannot read " + (dir / "weights.bin").string());
  std::vector<char> data((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  const auto& tensors = manifest.at("tensors");
  std::size_t i = 0;
  for_each_tensor(model, [&](const std::string& name, auto& t) {
    if (i >= tensors.size() || tensors[i].at("name") != name) {
      throw WeightsError("manifest: expected tensor '" + name + "'");
    }
    const auto& shape = tensors[i].at("shape");
    const auto rows = shape.at(0).get<std::uint64_t>();
    const auto cols = shape.size() > 1 ? shape.at(1).get<std::uint64_t>() : 1;
    if (rows != static_cast<std::uint64_t>(t.rows()) ||
        cols != static_cast<std::uint64_t>(t.cols())) {
      throw WeightsError("manifest: tensor '" + name + "' has the wrong shape");
    }
    const auto offset = tensors[i].at("offset").get<std::uint64_t>();
    if (offset + rows * cols * 8 > data.size()) {
      throw WeightsError("weights.bin: truncated at tensor '" + name + "'");
    }
    std::size_t pos = offset;
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, data.data() + pos, sizeof bits);
        t(r, c) = std::bit_cast<double>(to_little(bits));
        pos += 8;
      }
    }
    ++i;
  });
  if (i != tensors.size()) throw WeightsError("manifest: unexpected extra tensors");
  return model;
}

}  // namespace equilens
