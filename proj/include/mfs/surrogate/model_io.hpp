#pragma once

#include <string>

#include "mfs/core/binary_io.hpp"
#include "mfs/surrogate/model.hpp"

namespace mfs::surrogate {

// MFNN, version 1 (little-endian):
//   "MFNN" | version u32 |
//   arch: input_channels u32 | output_channels u32 | initial_features u32 |
//         n_blocks u32 | blocks u32[n_blocks] | growth_rate u32 |
//         downsample_factor u32 | activation u8 |
//   norm_mean f64 | norm_std f64 | n_tensors u32 |
//   per tensor: name_len u16 | name | rank u8 | dims u32[rank] | f32 data

inline constexpr std::uint32_t kModelVersion = 1;

inline void encode_model(const ModelParams<float>& m, io::Writer& w) {
  m.validate();
  w.magic("MFNN");
  w.put(kModelVersion);
  const auto& a = m.arch;
  w.put(static_cast<std::uint32_t>(a.input_channels));
  w.put(static_cast<std::uint32_t>(a.output_channels));
  w.put(static_cast<std::uint32_t>(a.initial_features));
  w.put(static_cast<std::uint32_t>(a.blocks.size()));
  for (int b : a.blocks) w.put(static_cast<std::uint32_t>(b));
  w.put(static_cast<std::uint32_t>(a.growth_rate));
  w.put(static_cast<std::uint32_t>(a.downsample_factor));
  w.put(static_cast<std::uint8_t>(a.activation));
  w.put(m.normalization.mean);
  w.put(m.normalization.std);
  w.put(static_cast<std::uint32_t>(m.tensors.size()));
  for (const auto& t : m.tensors) {
    w.put_string16(t.name);
    w.put(static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) w.put(static_cast<std::uint32_t>(d));
    w.put_array(std::span<const float>(t.data));
  }
}

inline ModelParams<float> decode_model(io::Reader& r) {
  r.expect_magic("MFNN");
  const auto version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kModelVersion) throw FormatError("unsupported MFNN version " + std::to_string(version), version_at);

  ModelParams<float> m;
  auto& a = m.arch;
  const auto arch_at = r.offset();
  a.input_channels = static_cast<int>(r.get<std::uint32_t>("input_channels"));
  a.output_channels = static_cast<int>(r.get<std::uint32_t>("output_channels"));
  a.initial_features = static_cast<int>(r.get<std::uint32_t>("initial_features"));
  const auto n_blocks = r.get<std::uint32_t>("n_blocks");
  r.require(4ull * n_blocks, "blocks");
  a.blocks.resize(n_blocks);
  for (auto& b : a.blocks) b = static_cast<int>(r.get<std::uint32_t>("blocks"));
  a.growth_rate = static_cast<int>(r.get<std::uint32_t>("growth_rate"));
  a.downsample_factor = static_cast<int>(r.get<std::uint32_t>("downsample_factor"));
  const auto act = r.get<std::uint8_t>("activation");
  if (act > 1) throw FormatError("invalid activation tag", r.offset() - 1);
  a.activation = static_cast<Activation>(act);
  try {
    a.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid architecture: ") + e.what(), arch_at);
  }
  const auto norm_at = r.offset();
  m.normalization.mean = r.get<double>("norm_mean");
  m.normalization.std = r.get<double>("norm_std");
  if (!(m.normalization.std > 0.0)) throw FormatError("normalization std must be positive", norm_at);

  const auto n_tensors = r.get<std::uint32_t>("n_tensors");
  const auto specs = layer_specs(a);
  if (n_tensors != 2 * specs.size())
    throw FormatError("tensor count " + std::to_string(n_tensors) + " does not match the architecture", r.offset() - 4);
  for (std::uint32_t k = 0; k < n_tensors; ++k) {
    const auto at = r.offset();
    Tensor<float> t;
    t.name = r.get_string16("tensor name");
    const auto rank = r.get<std::uint8_t>("rank");
    std::uint64_t count = 1;
    for (int d = 0; d < rank; ++d) {
      t.shape.push_back(static_cast<int>(r.get<std::uint32_t>("dims")));
      count *= static_cast<std::uint64_t>(t.shape.back());
    }
    const auto& s = specs[k / 2];
    const auto expected = k % 2 == 0 ? std::vector<int>{s.out, s.in, s.k, s.k} : std::vector<int>{s.out};
    const auto expected_name = s.name + (k % 2 == 0 ? ".weight" : ".bias");
    if (t.name != expected_name || t.shape != expected)
      throw FormatError("tensor '" + t.name + "' does not match the architecture (expected '" + expected_name + "')", at);
    r.require(4 * count, "tensor data");
    t.data.resize(count);
    r.get_array(std::span<float>(t.data), "tensor data");
    m.tensors.push_back(std::move(t));
  }
  r.expect_end();
  return m;
}

inline void save_model(const ModelParams<float>& m, const std::string& path) {
  io::Writer w;
  encode_model(m, w);
  w.write_file(path);
}

inline ModelParams<float> load_model(const std::string& path) {
  auto r = io::Reader::from_file(path);
  return decode_model(r);
}

/// FNV-1a 64 of the serialized checkpoint, as 16 hex digits.
inline std::string model_digest(const ModelParams<float>& m) {
  io::Writer w;
  encode_model(m, w);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : w.bytes()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[i] = hex[h & 0xF];
  return s;
}

}  // namespace mfs::surrogate
