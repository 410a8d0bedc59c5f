#pragma once

#include <string>

#include "mfs/core/binary_io.hpp"
#include "mfs/dataset/sample.hpp"

namespace mfs::dataset {

// MFDS, version 1 (little-endian):
//   "MFDS" | version u32 | H u32 | W u32 | T_out u32 | n_samples u64 |
//   norm_mean f64 | norm_std f64 |
//   ledger f64[6] = budget, unit_cost_2d, unit_cost_1d, unit_cost_high_freq,
//                   spent, measured (0 or 1) |
//   per sample: fidelity u8 | cost f32 | seed u64 | input f32[H*W] |
//               target f32[T_out*H*W]
// Class counts are not stored; they are recounted from the fidelity tags.

inline constexpr std::uint32_t kDatasetVersion = 1;

inline void encode_dataset(const Dataset& d, io::Writer& w) {
  d.validate();
  w.magic("MFDS");
  w.put(kDatasetVersion);
  w.put(static_cast<std::uint32_t>(d.height));
  w.put(static_cast<std::uint32_t>(d.width));
  w.put(static_cast<std::uint32_t>(d.t_out));
  w.put(static_cast<std::uint64_t>(d.samples.size()));
  w.put(d.normalization.mean);
  w.put(d.normalization.std);
  const auto& l = d.ledger;
  for (double v : {l.budget_seconds, l.unit_cost_2d, l.unit_cost_1d, l.unit_cost_high_freq, l.spent_seconds,
                   l.measured_costs ? 1.0 : 0.0})
    w.put(v);
  for (const auto& s : d.samples) {
    w.put(static_cast<std::uint8_t>(s.fidelity));
    w.put(s.cost_seconds);
    w.put(s.seed);
    w.put_array(std::span<const float>(s.input));
    w.put_array(std::span<const float>(s.target));
  }
}

inline Dataset decode_dataset(io::Reader& r) {
  r.expect_magic("MFDS");
  const auto version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kDatasetVersion)
    throw FormatError("unsupported MFDS version " + std::to_string(version), version_at);

  Dataset d;
  d.height = static_cast<int>(r.get<std::uint32_t>("H"));
  d.width = static_cast<int>(r.get<std::uint32_t>("W"));
  d.t_out = static_cast<int>(r.get<std::uint32_t>("T_out"));
  const auto n = r.get<std::uint64_t>("n_samples");
  const auto norm_at = r.offset();
  d.normalization.mean = r.get<double>("norm_mean");
  d.normalization.std = r.get<double>("norm_std");
  if (!(d.normalization.std > 0.0)) throw FormatError("normalization std must be positive", norm_at);

  auto& l = d.ledger;
  l.budget_seconds = r.get<double>("ledger");
  l.unit_cost_2d = r.get<double>("ledger");
  l.unit_cost_1d = r.get<double>("ledger");
  l.unit_cost_high_freq = r.get<double>("ledger");
  l.spent_seconds = r.get<double>("ledger");
  l.measured_costs = r.get<double>("ledger") != 0.0;

  const std::uint64_t pixels = static_cast<std::uint64_t>(d.height) * d.width;
  const std::uint64_t per_sample = 1 + 4 + 8 + 4 * pixels * (1 + static_cast<std::uint64_t>(d.t_out));
  if (n > r.remaining() / per_sample) throw FormatError("truncated file while reading samples", r.offset());
  d.samples.resize(n);
  for (auto& s : d.samples) {
    const auto at = r.offset();
    const auto tag = r.get<std::uint8_t>("fidelity");
    if (tag > 2) throw FormatError("invalid fidelity tag " + std::to_string(tag), at);
    s.fidelity = static_cast<Fidelity>(tag);
    s.cost_seconds = r.get<float>("cost");
    s.seed = r.get<std::uint64_t>("seed");
    s.input.resize(pixels);
    s.target.resize(pixels * d.t_out);
    r.get_array(std::span<float>(s.input), "input");
    const auto target_at = r.offset();
    r.get_array(std::span<float>(s.target), "target");
    for (float v : s.target)
      if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("target value outside [0, 1]", target_at);
    ++l.counts[tag];
  }
  r.expect_end();
  return d;
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  io::Writer w;
  encode_dataset(d, w);
  w.write_file(path);
}

inline Dataset load_dataset(const std::string& path) {
  auto r = io::Reader::from_file(path);
  return decode_dataset(r);
}

}  // namespace mfs::dataset
