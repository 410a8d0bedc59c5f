#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mfs/core/errors.hpp"

namespace mfs::dataset {

enum class Fidelity : std::uint8_t { High2D = 0, Low1DLowFreq = 1, Low1DHighFreq = 2 };

inline const char* to_string(Fidelity f) {
  switch (f) {
    case Fidelity::High2D: return "high2d";
    case Fidelity::Low1DLowFreq: return "low1d-lowfreq";
    case Fidelity::Low1DHighFreq: return "low1d-highfreq";
  }
  return "unknown";
}

/// One training example. `input` holds ln k as an H x W row-major image
/// (row = x2 index); the model standardizes it with the dataset's
/// normalization. `target` holds T_out saturation snapshots, time-major.
struct SamplePair {
  Fidelity fidelity = Fidelity::High2D;
  float cost_seconds = 0.0f;
  std::uint64_t seed = 0;
  std::vector<float> input;
  std::vector<float> target;

  bool operator==(const SamplePair&) const = default;
};

struct Normalization {
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const Normalization&) const = default;
};

/// Per-sample generation costs in seconds.
struct UnitCosts {
  double high_2d = 311.0;
  double low_1d = 1.5;
  /// Cost of one high-frequency lift; <= 0 means height * low_1d.
  double high_freq_override = 0.0;
  bool measured = false;

  double high_freq(int height) const {
    return high_freq_override > 0.0 ? high_freq_override : height * low_1d;
  }
};

struct BudgetLedger {
  double budget_seconds = 0.0;
  double unit_cost_2d = 0.0;
  double unit_cost_1d = 0.0;
  double unit_cost_high_freq = 0.0;
  double spent_seconds = 0.0;
  bool measured_costs = false;
  /// Indexed by Fidelity.
  std::array<std::uint64_t, 3> counts{0, 0, 0};

  double unit_cost(Fidelity f) const {
    switch (f) {
      case Fidelity::High2D: return unit_cost_2d;
      case Fidelity::Low1DLowFreq: return unit_cost_1d;
      case Fidelity::Low1DHighFreq: return unit_cost_high_freq;
    }
    return 0.0;
  }

  double implied_spend() const {
    double s = 0.0;
    for (int f = 0; f < 3; ++f) s += static_cast<double>(counts[f]) * unit_cost(static_cast<Fidelity>(f));
    return s;
  }

  bool operator==(const BudgetLedger&) const = default;
};

struct Dataset {
  int height = 0;
  int width = 0;
  int t_out = 0;
  std::vector<SamplePair> samples;
  Normalization normalization;
  BudgetLedger ledger;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height) * width; }

  std::uint64_t count(Fidelity f) const {
    std::uint64_t n = 0;
    for (const auto& s : samples) n += s.fidelity == f;
    return n;
  }

  void validate() const {
    if (height < 0 || width < 0 || t_out < 0) throw ArgumentError("dataset: negative shape");
    if (!(normalization.std > 0.0)) throw ArgumentError("dataset: normalization std must be positive");
    for (const auto& s : samples) {
      if (s.input.size() != pixels() || s.target.size() != pixels() * t_out)
        throw ArgumentError("dataset: sample shape does not match the dataset header");
      for (float v : s.input)
        if (!std::isfinite(v)) throw ArgumentError("dataset: non-finite input value");
      for (float v : s.target)
        if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("dataset: target value outside [0, 1]");
    }
  }

  bool operator==(const Dataset&) const = default;
};

/// Population mean and standard deviation of all input pixels. Falls back to
/// std = 1 when the inputs are constant.
inline Normalization compute_normalization(const std::vector<SamplePair>& samples) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    for (float v : s.input) sum += v;
    n += s.input.size();
  }
  if (n == 0) return {};
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& s : samples)
    for (float v : s.input) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  return {mean, sd > 0.0 ? sd : 1.0};
}

/// Samples of `d` whose fidelity satisfies `keep`, same header and ledger.
template <typename Pred>
Dataset select(const Dataset& d, Pred keep) {
  Dataset out{d.height, d.width, d.t_out, {}, d.normalization, d.ledger};
  for (const auto& s : d.samples)
    if (keep(s.fidelity)) out.samples.push_back(s);
  return out;
}

}  // namespace mfs::dataset
