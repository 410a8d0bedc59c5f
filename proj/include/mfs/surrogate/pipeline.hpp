#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mfs/surrogate/model_io.hpp"
#include "mfs/surrogate/train.hpp"

namespace mfs::surrogate {

struct PipelineConfig {
  std::array<TrainConfig, 3> phases{TrainConfig::standard(Phase::P1), TrainConfig::standard(Phase::P2),
                                    TrainConfig::standard(Phase::P3)};

  TrainConfig& operator[](Phase p) { return phases[static_cast<int>(p) - 1]; }
  const TrainConfig& operator[](Phase p) const { return phases[static_cast<int>(p) - 1]; }

  /// Same seed, epochs and threads for every phase.
  PipelineConfig& with(std::uint64_t seed, int epochs, int threads = 1) {
    for (auto& c : phases) {
      c.seed = seed;
      c.epochs = epochs;
      c.threads = threads;
    }
    return *this;
  }
};

struct PhaseReport {
  Phase phase = Phase::P1;
  TrainHistory history;
  std::string digest;
};

struct PipelineReport {
  std::vector<PhaseReport> phases;
  /// Mean over columns of the across-row prediction variance for a
  /// row-replicated input, relative to the prediction's total variance.
  /// NaN when Phase 1 did not run on low-frequency samples.
  double lowfreq_row_variance_ratio = std::numeric_limits<double>::quiet_NaN();
};

struct PipelineResult {
  ModelParams<float> model;
  /// Checkpoints after each completed phase, in phase order.
  std::vector<ModelParams<float>> checkpoints;
  PipelineReport report;
};

/// Across-row variance of the prediction for one input image, averaged over
/// columns and channels, divided by the variance of all predicted values.
inline double row_variance_ratio(const ModelParams<float>& m, const dataset::SamplePair& s, int height, int width) {
  const auto y = predict(m, std::span<const float>(s.input), height, width);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const std::size_t channels = y.size() / plane;
  double within = 0.0, mean = 0.0, total = 0.0;
  for (float v : y) mean += v;
  mean /= static_cast<double>(y.size());
  for (float v : y) total += (v - mean) * (v - mean);
  total /= static_cast<double>(y.size());
  for (std::size_t c = 0; c < channels; ++c)
    for (int i = 0; i < width; ++i) {
      double mu = 0.0, ss = 0.0;
      for (int r = 0; r < height; ++r) mu += y[c * plane + static_cast<std::size_t>(r) * width + i];
      mu /= height;
      for (int r = 0; r < height; ++r) {
        const double d = y[c * plane + static_cast<std::size_t>(r) * width + i] - mu;
        ss += d * d;
      }
      within += ss / height;
    }
  within /= static_cast<double>(channels * width);
  return total > 0.0 ? within / total : 0.0;
}

namespace detail {

inline void check_compatible(const ArchitectureSpec& arch, const dataset::Dataset& d, const char* label) {
  if (d.empty()) return;
  if (d.t_out != arch.output_channels)
    throw ArgumentError(std::string(label) + ": dataset T_out does not match the architecture");
  arch.check_input(d.height, d.width);
}

template <typename Fn>
auto tag_phase(Phase p, Fn&& fn) {
  const std::string tag = "phase " + std::to_string(static_cast<int>(p)) + ": ";
  try {
    return fn();
  } catch (const TrainingError& e) {
    throw TrainingError(tag + e.what(), e.epoch());
  } catch (const ArgumentError& e) {
    throw ArgumentError(tag + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  }
}

}  // namespace detail

/// Three-phase transfer learning: (1) all layers on `low`, (2) only "head"
/// on `high`, (3) all layers on `high`. Runs phases [first, last]; when
/// first > 1, `model` is the checkpoint of the phase before `first`. When
/// starting at phase 1 the model takes the normalization of `low`.
inline PipelineResult run_transfer_pipeline(ModelParams<float> model, const dataset::Dataset& low,
                                            const dataset::Dataset& high, const PipelineConfig& config,
                                            const std::function<void(const EpochRecord&)>& on_epoch = {},
                                            int first = 1, int last = 3) {
  if (first < 1 || last > 3 || first > last) throw ArgumentError("pipeline: invalid phase range");
  detail::check_compatible(model.arch, low, "phase 1");
  detail::check_compatible(model.arch, high, "phase 2");
  if (first == 1 && low.empty()) throw ArgumentError("phase 1: empty dataset");
  if (last >= 2 && high.empty())
    throw ArgumentError(std::string("phase ") + (first <= 2 ? "2" : "3") + ": empty dataset");
  if (first == 1) model.normalization = low.normalization;

  PipelineResult out;
  for (int k = first; k <= last; ++k) {
    const auto phase = static_cast<Phase>(k);
    auto cfg = config[phase];
    cfg.phase = phase;
    const auto& data = phase == Phase::P1 ? low : high;
    const std::set<std::string> frozen = phase == Phase::P2 ? all_but_head(model) : std::set<std::string>{};
    auto r = detail::tag_phase(phase, [&] { return train_phase(std::move(model), data, cfg, frozen, on_epoch); });
    model = std::move(r.model);
    out.report.phases.push_back({phase, std::move(r.history), model_digest(model)});
    out.checkpoints.push_back(model);
    if (phase == Phase::P1) {
      for (const auto& s : low.samples)
        if (s.fidelity == dataset::Fidelity::Low1DLowFreq) {
          out.report.lowfreq_row_variance_ratio = row_variance_ratio(model, s, low.height, low.width);
          break;
        }
    }
  }
  out.model = std::move(model);
  return out;
}

/// Per-epoch CSV rows: phase,epoch,train_loss,val_loss,lr.
inline std::string history_csv(const TrainHistory& h, bool header = true) {
  std::string s = header ? "phase,epoch,train_loss,val_loss,lr\n" : "";
  char buf[160];
  for (const auto& r : h) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.9g\n", static_cast<int>(r.phase), r.epoch, r.train_loss,
                  r.val_loss, r.lr);
    s += buf;
  }
  return s;
}

}  // namespace mfs::surrogate
