#pragma once

#include <chrono>
#include <span>
#include <string>
#include <vector>

#include "mfs/core/parallel.hpp"
#include "mfs/core/rng.hpp"
#include "mfs/randfield/kl_basis.hpp"
#include "mfs/surrogate/train.hpp"
#include "mfs/uq/breakthrough.hpp"

namespace mfs::uq {

struct EstimatorOptions {
  ProbeOptions probe;
  int threads = 0;
  /// Charged per Monte Carlo run.
  double unit_cost_2d = 311.0;
  /// Forward passes per batched predict call.
  int chunk = 64;
};

struct Estimate {
  std::vector<BreakthroughSample> samples;
  /// Ledger charge: runs x unit_cost_2d for Monte Carlo, wall time for the surrogate.
  double cost_seconds = 0.0;
  double wall_seconds = 0.0;
};

namespace stream {
inline constexpr std::uint64_t kMonteCarlo = 0x4D43;
inline constexpr std::uint64_t kSurrogate = 0x4E4E;
inline constexpr std::uint64_t kPilot = 0x504C;
}  // namespace stream

/// Field seed of Monte Carlo run `i`.
inline std::uint64_t mc_field_seed(std::uint64_t seed, std::uint64_t i) {
  return derive_seed(seed, stream::kMonteCarlo, i);
}

/// Field seed of surrogate pass `i`.
inline std::uint64_t surrogate_field_seed(std::uint64_t seed, std::uint64_t i) {
  return derive_seed(seed, stream::kSurrogate, i);
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<BreakthroughSample> solve_runs(const solver::FlowConfig& flow, const randfield::KlBasis& basis,
                                                  std::size_t n, const ProbeOptions& probe, int threads,
                                                  std::uint64_t (*seed_of)(std::uint64_t, std::uint64_t),
                                                  std::uint64_t seed) {
  if (!basis.grid.same_shape(flow.grid)) throw ArgumentError("basis grid does not match the flow grid");
  std::vector<BreakthroughSample> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      const auto field = randfield::sample_field(basis, seed_of(seed, i));
      out[i] = breakthrough_time(solver::simulate(field, flow), probe, Source::Solver2D);
    } catch (const NumericalError& e) {
      throw NumericalError("run " + std::to_string(i) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ArgumentError("run " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace detail

/// `n_runs` independent solves on independently sampled fields.
inline Estimate mc_estimate(const solver::FlowConfig& flow, const randfield::KlBasis& basis, std::size_t n_runs,
                            std::uint64_t seed, const EstimatorOptions& opt = {}) {
  if (n_runs < 1) throw ArgumentError("mc_estimate: n_runs must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  Estimate e;
  e.samples = detail::solve_runs(flow, basis, n_runs, opt.probe, opt.threads, mc_field_seed, seed);
  e.wall_seconds = detail::seconds_since(t0);
  e.cost_seconds = static_cast<double>(n_runs) * opt.unit_cost_2d;
  return e;
}

/// Breakthrough times from `n_passes` surrogate predictions on sampled
/// fields. `times` are the snapshot times of the model's output channels;
/// the probe sits on a grid of the basis's shape and lengths.
inline Estimate surrogate_estimate(const surrogate::ModelParams<float>& model, const randfield::KlBasis& basis,
                                   std::span<const double> times, std::size_t n_passes, std::uint64_t seed,
                                   const EstimatorOptions& opt = {}) {
  const Grid& g = basis.grid;
  if (g.dim != Dim::D2) throw ArgumentError("surrogate_estimate: needs a 2D basis");
  model.arch.check_input(g.ny, g.nx);
  if (static_cast<std::size_t>(model.arch.output_channels) != times.size())
    throw ArgumentError("surrogate_estimate: model has " + std::to_string(model.arch.output_channels) +
                        " output channels but " + std::to_string(times.size()) + " snapshot times were given");
  if (opt.chunk < 1) throw ArgumentError("surrogate_estimate: chunk must be positive");

  Estimate e;
  e.samples.resize(n_passes);
  const std::size_t cells = g.cells();
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t start = 0; start < n_passes; start += opt.chunk) {
    const std::size_t count = std::min<std::size_t>(opt.chunk, n_passes - start);
    std::vector<float> inputs(count * cells);
    for (std::size_t k = 0; k < count; ++k) {
      const auto field = randfield::sample_field(basis, surrogate_field_seed(seed, start + k));
      std::copy(field.log_values.begin(), field.log_values.end(), inputs.begin() + k * cells);
    }
    const auto y = surrogate::predict(model, std::span<const float>(inputs), g.ny, g.nx, opt.threads);
    parallel_for(count, opt.threads, [&](std::size_t k) {
      solver::SaturationSeries s;
      s.grid = g;
      s.times.assign(times.begin(), times.end());
      const auto* p = y.data() + k * times.size() * cells;
      s.snapshots.assign(p, p + times.size() * cells);
      e.samples[start + k] = breakthrough_time(s, opt.probe, Source::Surrogate);
    });
  }
  e.wall_seconds = detail::seconds_since(t0);
  e.cost_seconds = e.wall_seconds;
  return e;
}

struct HorizonCalibration {
  solver::FlowConfig flow;
  double censored_fraction = 0.0;
  bool doubled = false;
};

/// Pilot batch on the pilot seed stream; t_end (with the same number of
/// uniform snapshots) is doubled once if more than `max_censored` of the
/// pilot never breaks through.
inline HorizonCalibration calibrate_horizon(const solver::FlowConfig& flow, const randfield::KlBasis& basis,
                                            std::size_t pilot_runs, std::uint64_t seed, const ProbeOptions& probe = {},
                                            int threads = 0, double max_censored = 0.01) {
  if (pilot_runs < 1) throw ArgumentError("calibrate_horizon: pilot_runs must be at least 1");
  auto pilot_seed = [](std::uint64_t s, std::uint64_t i) { return derive_seed(s, stream::kPilot, i); };
  const auto runs = detail::solve_runs(flow, basis, pilot_runs, probe, threads, pilot_seed, seed);
  HorizonCalibration h;
  h.flow = flow;
  h.censored_fraction = static_cast<double>(censored_count(runs)) / static_cast<double>(pilot_runs);
  if (h.censored_fraction > max_censored) {
    h.flow = flow.with_horizon(2.0 * flow.t_end);
    h.doubled = true;
  }
  return h;
}

/// Throws when more than `max_fraction` of the reference is censored.
inline void check_reference_censoring(std::span<const BreakthroughSample> reference, double max_fraction = 0.02) {
  const double f = reference.empty() ? 1.0 : static_cast<double>(censored_count(reference)) / reference.size();
  if (f > max_fraction)
    throw EstimationError("reference censoring " + std::to_string(100.0 * f) + "% exceeds " +
                          std::to_string(100.0 * max_fraction) + "%; increase t_end");
}

}  // namespace mfs::uq
