#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mfs/core/parallel.hpp"
#include "mfs/core/rng.hpp"
#include "mfs/dataset/lift.hpp"
#include "mfs/dataset/sample.hpp"
#include "mfs/randfield/kl_basis.hpp"
#include "mfs/solver/simulate.hpp"

namespace mfs::dataset {

enum class LiftMode : std::uint8_t { LowFreq, HighFreq };

inline Fidelity fidelity_of(LiftMode m) {
  return m == LiftMode::LowFreq ? Fidelity::Low1DLowFreq : Fidelity::Low1DHighFreq;
}

struct GenerationConfig {
  double budget_seconds = 14'400.0;
  double split_2d = 0.5;
  LiftMode mode = LiftMode::LowFreq;
  UnitCosts costs;
  solver::FlowConfig flow;
  int threads = 0;
};

struct BudgetPlan {
  std::uint64_t high_count = 0;
  std::uint64_t low_count = 0;
  BudgetLedger ledger;
};

/// Sample counts for a budget split: floor(budget * split / c_2d) 2D solves,
/// and the rest of the budget on lifted 1D samples when split < 1.
inline BudgetPlan plan_budget(double budget, double split_2d, LiftMode mode, const UnitCosts& costs,
                              int height) {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw ArgumentError("budget must be positive");
  if (!(split_2d >= 0.0 && split_2d <= 1.0)) throw ArgumentError("split_2d must be in [0, 1]");
  if (!(costs.high_2d > 0.0) || !(costs.low_1d > 0.0)) throw ArgumentError("unit costs must be positive");
  if (height < 1) throw ArgumentError("grid height must be positive");

  BudgetPlan plan;
  auto& l = plan.ledger;
  l.budget_seconds = budget;
  l.unit_cost_2d = costs.high_2d;
  l.unit_cost_1d = costs.low_1d;
  l.unit_cost_high_freq = costs.high_freq(height);
  l.measured_costs = costs.measured;
  const Fidelity low = fidelity_of(mode);
  const double c_low = l.unit_cost(low);

  if (split_2d > 0.0) {
    plan.high_count = static_cast<std::uint64_t>(std::floor(budget * split_2d / costs.high_2d));
    if (plan.high_count == 0)
      throw ArgumentError("budget share " + std::to_string(budget * split_2d) +
                          " s is below the minimum of one 2D solve (" + std::to_string(costs.high_2d) + " s)");
  }
  if (split_2d < 1.0) {
    const double rest = budget - static_cast<double>(plan.high_count) * costs.high_2d;
    plan.low_count = static_cast<std::uint64_t>(std::floor(rest / c_low));
    if (plan.low_count == 0)
      throw ArgumentError("remaining budget " + std::to_string(rest) +
                          " s is below the minimum of one " + to_string(low) + " sample (" +
                          std::to_string(c_low) + " s)");
  }
  l.counts[static_cast<int>(Fidelity::High2D)] = plan.high_count;
  l.counts[static_cast<int>(low)] = plan.low_count;
  l.spent_seconds = l.implied_spend();
  return plan;
}

namespace detail {

inline void check_bases(const randfield::KlBasis& basis_2d, const randfield::KlBasis& basis_1d,
                        const solver::FlowConfig& flow) {
  if (!basis_2d.grid.same_shape(flow.grid)) throw ArgumentError("2D basis grid does not match the flow grid");
  if (!basis_1d.grid.same_shape(flow.line().grid))
    throw ArgumentError("1D basis grid must be a line with the flow grid's x1 resolution");
}

}  // namespace detail

/// Seed of sample `index` of class `f` under `master`.
inline std::uint64_t sample_seed(std::uint64_t master, Fidelity f, std::uint64_t index) {
  return derive_seed(master, static_cast<std::uint64_t>(f), index);
}

inline LineSolution solve_line(const randfield::KlBasis& basis_1d, const solver::FlowConfig& line_flow,
                               std::uint64_t seed) {
  auto field = randfield::sample_field(basis_1d, seed);
  auto series = solver::simulate(field, line_flow);
  return {std::move(field), std::move(series)};
}

inline SamplePair high_fidelity_sample(const randfield::KlBasis& basis_2d, const solver::FlowConfig& flow,
                                       std::uint64_t seed, double cost) {
  const auto field = randfield::sample_field(basis_2d, seed);
  const auto series = solver::simulate(field, flow);
  SamplePair s;
  s.fidelity = Fidelity::High2D;
  s.cost_seconds = static_cast<float>(cost);
  s.seed = seed;
  s.input.assign(field.log_values.begin(), field.log_values.end());
  s.target.assign(series.snapshots.begin(), series.snapshots.end());
  return s;
}

/// Low-frequency: one 1D solve replicated. High-frequency: one independent
/// 1D solve per row, row r seeded by derive_seed(seed, r).
inline SamplePair low_fidelity_sample(LiftMode mode, const randfield::KlBasis& basis_1d,
                                      const solver::FlowConfig& flow, std::uint64_t seed, double cost) {
  const auto line_flow = flow.line();
  const int height = flow.grid.ny;
  SamplePair s;
  if (mode == LiftMode::LowFreq) {
    s = lift_low_frequency(solve_line(basis_1d, line_flow, seed), height, cost);
  } else {
    std::vector<LineSolution> rows;
    rows.reserve(height);
    for (int r = 0; r < height; ++r) rows.push_back(solve_line(basis_1d, line_flow, derive_seed(seed, r)));
    s = lift_high_frequency(rows, height, cost);
  }
  s.seed = seed;
  return s;
}

/// `count` samples of class `f`, indices [first, first + count), computed in
/// parallel and returned in index order.
inline std::vector<SamplePair> generate_samples(Fidelity f, std::uint64_t count, std::uint64_t first,
                                                const randfield::KlBasis& basis_2d,
                                                const randfield::KlBasis& basis_1d,
                                                const solver::FlowConfig& flow, const UnitCosts& costs,
                                                std::uint64_t master_seed, int threads) {
  detail::check_bases(basis_2d, basis_1d, flow);
  std::vector<SamplePair> out(count);
  parallel_for(count, threads, [&](std::size_t k) {
    const auto seed = sample_seed(master_seed, f, first + k);
    switch (f) {
      case Fidelity::High2D: out[k] = high_fidelity_sample(basis_2d, flow, seed, costs.high_2d); break;
      case Fidelity::Low1DLowFreq:
        out[k] = low_fidelity_sample(LiftMode::LowFreq, basis_1d, flow, seed, costs.low_1d);
        break;
      case Fidelity::Low1DHighFreq:
        out[k] = low_fidelity_sample(LiftMode::HighFreq, basis_1d, flow, seed,
                                     costs.high_freq(flow.grid.ny));
        break;
    }
  });
  return out;
}

inline Dataset assemble_dataset(const solver::FlowConfig& flow, std::vector<SamplePair> samples,
                                const BudgetLedger& ledger) {
  Dataset d;
  d.height = flow.grid.ny;
  d.width = flow.grid.nx;
  d.t_out = static_cast<int>(flow.snapshot_times.size());
  d.samples = std::move(samples);
  d.normalization = compute_normalization(d.samples);
  d.ledger = ledger;
  for (int f = 0; f < 3; ++f) d.ledger.counts[f] = d.count(static_cast<Fidelity>(f));
  d.ledger.spent_seconds = d.ledger.implied_spend();
  return d;
}

/// Budget-constrained multifidelity training set: 2D samples first, then the
/// lifted 1D samples. Deterministic in (config, seed) for any thread count.
inline Dataset generate_dataset(const GenerationConfig& config, const randfield::KlBasis& basis_2d,
                                const randfield::KlBasis& basis_1d, std::uint64_t seed) {
  config.flow.validate();
  detail::check_bases(basis_2d, basis_1d, config.flow);
  const auto plan =
      plan_budget(config.budget_seconds, config.split_2d, config.mode, config.costs, config.flow.grid.ny);

  auto samples = generate_samples(Fidelity::High2D, plan.high_count, 0, basis_2d, basis_1d, config.flow,
                                  config.costs, seed, config.threads);
  auto low = generate_samples(fidelity_of(config.mode), plan.low_count, 0, basis_2d, basis_1d, config.flow,
                              config.costs, seed, config.threads);
  samples.insert(samples.end(), std::make_move_iterator(low.begin()), std::make_move_iterator(low.end()));
  return assemble_dataset(config.flow, std::move(samples), plan.ledger);
}

/// Wall-clock unit costs of this build's solver: mean over `repeats` 2D solves
/// and 1D solves. The high-frequency cost stays height * low_1d.
inline UnitCosts measure_unit_costs(const randfield::KlBasis& basis_2d, const randfield::KlBasis& basis_1d,
                                    const solver::FlowConfig& flow, std::uint64_t seed, int repeats = 3) {
  detail::check_bases(basis_2d, basis_1d, flow);
  if (repeats < 1) throw ArgumentError("repeats must be positive");
  using clock = std::chrono::steady_clock;
  const auto line_flow = flow.line();
  UnitCosts c;
  c.measured = true;

  auto t0 = clock::now();
  for (int r = 0; r < repeats; ++r) (void)solver::simulate(randfield::sample_field(basis_2d, derive_seed(seed, r)), flow);
  c.high_2d = std::chrono::duration<double>(clock::now() - t0).count() / repeats;

  const int line_repeats = 20 * repeats;
  t0 = clock::now();
  for (int r = 0; r < line_repeats; ++r) (void)solve_line(basis_1d, line_flow, derive_seed(seed, 1000 + r));
  c.low_1d = std::chrono::duration<double>(clock::now() - t0).count() / line_repeats;
  return c;
}

}  // namespace mfs::dataset
