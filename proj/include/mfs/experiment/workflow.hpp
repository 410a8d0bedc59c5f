#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "mfs/dataset/dataset_io.hpp"
#include "mfs/experiment/config.hpp"
#include "mfs/randfield/basis_io.hpp"

namespace mfs::experiment {

using Logger = std::function<void(const std::string&)>;

struct Bases {
  randfield::KlBasis b2;
  randfield::KlBasis b1;
};

namespace detail {

inline std::string basis_file(const std::string& dir, const Grid& g, const randfield::CovarianceSpec& s, int p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "kl_%s_v%g_l%g_m%g_p%d.klb", g.describe().c_str(), s.variance,
                s.correlation_length, s.mean, p);
  return (std::filesystem::path(dir) / buf).string();
}

inline randfield::KlBasis cached_basis(const ExperimentConfig& c, const Grid& g) {
  if (c.basis_cache.empty()) return randfield::build_kl_basis(c.kl, g, c.kl_modes);
  std::filesystem::create_directories(c.basis_cache);
  const auto path = basis_file(c.basis_cache, g, c.kl, c.kl_modes);
  if (std::filesystem::exists(path)) {
    auto b = randfield::load_basis(path, g.length_x, g.length_y);
    if (b.grid.same_shape(g) && b.num_modes() == c.kl_modes) return b;
  }
  auto b = randfield::build_kl_basis(c.kl, g, c.kl_modes);
  randfield::save_basis(b, path);
  return b;
}

}  // namespace detail

/// 2D basis on the experiment grid and 1D basis on its x1 line; KLB1 files
/// under paths.basis_cache are reused when present.
inline Bases make_bases(const ExperimentConfig& c) {
  return {detail::cached_basis(c, c.flow.grid), detail::cached_basis(c, c.flow.line().grid)};
}

// Unit-cost file: "unit_cost_2d = <s>" and "unit_cost_1d = <s>" lines.

inline void save_costs(const dataset::UnitCosts& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write '" + path + "'");
  out.precision(17);
  out << "unit_cost_2d = " << u.high_2d << "\nunit_cost_1d = " << u.low_1d << "\n";
}

inline dataset::UnitCosts load_costs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open unit-cost file '" + path + "'");
  dataset::UnitCosts u;
  u.measured = true;
  bool have2 = false, have1 = false;
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    const double v = detail::to_double(key, line.substr(line.find_first_not_of(" \t", eq + 1)));
    if (key == "unit_cost_2d") u.high_2d = v, have2 = true;
    if (key == "unit_cost_1d") u.low_1d = v, have1 = true;
  }
  if (!have2 || !have1 || !(u.high_2d > 0.0) || !(u.low_1d > 0.0))
    throw ArgumentError("unit-cost file '" + path + "' needs positive unit_cost_2d and unit_cost_1d");
  return u;
}

/// paths.costs, relative to paths.out_dir unless absolute.
inline std::string costs_path(const ExperimentConfig& c) {
  const std::filesystem::path p(c.costs_file);
  return p.is_absolute() ? p.string() : (std::filesystem::path(c.out_dir) / p).string();
}

/// Unit costs in effect: the configured ones, or with use_measured_costs the
/// costs file (measured now if it does not exist yet).
inline dataset::UnitCosts resolve_costs(const ExperimentConfig& c, const Bases& b) {
  if (!c.use_measured_costs) return c.costs;
  const auto path = costs_path(c);
  if (std::filesystem::exists(path)) return load_costs(path);
  auto u = dataset::measure_unit_costs(b.b2, b.b1, c.flow, c.seed_data);
  save_costs(u, path);
  return u;
}

/// Root-mean-square error of the model over every target value of `d`.
inline double rmse(const surrogate::ModelParams<float>& m, const dataset::Dataset& d, int threads = 1) {
  if (d.empty()) throw ArgumentError("rmse: empty dataset");
  std::vector<float> inputs;
  inputs.reserve(d.size() * d.pixels());
  for (const auto& s : d.samples) inputs.insert(inputs.end(), s.input.begin(), s.input.end());
  const auto y = surrogate::predict(m, std::span<const float>(inputs), d.height, d.width, threads);
  double ss = 0.0;
  std::size_t k = 0;
  for (const auto& s : d.samples)
    for (float t : s.target) {
      const double e = static_cast<double>(y[k++]) - t;
      ss += e * e;
    }
  return std::sqrt(ss / static_cast<double>(k));
}

/// Held-out 2D samples on a seed stream disjoint from every training set.
inline dataset::Dataset make_test_set(const ExperimentConfig& c, const Bases& b, std::size_t n) {
  const auto master = derive_seed(c.seed_data, 0x7E57);
  auto s = dataset::generate_samples(dataset::Fidelity::High2D, n, 0, b.b2, b.b1, c.flow, c.costs, master, c.workers());
  return dataset::assemble_dataset(c.flow, std::move(s), {});
}

/// Splits a mixed dataset by fidelity: (1D-derived, 2D).
inline std::pair<dataset::Dataset, dataset::Dataset> split_fidelity(const dataset::Dataset& d) {
  using dataset::Fidelity;
  auto low = dataset::select(d, [](Fidelity f) { return f != Fidelity::High2D; });
  auto high = dataset::select(d, [](Fidelity f) { return f == Fidelity::High2D; });
  return {std::move(low), std::move(high)};
}

/// The three-phase pipeline on a mixed dataset. Without 1D-derived samples
/// the 2D samples stand in for phase 1, which gives the 2D-only baseline
/// the same schedule.
inline surrogate::PipelineResult train_surrogate(const ExperimentConfig& c, const dataset::Dataset& d,
                                                 std::uint64_t init_seed,
                                                 const std::function<void(const surrogate::EpochRecord&)>& on_epoch = {}) {
  auto [low, high] = split_fidelity(d);
  if (low.empty()) low = high;
  low.normalization = dataset::compute_normalization(low.samples);
  const auto model = surrogate::init_model(c.arch, init_seed, low.normalization);
  return surrogate::run_transfer_pipeline(model, low, high, c.train, on_epoch);
}

// --- RMSE-vs-split sweep ----------------------------------------------------------

/// Training-set counts of one regime at one split.
inline dataset::BudgetPlan regime_plan(const ExperimentConfig& c, const dataset::UnitCosts& u,
                                       const std::string& regime, double split) {
  using dataset::LiftMode;
  const int h = c.grid.ny;
  if (regime == "highfreq") return dataset::plan_budget(c.budget_seconds, split, LiftMode::HighFreq, u, h);
  if (regime == "lowfreq-saturated") return dataset::plan_budget(c.budget_seconds, split, LiftMode::LowFreq, u, h);
  if (regime == "lowfreq-matched") {
    auto p = dataset::plan_budget(c.budget_seconds, split, LiftMode::HighFreq, u, h);
    p.ledger.unit_cost_1d = u.low_1d;
    return p;
  }
  throw ArgumentError("unknown regime '" + regime + "'");
}

inline dataset::LiftMode regime_mode(const std::string& regime) {
  return regime == "highfreq" ? dataset::LiftMode::HighFreq : dataset::LiftMode::LowFreq;
}

/// Training set of repeat `r` for a regime. The 2D samples, and the
/// low-frequency samples common to both low-frequency regimes, coincide
/// across regimes of the same (split, repeat).
inline dataset::Dataset regime_dataset(const ExperimentConfig& c, const Bases& b, const dataset::UnitCosts& u,
                                       const std::string& regime, double split, int repeat) {
  const auto plan = regime_plan(c, u, regime, split);
  const auto seed = derive_seed(c.seed_data, 0x5357, static_cast<std::uint64_t>(repeat));
  auto samples = dataset::generate_samples(dataset::Fidelity::High2D, plan.high_count, 0, b.b2, b.b1, c.flow, u, seed,
                                           c.workers());
  auto low = dataset::generate_samples(dataset::fidelity_of(regime_mode(regime)), plan.low_count, 0, b.b2, b.b1,
                                       c.flow, u, seed, c.workers());
  samples.insert(samples.end(), std::make_move_iterator(low.begin()), std::make_move_iterator(low.end()));
  auto ledger = plan.ledger;
  ledger.unit_cost_1d = u.low_1d;
  ledger.unit_cost_high_freq = u.high_freq(c.grid.ny);
  ledger.measured_costs = u.measured;
  return dataset::assemble_dataset(c.flow, std::move(samples), ledger);
}

struct SweepCell {
  std::string regime;
  double split = 0.0;
  int repeat = 0;
  std::size_t n_2d = 0;
  std::size_t n_low = 0;
  double spent_seconds = 0.0;
  double rmse = 0.0;
  double train_seconds = 0.0;
};

inline SweepCell run_sweep_cell(const ExperimentConfig& c, const Bases& b, const dataset::UnitCosts& u,
                                const dataset::Dataset& test, const std::string& regime, double split, int repeat) {
  const auto d = regime_dataset(c, b, u, regime, split, repeat);
  SweepCell cell{regime, split, repeat, d.count(dataset::Fidelity::High2D), d.size() - d.count(dataset::Fidelity::High2D),
                 d.ledger.spent_seconds};
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = train_surrogate(c, d, derive_seed(c.seed_train, static_cast<std::uint64_t>(repeat)));
  cell.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cell.rmse = rmse(r.model, test, c.workers());
  return cell;
}

struct SweepRow {
  std::string regime;
  double split = 0.0;
  std::size_t n_2d = 0;
  std::size_t n_low = 0;
  double spent_seconds = 0.0;
  int repeats = 0;
  int top_k = 0;
  double rmse_mean = 0.0;  // mean of the top_k smallest
  double rmse_2std = 0.0;  // twice their population std
  std::vector<double> rmse_all;
};

/// Test-set size: test_size, or 25% of the largest training set if larger.
inline std::size_t sweep_test_count(const ExperimentConfig& c, const dataset::UnitCosts& u) {
  std::size_t largest = 0;
  for (const auto& regime : c.sweep_regimes)
    for (double s : c.sweep_splits) {
      const auto p = regime_plan(c, u, regime, s);
      largest = std::max<std::size_t>(largest, p.high_count + p.low_count);
    }
  return std::max<std::size_t>(static_cast<std::size_t>(c.test_size), (largest + 3) / 4);
}

inline SweepRow summarize_cells(const std::vector<SweepCell>& cells, int top_k) {
  SweepRow row;
  row.regime = cells.front().regime;
  row.split = cells.front().split;
  row.n_2d = cells.front().n_2d;
  row.n_low = cells.front().n_low;
  row.spent_seconds = cells.front().spent_seconds;
  row.repeats = static_cast<int>(cells.size());
  for (const auto& x : cells) row.rmse_all.push_back(x.rmse);
  auto sorted = row.rmse_all;
  std::sort(sorted.begin(), sorted.end());
  row.top_k = std::min<int>(top_k, static_cast<int>(sorted.size()));
  sorted.resize(row.top_k);
  const auto [m, v] = uq::mean_variance(sorted);
  row.rmse_mean = m;
  row.rmse_2std = 2.0 * std::sqrt(v);
  return row;
}

/// |splits| x |regimes| rows, each the top-k mean over `repeats` trainings.
inline std::vector<SweepRow> run_rmse_sweep(const ExperimentConfig& c, const Bases& b, const dataset::UnitCosts& u,
                                            const Logger& log = {}) {
  for (double s : c.sweep_splits)
    if (!(s > 0.0)) throw ArgumentError("rmse-sweep: splits must be positive (phases 2 and 3 need 2D samples)");
  const auto test = make_test_set(c, b, sweep_test_count(c, u));
  std::vector<SweepRow> rows;
  for (double split : c.sweep_splits)
    for (const auto& regime : c.sweep_regimes) {
      std::vector<SweepCell> cells;
      for (int r = 0; r < c.sweep_repeats; ++r) {
        cells.push_back(run_sweep_cell(c, b, u, test, regime, split, r));
        if (log) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "%s split %.3g repeat %d: n_2d %zu n_low %zu rmse %.5f (%.1f s)",
                        regime.c_str(), split, r, cells.back().n_2d, cells.back().n_low, cells.back().rmse,
                        cells.back().train_seconds);
          log(buf);
        }
      }
      rows.push_back(summarize_cells(cells, c.sweep_top_k));
    }
  return rows;
}

/// regime,split,n_2d,n_low,spent_seconds,repeats,top_k,rmse_mean,rmse_2std,rmse_all
inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "regime,split,n_2d,n_low,spent_seconds,repeats,top_k,rmse_mean,rmse_2std,rmse_all\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%zu,%zu,%.9g,%d,%d,%.9g,%.9g,", r.regime.c_str(), r.split, r.n_2d, r.n_low,
                  r.spent_seconds, r.repeats, r.top_k, r.rmse_mean, r.rmse_2std);
    s += buf;
    for (std::size_t i = 0; i < r.rmse_all.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.9g", i ? ";" : "", r.rmse_all[i]);
      s += buf;
    }
    s += "\n";
  }
  return s;
}

}  // namespace mfs::experiment
