#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfs/dataset/generate.hpp"
#include "mfs/surrogate/pipeline.hpp"
#include "mfs/uq/protocol.hpp"

namespace mfs::experiment {

/// Every setting of the experiment drivers. Desk-scale defaults: 64x64,
/// t_end = 75,000 (twice the homogeneous breakthrough time at x1 = 100), 8
/// snapshots, reference unit costs.
struct ExperimentConfig {
  Grid grid = Grid::square(64);
  randfield::CovarianceSpec kl;
  int kl_modes = 31;
  solver::FlowConfig flow = default_flow();
  int snapshots = 8;

  double budget_seconds = 4 * 3600.0;
  double split_2d = 0.5;
  dataset::LiftMode mode = dataset::LiftMode::LowFreq;
  dataset::UnitCosts costs;
  bool use_measured_costs = false;

  surrogate::ArchitectureSpec arch;
  surrogate::PipelineConfig train;

  uq::UqConfig uq;
  std::size_t pilot_runs = 200;

  std::vector<double> sweep_splits{0.25, 0.5, 0.75};
  std::vector<std::string> sweep_regimes{"highfreq", "lowfreq-matched", "lowfreq-saturated"};
  int sweep_repeats = 6;
  int sweep_top_k = 3;
  /// Held-out 2D test set: this many samples, or 25% of the training size if larger.
  int test_size = 100;

  std::uint64_t seed_data = 1;
  std::uint64_t seed_train = 2;
  std::uint64_t seed_uq = 3;

  std::string out_dir = ".";
  std::string basis_cache;
  std::string costs_file = "unit_costs.txt";
  int threads = 0;
  bool deterministic = false;

  static solver::FlowConfig default_flow() {
    solver::FlowConfig f;
    return f.with_horizon(75'000.0);
  }

  /// Worker count honouring --deterministic.
  int workers() const { return deterministic ? 1 : threads; }

  /// Grid, horizon and snapshot count pushed into the nested configs.
  void sync() {
    flow.grid = grid;
    flow.snapshot_times = solver::FlowConfig::uniform_snapshots(flow.t_end, snapshots);
    arch.output_channels = snapshots;
    uq.data_budget_seconds = budget_seconds;
    uq.seed = seed_uq;
    uq.estimator.unit_cost_2d = costs.high_2d;
    uq.estimator.threads = workers();
    for (auto& p : train.phases) {
      p.seed = seed_train;
      p.threads = workers();
    }
  }

  void validate() const {
    grid.validate();
    if (grid.dim != Dim::D2) throw ArgumentError("config: grid must be 2D");
    kl.validate();
    if (kl_modes < 1) throw ArgumentError("config: kl.modes must be positive");
    if (snapshots < 1) throw ArgumentError("config: flow.snapshots must be positive");
    flow.validate();
    arch.validate();
    for (const auto& p : train.phases) p.validate();
    if (!(budget_seconds > 0.0)) throw ArgumentError("config: budget must be positive");
    if (!(split_2d >= 0.0 && split_2d <= 1.0)) throw ArgumentError("config: data.split_2d must be in [0, 1]");
    if (!(costs.high_2d > 0.0 && costs.low_1d > 0.0)) throw ArgumentError("config: unit costs must be positive");
    uq.validate();
    if (pilot_runs < 1) throw ArgumentError("config: uq.pilot_runs must be positive");
    for (double s : sweep_splits)
      if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("config: sweep.splits must lie in [0, 1]");
    for (const auto& r : sweep_regimes)
      if (r != "highfreq" && r != "lowfreq-matched" && r != "lowfreq-saturated")
        throw ArgumentError("config: unknown sweep regime '" + r + "'");
    if (sweep_repeats < 1 || sweep_top_k < 1 || sweep_top_k > sweep_repeats)
      throw ArgumentError("config: need 1 <= sweep.top_k <= sweep.repeats");
    if (test_size < 1) throw ArgumentError("config: sweep.test_size must be positive");
    if (seed_data == seed_train || seed_data == seed_uq || seed_train == seed_uq)
      throw ArgumentError("config: seeds.data, seeds.train and seeds.uq must be distinct");
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ArgumentError("config: " + key + " expects a number, got '" + v + "'");
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ArgumentError("config: " + key + " expects an integer, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ArgumentError("config: " + key + " expects true or false, got '" + v + "'");
}

template <typename T>
std::string fmt(const T& v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

/// Shortest of %.15g and %.17g that reads back exactly.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

}  // namespace detail

/// Typed key registry over one ExperimentConfig. Keys are "section.name".
class ConfigKeys {
 public:
  explicit ConfigKeys(ExperimentConfig& c) {
    using namespace detail;
    auto num = [&](const std::string& k, double& x) {
      add(k, [k, &x](const Args& a) { x = to_double(k, one(k, a)); }, [&x] { return fmt(x); });
    };
    auto integer = [&](const std::string& k, auto& x) {
      add(k, [k, &x](const Args& a) { x = static_cast<std::remove_reference_t<decltype(x)>>(to_int(k, one(k, a))); },
          [&x] { return fmt(x); });
    };
    auto seed = [&](const std::string& k, std::uint64_t& x) {
      add(k, [k, &x](const Args& a) {
            const auto v = to_int(k, one(k, a));
            if (v < 0) throw ArgumentError("config: " + k + " must be non-negative");
            x = static_cast<std::uint64_t>(v);
          },
          [&x] { return fmt(x); });
    };
    auto boolean = [&](const std::string& k, bool& x) {
      add(k, [k, &x](const Args& a) { x = to_bool(k, one(k, a)); }, [&x] { return x ? "true" : "false"; });
    };
    auto text = [&](const std::string& k, std::string& x) {
      add(k, [k, &x](const Args& a) { x = one(k, a); }, [&x] { return "\"" + x + "\""; });
    };

    integer("grid.nx", c.grid.nx);
    integer("grid.ny", c.grid.ny);
    num("grid.length_x", c.grid.length_x);
    num("grid.length_y", c.grid.length_y);

    num("kl.mean", c.kl.mean);
    num("kl.variance", c.kl.variance);
    num("kl.correlation_length", c.kl.correlation_length);
    integer("kl.modes", c.kl_modes);

    num("flow.porosity", c.flow.porosity);
    num("flow.mu1", c.flow.viscosities[0]);
    num("flow.mu2", c.flow.viscosities[1]);
    num("flow.sr1", c.flow.residual_saturations[0]);
    num("flow.sr2", c.flow.residual_saturations[1]);
    num("flow.p_left", c.flow.p_left);
    num("flow.p_right", c.flow.p_right);
    num("flow.s_inject", c.flow.s_inject);
    num("flow.q1", c.flow.forcing[0]);
    num("flow.q2", c.flow.forcing[1]);
    num("flow.t_end", c.flow.t_end);
    integer("flow.snapshots", c.snapshots);
    num("flow.cfl", c.flow.cfl);
    num("flow.pressure_tolerance", c.flow.pressure_tolerance);
    integer("flow.max_steps", c.flow.max_steps);

    num("data.budget_seconds", c.budget_seconds);
    add("data.budget_hours", [&c](const Args& a) { c.budget_seconds = 3600.0 * to_double("data.budget_hours", one("data.budget_hours", a)); },
        {});
    num("data.split_2d", c.split_2d);
    add("data.mode",
        [&c](const Args& a) {
          const auto v = one("data.mode", a);
          if (v == "lowfreq") c.mode = dataset::LiftMode::LowFreq;
          else if (v == "highfreq") c.mode = dataset::LiftMode::HighFreq;
          else throw ArgumentError("config: data.mode expects lowfreq or highfreq, got '" + v + "'");
        },
        [&c] { return std::string(c.mode == dataset::LiftMode::LowFreq ? "\"lowfreq\"" : "\"highfreq\""); });
    num("data.unit_cost_2d", c.costs.high_2d);
    num("data.unit_cost_1d", c.costs.low_1d);
    num("data.unit_cost_high_freq", c.costs.high_freq_override);
    boolean("data.use_measured_costs", c.use_measured_costs);

    integer("arch.initial_features", c.arch.initial_features);
    add("arch.blocks",
        [&c](const Args& a) {
          if (a.empty()) throw ArgumentError("config: arch.blocks needs at least one value");
          c.arch.blocks.clear();
          for (const auto& v : a) c.arch.blocks.push_back(static_cast<int>(to_int("arch.blocks", v)));
        },
        [&c] { return fmt_list(c.arch.blocks); });
    integer("arch.growth_rate", c.arch.growth_rate);
    integer("arch.downsample_factor", c.arch.downsample_factor);
    add("arch.activation",
        [&c](const Args& a) {
          const auto v = one("arch.activation", a);
          if (v == "relu") c.arch.activation = surrogate::Activation::ReLU;
          else if (v == "silu") c.arch.activation = surrogate::Activation::SiLU;
          else throw ArgumentError("config: arch.activation expects relu or silu, got '" + v + "'");
        },
        [&c] { return std::string(c.arch.activation == surrogate::Activation::ReLU ? "\"relu\"" : "\"silu\""); });

    for (int p = 0; p < 3; ++p) {
      auto& t = c.train.phases[p];
      const std::string s = "train.phase" + std::to_string(p + 1) + ".";
      integer(s + "epochs", t.epochs);
      num(s + "lr", t.initial_lr);
      num(s + "min_lr", t.min_lr);
    }
    add("train.batch_size", [&c](const Args& a) {
          const auto v = static_cast<int>(to_int("train.batch_size", one("train.batch_size", a)));
          for (auto& p : c.train.phases) p.batch_size = v;
        },
        [&c] { return fmt(c.train.phases[0].batch_size); });
    add("train.weight_decay", [&c](const Args& a) {
          const auto v = to_double("train.weight_decay", one("train.weight_decay", a));
          for (auto& p : c.train.phases) p.weight_decay = v;
        },
        [&c] { return fmt(c.train.phases[0].weight_decay); });
    add("train.plateau_factor", [&c](const Args& a) {
          const auto v = to_double("train.plateau_factor", one("train.plateau_factor", a));
          for (auto& p : c.train.phases) p.plateau_factor = v;
        },
        [&c] { return fmt(c.train.phases[0].plateau_factor); });
    add("train.patience", [&c](const Args& a) {
          const auto v = static_cast<int>(to_int("train.patience", one("train.patience", a)));
          for (auto& p : c.train.phases) p.patience = v;
        },
        [&c] { return fmt(c.train.phases[0].patience); });
    add("train.validation_split", [&c](const Args& a) {
          const auto v = to_bool("train.validation_split", one("train.validation_split", a));
          for (auto& p : c.train.phases) p.validation_split = v;
        },
        [&c] { return std::string(c.train.phases[0].validation_split ? "true" : "false"); });

    integer("uq.reference_runs", c.uq.reference_runs);
    integer("uq.passes", c.uq.surrogate_passes);
    integer("uq.trials", c.uq.trials);
    add("uq.budget_multiples",
        [&c](const Args& a) {
          c.uq.budget_multiples.clear();
          for (const auto& v : a) c.uq.budget_multiples.push_back(to_double("uq.budget_multiples", v));
        },
        [&c] { return fmt_list(c.uq.budget_multiples); });
    integer("uq.bins", c.uq.bins);
    num("uq.probe_x1", c.uq.estimator.probe.x1);
    num("uq.threshold", c.uq.estimator.probe.threshold);
    add("uq.probe_mode", [&c](const Args& a) { c.uq.estimator.probe.mode = uq::parse_probe_mode(one("uq.probe_mode", a)); },
        [&c] { return "\"" + uq::to_string(c.uq.estimator.probe.mode) + "\""; });
    num("uq.max_reference_censoring", c.uq.max_reference_censoring);
    integer("uq.pilot_runs", c.pilot_runs);

    add("sweep.splits",
        [&c](const Args& a) {
          c.sweep_splits.clear();
          for (const auto& v : a) c.sweep_splits.push_back(to_double("sweep.splits", v));
        },
        [&c] { return fmt_list(c.sweep_splits); });
    add("sweep.regimes", [&c](const Args& a) { c.sweep_regimes = a; },
        [&c] {
          std::string s = "[";
          for (std::size_t i = 0; i < c.sweep_regimes.size(); ++i) s += (i ? ", \"" : "\"") + c.sweep_regimes[i] + "\"";
          return s + "]";
        });
    integer("sweep.repeats", c.sweep_repeats);
    integer("sweep.top_k", c.sweep_top_k);
    integer("sweep.test_size", c.test_size);

    seed("seeds.data", c.seed_data);
    seed("seeds.train", c.seed_train);
    seed("seeds.uq", c.seed_uq);

    text("paths.out_dir", c.out_dir);
    text("paths.basis_cache", c.basis_cache);
    text("paths.costs", c.costs_file);
    integer("run.threads", c.threads);
    boolean("run.deterministic", c.deterministic);
  }

  /// Applies one "section.name" = values assignment.
  void set(const std::string& key, const std::vector<std::string>& values) {
    const auto it = setters_.find(key);
    if (it == setters_.end()) throw ArgumentError("config: unknown key '" + key + "'");
    it->second(values);
  }

  /// "section.name=value" (lists comma-separated).
  void set_assignment(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ArgumentError("config: expected key=value, got '" + kv + "'");
    std::vector<std::string> values;
    std::stringstream ss(kv.substr(eq + 1));
    for (std::string item; std::getline(ss, item, ',');) {
      const auto b = item.find_first_not_of(" \t[]\"");
      const auto e = item.find_last_not_of(" \t[]\"");
      values.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    set(kv.substr(0, eq), values);
  }

  /// Reads a sectioned key-value file (TOML subset: scalars, strings, lists).
  void load(std::istream& in) {
    CLI::ConfigTOML parser;
    std::vector<CLI::ConfigItem> items;
    try {
      items = parser.from_config(in);
    } catch (const CLI::Error& e) {
      throw ArgumentError(std::string("config: ") + e.what());
    }
    for (const auto& item : items) {
      if (item.name == "++" || item.name == "--") continue;
      set(item.fullname(), item.inputs);
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open config file '" + path + "'");
    load(in);
  }

  /// Effective configuration in the same file format.
  std::string dump() const {
    std::string out, section;
    for (const auto& name : names_) {
      const auto dot = name.find('.');
      const auto sec = name.substr(0, dot);
      if (sec != section) {
        out += (out.empty() ? "[" : "\n[") + sec + "]\n";
        section = sec;
      }
      if (getters_.at(name)) out += name.substr(dot + 1) + " = " + getters_.at(name)() + "\n";
    }
    return out;
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  using Args = std::vector<std::string>;

  static const std::string& one(const std::string& key, const Args& a) {
    if (a.size() != 1) throw ArgumentError("config: " + key + " expects a single value");
    return a[0];
  }

  void add(const std::string& key, std::function<void(const Args&)> set, std::function<std::string()> get) {
    names_.push_back(key);
    setters_[key] = std::move(set);
    getters_[key] = std::move(get);
  }

  std::vector<std::string> names_;
  std::map<std::string, std::function<void(const Args&)>> setters_;
  std::map<std::string, std::function<std::string()>> getters_;
};

}  // namespace mfs::experiment
