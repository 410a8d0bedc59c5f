// mfs: data generation, transfer-learning training and UQ experiment drivers.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mfs/experiment/workflow.hpp"

namespace fs = std::filesystem;
using namespace mfs;
using namespace mfs::experiment;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool deterministic = false;
  bool quiet = false;
  std::vector<std::string> sets;
  std::string out_dir;
};

void log(const Globals& g, const std::string& s) {
  if (!g.quiet) std::cerr << s << std::endl;
}

ExperimentConfig effective_config(const Globals& g, const std::function<void(ExperimentConfig&)>& flags = {}) {
  ExperimentConfig c;
  ConfigKeys keys(c);
  if (!g.config.empty()) keys.load_file(g.config);
  for (const auto& s : g.sets) keys.set_assignment(s);
  if (g.seed) {
    c.seed_data = *g.seed;
    c.seed_train = *g.seed + 1;
    c.seed_uq = *g.seed + 2;
  }
  if (g.threads) c.threads = *g.threads;
  if (g.deterministic) c.deterministic = true;
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  if (flags) flags(c);
  c.sync();
  c.validate();
  fs::create_directories(c.out_dir);
  return c;
}

std::string out_path(const ExperimentConfig& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw FileError("cannot write '" + path + "'");
}

void write_config(const ExperimentConfig& c, const std::string& name) {
  ExperimentConfig copy = c;
  write_text(out_path(c, name), ConfigKeys(copy).dump());
}

void print_ledger(const dataset::Dataset& d) {
  const auto& l = d.ledger;
  std::printf("budget_seconds      %.6g\n", l.budget_seconds);
  std::printf("unit_cost_2d        %.6g%s\n", l.unit_cost_2d, l.measured_costs ? " (measured)" : "");
  std::printf("unit_cost_1d        %.6g\n", l.unit_cost_1d);
  std::printf("unit_cost_high_freq %.6g\n", l.unit_cost_high_freq);
  for (auto f : {dataset::Fidelity::High2D, dataset::Fidelity::Low1DLowFreq, dataset::Fidelity::Low1DHighFreq})
    std::printf("count %-13s %llu\n", dataset::to_string(f),
                static_cast<unsigned long long>(l.counts[static_cast<int>(f)]));
  std::printf("spent_seconds       %.6g\n", l.spent_seconds);
}

std::pair<int, int> parse_phases(const std::string& s) {
  const auto dash = s.find('-');
  auto digit = [&](const std::string& t) {
    if (t.size() != 1 || t[0] < '1' || t[0] > '3') throw ArgumentError("--phases expects 1, 1-2, 1-3, 2-3 ...; got '" + s + "'");
    return t[0] - '0';
  };
  if (dash == std::string::npos) {
    const int k = digit(s);
    return {k, k};
  }
  const int a = digit(s.substr(0, dash)), b = digit(s.substr(dash + 1));
  if (a > b) throw ArgumentError("--phases: empty range '" + s + "'");
  return {a, b};
}

void check_model_grid(const surrogate::ModelParams<float>& m, const ExperimentConfig& c) {
  m.arch.check_input(c.grid.ny, c.grid.nx);
  if (m.arch.output_channels != c.snapshots)
    throw ArgumentError("model predicts " + std::to_string(m.arch.output_channels) + " snapshots, config has " +
                        std::to_string(c.snapshots));
}

// ---- gen-data

struct GenDataOptions {
  std::optional<double> budget_hours, split;
  std::string mode, out;
  bool no_calibrate = false;
  bool plan_only = false;
};

int cmd_gen_data(const Globals& g, const GenDataOptions& o) {
  auto c = effective_config(g, [&](ExperimentConfig& c) {
    if (o.budget_hours) c.budget_seconds = *o.budget_hours * 3600.0;
    if (o.split) c.split_2d = *o.split;
    if (!o.mode.empty()) ConfigKeys(c).set("data.mode", {o.mode});
  });
  if (o.plan_only) {
    const auto plan = dataset::plan_budget(c.budget_seconds, c.split_2d, c.mode, c.costs, c.grid.ny);
    dataset::Dataset d;
    d.ledger = plan.ledger;
    print_ledger(d);
    return kOk;
  }
  const auto b = make_bases(c);
  if (!o.no_calibrate) {
    const auto h = uq::calibrate_horizon(c.flow, b.b2, c.pilot_runs, c.seed_data, c.uq.estimator.probe, c.workers());
    log(g, "horizon pilot: " + std::to_string(c.pilot_runs) + " runs, censored fraction " +
               std::to_string(h.censored_fraction) + (h.doubled ? ", t_end doubled" : ""));
    if (h.doubled) {
      c.flow.t_end = h.flow.t_end;
      c.sync();
    }
  }
  const auto u = resolve_costs(c, b);
  c.costs = u;
  dataset::GenerationConfig gc{c.budget_seconds, c.split_2d, c.mode, u, c.flow, c.workers()};
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = dataset::generate_dataset(gc, b.b2, b.b1, c.seed_data);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto path = o.out.empty() ? out_path(c, "train.mfds") : o.out;
  dataset::save_dataset(d, path);
  c.sync();
  write_config(c, "gen_data.toml");
  print_ledger(d);
  std::printf("t_end               %.6g\n", c.flow.t_end);
  std::printf("wall_seconds        %.3f\n", wall);
  std::printf("dataset             %s\n", path.c_str());
  return kOk;
}

// ---- train

struct TrainOptions {
  std::string data, phases = "1-3", checkpoint;
  bool resume = false;
};

int cmd_train(const Globals& g, const TrainOptions& o) {
  auto c = effective_config(g);
  auto [first, last] = parse_phases(o.phases);
  if (first > 1 && !o.resume && o.checkpoint.empty())
    throw ArgumentError("--phases " + o.phases + " starts after phase 1: pass --resume or --checkpoint");
  const auto d = dataset::load_dataset(o.data);
  auto [low, high] = split_fidelity(d);
  if (low.empty()) low = high;
  if (!low.empty()) low.normalization = dataset::compute_normalization(low.samples);

  surrogate::ModelParams<float> model;
  if (first == 1) {
    c.arch.output_channels = d.t_out;
    model = surrogate::init_model(c.arch, c.seed_train, low.normalization);
  } else {
    const auto path = o.checkpoint.empty() ? out_path(c, "phase" + std::to_string(first - 1) + ".mfnn") : o.checkpoint;
    model = surrogate::load_model(path);
    log(g, "resuming from " + path);
  }
  auto on_epoch = [&](const surrogate::EpochRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "phase %d epoch %d train %.6g val %.6g lr %.3g", static_cast<int>(r.phase), r.epoch,
                  r.train_loss, r.val_loss, r.lr);
    log(g, buf);
  };
  const auto r = surrogate::run_transfer_pipeline(std::move(model), low, high, c.train, on_epoch, first, last);
  for (std::size_t i = 0; i < r.report.phases.size(); ++i) {
    const auto& p = r.report.phases[i];
    const auto k = std::to_string(static_cast<int>(p.phase));
    write_text(out_path(c, "history_phase" + k + ".csv"), surrogate::history_csv(p.history));
    surrogate::save_model(r.checkpoints[i], out_path(c, "phase" + k + ".mfnn"));
    std::printf("phase %s final train loss %.6g digest %s\n", k.c_str(),
                p.history.empty() ? 0.0 : p.history.back().train_loss, p.digest.c_str());
  }
  surrogate::save_model(r.model, out_path(c, "model.mfnn"));
  write_config(c, "train.toml");
  std::printf("model %s\n", out_path(c, "model.mfnn").c_str());
  return kOk;
}

// ---- predict

struct PredictOptions {
  std::string model, data, out;
};

int cmd_predict(const Globals& g, const PredictOptions& o) {
  const auto c = effective_config(g);
  const auto m = surrogate::load_model(o.model);
  const auto d = dataset::load_dataset(o.data);
  std::printf("rmse %.9g\n", rmse(m, d, c.workers()));
  if (!o.out.empty()) {
    auto p = d;
    std::vector<float> inputs;
    inputs.reserve(d.size() * d.pixels());
    for (const auto& s : d.samples) inputs.insert(inputs.end(), s.input.begin(), s.input.end());
    const auto y = surrogate::predict(m, std::span<const float>(inputs), d.height, d.width, c.workers());
    const std::size_t per = d.pixels() * static_cast<std::size_t>(d.t_out);
    for (std::size_t i = 0; i < p.size(); ++i)
      p.samples[i].target.assign(y.begin() + static_cast<std::ptrdiff_t>(i * per),
                                 y.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    dataset::save_dataset(p, o.out);
    std::printf("predictions %s\n", o.out.c_str());
  }
  return kOk;
}

// ---- uq

struct UqOptions {
  std::string model;
  std::optional<int> trials;
  std::optional<std::size_t> passes, reference_runs;
};

int cmd_uq(const Globals& g, const UqOptions& o) {
  auto c = effective_config(g, [&](ExperimentConfig& c) {
    if (o.trials) c.uq.trials = *o.trials;
    if (o.passes) c.uq.surrogate_passes = *o.passes;
    if (o.reference_runs) c.uq.reference_runs = *o.reference_runs;
  });
  std::optional<surrogate::ModelParams<float>> model;
  if (!o.model.empty()) {
    model = surrogate::load_model(o.model);
    check_model_grid(*model, c);
  } else {
    log(g, "no --model: Monte Carlo tiers only");
  }
  const auto b = make_bases(c);
  c.costs = resolve_costs(c, b);
  c.sync();
  const auto rep = uq::run_uq(model ? &*model : nullptr, c.flow, b.b2, c.uq, [&](const std::string& s) { log(g, s); });
  write_text(out_path(c, "uq_trials.csv"), uq::trials_csv(rep.rows));
  write_text(out_path(c, "uq_samples.csv"), uq::samples_csv(rep.first_trial_samples));
  write_text(out_path(c, "uq_reference_pdf.csv"), uq::pdf_csv(rep.reference_pdf));
  write_text(out_path(c, "uq_summary.txt"), uq::summary_text(rep));
  write_config(c, "uq.toml");
  std::printf("%-10s %10s %10s %12s %12s %12s %12s\n", "estimator", "budget_s", "n", "mae_mean", "mae_std", "kl_mean",
              "kl_std");
  for (const auto& s : rep.summaries)
    std::printf("%-10s %10.4g %10zu %12.5g %12.5g %12.5g %12.5g\n", s.estimator.c_str(), s.budget_seconds, s.n_samples,
                s.mae_mean, s.mae_std, s.kl_mean, s.kl_std);
  return kOk;
}

// ---- rmse-sweep

int cmd_rmse_sweep(const Globals& g) {
  auto c = effective_config(g);
  c.arch.check_input(c.grid.ny, c.grid.nx);
  const auto b = make_bases(c);
  const auto u = resolve_costs(c, b);
  c.costs = u;
  const auto rows = run_rmse_sweep(c, b, u, [&](const std::string& s) { log(g, s); });
  write_text(out_path(c, "rmse_sweep.csv"), sweep_csv(rows));
  write_config(c, "rmse_sweep.toml");
  std::printf("%-18s %6s %6s %7s %12s %12s\n", "regime", "split", "n_2d", "n_low", "rmse_mean", "rmse_2std");
  for (const auto& r : rows)
    std::printf("%-18s %6.3g %6zu %7zu %12.6g %12.6g\n", r.regime.c_str(), r.split, r.n_2d, r.n_low, r.rmse_mean,
                r.rmse_2std);
  return kOk;
}

// ---- bench

struct BenchOptions {
  std::string model;
  std::size_t passes = 2000;
};

int cmd_bench(const Globals& g, const BenchOptions& o) {
  auto c = effective_config(g);
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };
  const auto b = make_bases(c);

  auto t0 = clock::now();
  (void)dataset::solve_line(b.b1, c.flow.line(), derive_seed(c.seed_data, 1));
  const double t1d = seconds(t0);
  t0 = clock::now();
  (void)solver::simulate(randfield::sample_field(b.b2, derive_seed(c.seed_data, 2)), c.flow);
  const double t2d = seconds(t0);

  surrogate::ModelParams<float> m;
  if (!o.model.empty()) {
    m = surrogate::load_model(o.model);
  } else {
    m = surrogate::init_model(c.arch, c.seed_train);
  }
  check_model_grid(m, c);
  const auto one = randfield::sample_field(b.b2, derive_seed(c.seed_data, 3));
  const std::vector<float> input(one.log_values.begin(), one.log_values.end());
  t0 = clock::now();
  (void)surrogate::predict(m, std::span<const float>(input), c.grid.ny, c.grid.nx);
  const double tfwd = seconds(t0);

  // Batch of forward passes only; field sampling is excluded.
  const std::size_t chunk = 64;
  double tbatch = 0.0;
  for (std::size_t done = 0; done < o.passes; done += chunk) {
    const std::size_t n = std::min(chunk, o.passes - done);
    std::vector<float> inputs;
    inputs.reserve(n * input.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = randfield::sample_field(b.b2, uq::surrogate_field_seed(c.seed_uq, done + i));
      inputs.insert(inputs.end(), f.log_values.begin(), f.log_values.end());
    }
    t0 = clock::now();
    (void)surrogate::predict(m, std::span<const float>(inputs), c.grid.ny, c.grid.nx, c.workers());
    tbatch += seconds(t0);
  }

  dataset::UnitCosts u;
  u.high_2d = t2d;
  u.low_1d = t1d;
  u.measured = true;
  const auto path = costs_path(c);
  save_costs(u, path);
  std::printf("grid              %s\n", c.grid.describe().c_str());
  std::printf("solve_1d_seconds  %.6g\n", t1d);
  std::printf("solve_2d_seconds  %.6g\n", t2d);
  std::printf("forward_seconds   %.6g\n", tfwd);
  std::printf("batch_seconds     %.6g (%zu passes; reference figure for 2000 passes: < 18 s)\n",
              tbatch, o.passes);
  std::printf("unit costs        %s (use with data.use_measured_costs = true)\n", path.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multifidelity surrogate experiments for two-phase Darcy flow"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Configuration file (sectioned key = value)");
  app.add_option("--seed", g.seed, "Master seed: data = N, train = N+1, uq = N+2");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_flag("--deterministic", g.deterministic, "Single worker thread");
  app.add_option("--set", g.sets, "Override a config key: section.key=value (repeatable)");
  app.add_option("--out-dir", g.out_dir, "Directory for outputs (paths.out_dir)");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  GenDataOptions gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a budget-constrained multifidelity dataset");
  gen->add_option("--budget-hours", gd.budget_hours, "Data budget in hours");
  gen->add_option("--split-2d", gd.split, "Budget fraction spent on 2D solves");
  gen->add_option("--mode", gd.mode, "1D lift: lowfreq or highfreq")->check(CLI::IsMember({"lowfreq", "highfreq"}));
  gen->add_option("--out", gd.out, "Dataset file (default <out-dir>/train.mfds)");
  gen->add_flag("--no-calibrate", gd.no_calibrate, "Skip the horizon pilot");
  gen->add_flag("--plan-only", gd.plan_only, "Print the budget ledger without generating");

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "Three-phase transfer learning");
  train->add_option("--data", tr.data, "MFDS dataset")->required();
  train->add_option("--phases", tr.phases, "Phase range: 1, 1-2, 1-3, 2-3, ...");
  train->add_flag("--resume", tr.resume, "Start from <out-dir>/phase<k-1>.mfnn");
  train->add_option("--checkpoint", tr.checkpoint, "Explicit checkpoint to resume from");

  PredictOptions pr;
  auto* predict = app.add_subcommand("predict", "Evaluate a model on a dataset");
  predict->add_option("--model", pr.model, "MFNN checkpoint")->required();
  predict->add_option("--data", pr.data, "MFDS dataset")->required();
  predict->add_option("--out", pr.out, "Write predictions as an MFDS dataset");

  UqOptions uo;
  auto* uqc = app.add_subcommand("uq", "Breakthrough-time PDF study against Monte Carlo");
  uqc->add_option("--model", uo.model, "MFNN checkpoint (omit for Monte Carlo tiers only)");
  uqc->add_option("--trials", uo.trials, "Trials (uq.trials)");
  uqc->add_option("--passes", uo.passes, "Surrogate passes per trial (uq.passes)");
  uqc->add_option("--reference-runs", uo.reference_runs, "Reference Monte Carlo runs (uq.reference_runs)");

  auto* sweep = app.add_subcommand("rmse-sweep", "Held-out RMSE against the 2D budget split");

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Time solves and forward passes; write measured unit costs");
  bench->add_option("--model", bo.model, "MFNN checkpoint (default: untrained model of arch.*)");
  bench->add_option("--passes", bo.passes, "Forward passes in the batch timing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(g, gd);
    if (*train) return cmd_train(g, tr);
    if (*predict) return cmd_predict(g, pr);
    if (*uqc) return cmd_uq(g, uo);
    if (*sweep) return cmd_rmse_sweep(g);
    if (*bench) return cmd_bench(g, bo);
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kData;
  } catch (const FileError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
