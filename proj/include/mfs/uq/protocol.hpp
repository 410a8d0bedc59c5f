#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfs/uq/decomposition.hpp"
#include "mfs/uq/estimators.hpp"
#include "mfs/uq/pdf.hpp"

namespace mfs::uq {

struct UqConfig {
  std::size_t reference_runs = 10'000;
  std::size_t surrogate_passes = 2000;
  int trials = 50;
  /// Monte Carlo baselines get these multiples of the surrogate's data budget.
  std::vector<double> budget_multiples{1.5, 3.0, 6.0, 12.0};
  /// Data-generation budget spent on the surrogate's training set.
  double data_budget_seconds = 4 * 3600.0;
  int bins = 40;
  double edge_widening = 0.05;
  double max_reference_censoring = 0.02;
  /// E[Q] proxy from a refined grid; the reference mean is used when absent.
  std::optional<double> fine_reference_mean;
  std::uint64_t seed = 0;
  EstimatorOptions estimator;

  void validate() const {
    if (reference_runs < 1) throw ArgumentError("uq: reference_runs must be at least 1");
    if (trials < 1) throw ArgumentError("uq: trials must be at least 1");
    if (bins < 1) throw ArgumentError("uq: bins must be at least 1");
    if (!(data_budget_seconds > 0.0)) throw ArgumentError("uq: data budget must be positive");
    if (!(estimator.unit_cost_2d > 0.0)) throw ArgumentError("uq: unit_cost_2d must be positive");
    for (double m : budget_multiples)
      if (!(m > 0.0)) throw ArgumentError("uq: budget multiples must be positive");
  }

  /// Runs of the Monte Carlo baseline at `multiple` x the data budget (at least 1).
  std::size_t mc_runs(double multiple) const {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(multiple * data_budget_seconds / estimator.unit_cost_2d + 1e-9)));
  }
};

/// One estimator in one trial.
struct TrialRow {
  std::string estimator;
  int trial = 0;
  double budget_seconds = 0.0;
  std::size_t n_samples = 0;
  std::size_t censored = 0;
  double mae = 0.0;
  double kl = 0.0;
  double mean_tb = 0.0;
  double wall_seconds = 0.0;
};

struct EstimatorSummary {
  std::string estimator;
  double budget_seconds = 0.0;
  std::size_t n_samples = 0;
  double mae_mean = 0.0, mae_std = 0.0, mae_median = 0.0;
  double kl_mean = 0.0, kl_std = 0.0, kl_median = 0.0;
  BiasVarianceReport decomposition;
  bool decomposed = false;
};

struct UqReport {
  Estimate reference;
  Pdf reference_pdf;
  double reference_mean = 0.0;
  std::vector<TrialRow> rows;
  std::vector<EstimatorSummary> summaries;
  /// Per-sample records of the first trial, by estimator name.
  std::map<std::string, std::vector<BreakthroughSample>> first_trial_samples;
  double surrogate_seconds_per_pass = 0.0;

  const EstimatorSummary& summary(const std::string& name) const {
    for (const auto& s : summaries)
      if (s.estimator == name) return s;
    throw ArgumentError("uq: no estimator named '" + name + "'");
  }
};

inline std::string mc_label(double multiple) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "mc-%gx", multiple);
  return buf;
}

/// Population standard deviation and median.
inline std::pair<double, double> spread(std::vector<double> v) {
  const auto [m, var] = mean_variance(v);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double med = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {std::sqrt(var), med};
}

namespace detail {

inline std::vector<EstimatorSummary> summarize(const std::vector<TrialRow>& rows, double reference_mean,
                                               double fine_mean) {
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.estimator) == order.end()) order.push_back(r.estimator);
  std::vector<EstimatorSummary> out;
  for (const auto& name : order) {
    std::vector<double> mae, kl, means;
    EstimatorSummary s;
    s.estimator = name;
    for (const auto& r : rows)
      if (r.estimator == name) {
        mae.push_back(r.mae);
        kl.push_back(r.kl);
        means.push_back(r.mean_tb);
        s.budget_seconds = r.budget_seconds;
        s.n_samples = r.n_samples;
      }
    s.mae_mean = mean_variance(mae).first;
    s.kl_mean = mean_variance(kl).first;
    std::tie(s.mae_std, s.mae_median) = spread(mae);
    std::tie(s.kl_std, s.kl_median) = spread(kl);
    if (means.size() >= 2) {
      s.decomposition = bias_variance_decompose(means, reference_mean, fine_mean);
      s.decomposed = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

/// Scores the surrogate and the Monte Carlo tiers against a reference Monte
/// Carlo PDF on shared edges. Trial t re-draws every estimator's fields from
/// seeds derived from (seed, t); the reference stream is disjoint from all of
/// them. KL is taken as KL(reference || estimate).
inline UqReport run_uq(const surrogate::ModelParams<float>* model, const solver::FlowConfig& flow,
                       const randfield::KlBasis& basis, const UqConfig& config,
                       const std::function<void(const std::string&)>& log = {}) {
  config.validate();
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  UqReport rep;
  const auto& opt = config.estimator;
  say("reference: " + std::to_string(config.reference_runs) + " runs");
  rep.reference = mc_estimate(flow, basis, config.reference_runs, derive_seed(config.seed, 0), opt);
  check_reference_censoring(rep.reference.samples, config.max_reference_censoring);
  const auto edges = shared_edges(rep.reference.samples, config.bins, config.edge_widening);
  rep.reference_pdf = estimate_pdf(rep.reference.samples, edges);
  rep.reference_mean = mean_variance(uncensored(rep.reference.samples)).first;

  auto score = [&](const std::string& name, int trial, double budget, const Estimate& e) {
    TrialRow r;
    r.estimator = name;
    r.trial = trial;
    r.budget_seconds = budget;
    r.n_samples = e.samples.size();
    r.censored = censored_count(e.samples);
    const auto pdf = estimate_pdf(e.samples, edges);
    r.mae = mae_pdf(rep.reference_pdf, pdf);
    r.kl = kl_divergence(rep.reference_pdf, pdf);
    r.mean_tb = mean_variance(uncensored(e.samples)).first;
    r.wall_seconds = e.wall_seconds;
    rep.rows.push_back(r);
    if (trial == 0) rep.first_trial_samples[name] = e.samples;
  };

  double pass_seconds = 0.0;
  std::size_t passes = 0;
  for (int t = 0; t < config.trials; ++t) {
    const auto trial_seed = derive_seed(config.seed, 1 + static_cast<std::uint64_t>(t));
    if (model && config.surrogate_passes > 0) {
      const auto e = surrogate_estimate(*model, basis, flow.snapshot_times, config.surrogate_passes,
                                        derive_seed(trial_seed, 0), opt);
      score("surrogate", t, config.data_budget_seconds, e);
      pass_seconds += e.wall_seconds;
      passes += e.samples.size();
    }
    for (std::size_t k = 0; k < config.budget_multiples.size(); ++k) {
      const double mult = config.budget_multiples[k];
      const auto n = config.mc_runs(mult);
      const auto e = mc_estimate(flow, basis, n, derive_seed(trial_seed, 1 + k), opt);
      score(mc_label(mult), t, mult * config.data_budget_seconds, e);
    }
    say("trial " + std::to_string(t + 1) + "/" + std::to_string(config.trials) + " done");
  }
  rep.surrogate_seconds_per_pass = passes ? pass_seconds / static_cast<double>(passes) : 0.0;
  rep.summaries = detail::summarize(rep.rows, rep.reference_mean,
                                    config.fine_reference_mean.value_or(rep.reference_mean));
  return rep;
}

/// estimator,trial,budget_seconds,n_samples,censored,mae,kl,mean_tb,wall_seconds
inline std::string trials_csv(const std::vector<TrialRow>& rows) {
  std::string s = "estimator,trial,budget_seconds,n_samples,censored,mae,kl,mean_tb,wall_seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.9g,%zu,%zu,%.9g,%.9g,%.9g,%.6g\n", r.estimator.c_str(), r.trial,
                  r.budget_seconds, r.n_samples, r.censored, r.mae, r.kl, r.mean_tb, r.wall_seconds);
    s += buf;
  }
  return s;
}

/// estimator,source,t_b,censored (t_b empty when censored)
inline std::string samples_csv(const std::map<std::string, std::vector<BreakthroughSample>>& by_estimator) {
  std::string s = "estimator,source,t_b,censored\n";
  char buf[160];
  for (const auto& [name, samples] : by_estimator)
    for (const auto& b : samples) {
      if (b.t_b)
        std::snprintf(buf, sizeof buf, "%s,%s,%.9g,0\n", name.c_str(), to_string(b.source).c_str(), *b.t_b);
      else
        std::snprintf(buf, sizeof buf, "%s,%s,,1\n", name.c_str(), to_string(b.source).c_str());
      s += buf;
    }
  return s;
}

/// bin_lo,bin_hi,probability
inline std::string pdf_csv(const Pdf& p) {
  std::string s = "bin_lo,bin_hi,probability\n";
  char buf[128];
  for (std::size_t i = 0; i < p.bins(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.12g\n", p.bin_edges[i], p.bin_edges[i + 1], p.probabilities[i]);
    s += buf;
  }
  return s;
}

/// Key-value block: one `estimator.key = value` line per aggregate.
inline std::string summary_text(const UqReport& rep) {
  std::string s;
  char buf[256];
  auto line = [&](const std::string& key, double v) {
    std::snprintf(buf, sizeof buf, "%s = %.9g\n", key.c_str(), v);
    s += buf;
  };
  line("reference.n_samples", static_cast<double>(rep.reference.samples.size()));
  line("reference.censored", static_cast<double>(censored_count(rep.reference.samples)));
  line("reference.mean_tb", rep.reference_mean);
  if (rep.surrogate_seconds_per_pass > 0.0) line("surrogate.seconds_per_pass", rep.surrogate_seconds_per_pass);
  for (const auto& e : rep.summaries) {
    const auto& n = e.estimator;
    line(n + ".budget_seconds", e.budget_seconds);
    line(n + ".n_samples", static_cast<double>(e.n_samples));
    line(n + ".mae_mean", e.mae_mean);
    line(n + ".mae_std", e.mae_std);
    line(n + ".mae_median", e.mae_median);
    line(n + ".kl_mean", e.kl_mean);
    line(n + ".kl_std", e.kl_std);
    line(n + ".kl_median", e.kl_median);
    if (e.decomposed) {
      const auto& d = e.decomposition;
      line(n + ".discrepancy", d.discrepancy);
      line(n + ".bias_sq", d.bias_sq);
      line(n + ".eps_disc_sq", d.eps_disc_sq);
      line(n + ".eps_est_sq", d.eps_est_sq);
      line(n + ".eps_star_sq", d.eps_star_sq);
      line(n + ".eps_samp_sq", d.eps_samp_sq);
    }
  }
  return s;
}

}  // namespace mfs::uq
