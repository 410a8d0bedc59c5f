#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include "mfs/uq/protocol.hpp"

using namespace mfs;
using namespace mfs::uq;

namespace {

solver::SaturationSeries line_series(std::vector<double> times, std::vector<std::vector<double>> snaps) {
  solver::SaturationSeries s;
  s.grid = Grid::line(static_cast<int>(snaps.front().size()));
  s.times = std::move(times);
  for (const auto& v : snaps) s.snapshots.insert(s.snapshots.end(), v.begin(), v.end());
  return s;
}

Pdf raw_pdf(std::vector<double> probs) {
  Pdf p;
  p.probabilities = std::move(probs);
  p.bin_edges.resize(p.probabilities.size() + 1);
  for (std::size_t i = 0; i < p.bin_edges.size(); ++i) p.bin_edges[i] = static_cast<double>(i);
  return p;
}

Pdf random_pdf(std::mt19937_64& rng, int bins, bool sparse = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(2 + rng() % 200));
  for (auto& v : x) v = sparse ? std::pow(u(rng), 3.0) : u(rng);
  return estimate_pdf(x, uniform_edges(0.0, 1.0, bins));
}

/// Probe values on a 1D series are the snapshot values at the interpolated
/// position, so a single-cell grid makes the probe equal the stored value.
solver::SaturationSeries probe_series(const std::vector<double>& times, const std::vector<double>& probe) {
  std::vector<std::vector<double>> snaps;
  for (double v : probe) snaps.push_back({v});
  return line_series(times, snaps);
}

solver::FlowConfig small_flow(int n, int snapshots = 12) {
  solver::FlowConfig c;
  c.grid = Grid::square(n);
  c.t_end = 120'000.0;
  c.snapshot_times = solver::FlowConfig::uniform_snapshots(c.t_end, snapshots);
  return c;
}

const randfield::KlBasis& basis16() {
  static const auto b = randfield::build_kl_basis({}, Grid::square(16), 31);
  return b;
}

}  // namespace

// --- breakthrough_time ---------------------------------------------------

TEST(Breakthrough, LinearCrossingBetweenSnapshots) {
  const auto s = probe_series({0, 10, 20}, {0.0, 0.1, 0.2});
  const auto b = breakthrough_time(s, ProbeOptions{100.0, 0.15});
  ASSERT_FALSE(b.censored());
  EXPECT_NEAR(*b.t_b, 15.0, 1e-12);
}

TEST(Breakthrough, AlreadyAboveAtFirstSnapshot) {
  const auto s = probe_series({5, 10}, {0.4, 0.9});
  EXPECT_DOUBLE_EQ(*breakthrough_time(s, ProbeOptions{}).t_b, 5.0);
}

TEST(Breakthrough, CensoredWhenNeverReached) {
  const auto s = probe_series({1, 2, 3}, {0.0, 0.05, 0.1});
  const auto b = breakthrough_time(s, ProbeOptions{});
  EXPECT_TRUE(b.censored());
  EXPECT_EQ(censored_count(std::vector<BreakthroughSample>{b, b}), 2u);
}

TEST(Breakthrough, InterpolatesBetweenBracketingColumns) {
  // 150 / 3 = 50 per cell; centres 25, 75, 125; x1 = 100 is halfway between cells 1 and 2.
  const auto s = line_series({1.0}, {{0.0, 0.1, 0.3}});
  EXPECT_NEAR(probe_values(s, 100.0)[0], 0.2, 1e-15);
  EXPECT_NEAR(probe_values(s, 75.0)[0], 0.1, 1e-15);
  EXPECT_NEAR(probe_values(s, 150.0)[0], 0.3, 1e-15);
  EXPECT_THROW(probe_values(s, 151.0), ArgumentError);
  EXPECT_THROW(breakthrough_time(s, ProbeOptions{100.0, 1.0}), ArgumentError);
}

TEST(Breakthrough, ProbeModesOnA2DColumn) {
  solver::SaturationSeries s;
  s.grid = Grid::rect(2, 3, 150.0, 150.0);
  s.times = {1.0};
  // Rows j = 0..2, columns i = 0..1. x1 = 37.5 is the centre of column 0.
  s.snapshots = {0.1, 0.0, 0.5, 0.0, 0.3, 0.0};
  EXPECT_NEAR(probe_values(s, 37.5, ProbeMode::ColumnAverage)[0], 0.3, 1e-15);
  EXPECT_NEAR(probe_values(s, 37.5, ProbeMode::Midline)[0], 0.5, 1e-15);
  EXPECT_NEAR(probe_values(s, 37.5, ProbeMode::ColumnMax)[0], 0.5, 1e-15);
  EXPECT_EQ(parse_probe_mode("midline"), ProbeMode::Midline);
  EXPECT_THROW(parse_probe_mode("corner"), ArgumentError);
}

TEST(Breakthrough, MonotoneInThreshold) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> times, probe;
    double v = 0.0;
    for (int t = 0; t < 10; ++t) {
      times.push_back(t + 1.0);
      v = std::min(1.0, v + u(rng));
      probe.push_back(v);
    }
    const auto s = probe_series(times, probe);
    double prev = -1.0;
    for (double th = 0.05; th < 1.0; th += 0.05) {
      const auto b = breakthrough_time(s, ProbeOptions{100.0, th});
      const double tb = b.t_b.value_or(std::numeric_limits<double>::infinity());
      ASSERT_GE(tb, prev);
      prev = tb;
    }
  }
}

TEST(Breakthrough, AnalyticHomogeneousLine) {
  solver::FlowConfig c;
  c.grid = Grid::line(150);
  c.snapshot_times = solver::FlowConfig::uniform_snapshots(c.t_end, 1200);
  const auto k = randfield::field_from_log(c.grid, std::vector<double>(150, 0.0));
  const auto b = breakthrough_time(solver::simulate(k, c), 100.0, 0.15);
  // Front speed u / phi with u = k dP / (mu L).
  const double analytic = 100.0 * 0.25 * 1.0 * 150.0 / (1.0 * (10.2 - 10.1));
  ASSERT_FALSE(b.censored());
  EXPECT_NEAR(*b.t_b, analytic, 0.02 * analytic);
}

TEST(Breakthrough, ColumnAverageReducesToLineOnInvariantField) {
  auto c = small_flow(16);
  std::vector<double> profile(16);
  for (int i = 0; i < 16; ++i) profile[i] = std::sin(0.7 * i);
  std::vector<double> logk(c.grid.cells());
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) logk[c.grid.index(i, j)] = profile[i];
  const auto b2 = breakthrough_time(solver::simulate(randfield::field_from_log(c.grid, logk), c));
  const auto lc = c.line();
  const auto b1 = breakthrough_time(solver::simulate(randfield::field_from_log(lc.grid, profile), lc));
  ASSERT_FALSE(b1.censored());
  EXPECT_NEAR(*b2.t_b, *b1.t_b, 1e-6 * *b1.t_b);
}

// --- estimate_pdf ----------------------------------------------------------

TEST(Pdf, PointMass) {
  const std::vector<double> x(50, 0.55);
  const auto p = estimate_pdf(x, uniform_edges(0.0, 1.0, 10));
  EXPECT_NEAR(p.probabilities[5], 1.0, 1e-5);
  for (int i = 0; i < 10; ++i)
    if (i != 5) {
      EXPECT_NEAR(p.probabilities[i], kPdfSmoothing, 1e-9);
    }
}

TEST(Pdf, IdenticalInputsGiveIdenticalPdfs) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> x(1000);
  for (auto& v : x) v = n(rng);
  const auto e = uniform_edges(-3, 3, 40);
  EXPECT_EQ(estimate_pdf(x, e), estimate_pdf(x, e));
}

TEST(Pdf, StandardNormalAgainstAnalyticMass) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n;
  std::vector<double> x(1'000'000);
  for (auto& v : x) v = n(rng);
  const auto e = uniform_edges(-4, 4, 50);
  const auto p = estimate_pdf(x, e);
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) worst = std::max(worst, std::abs(p.probabilities[i] - (cdf(e[i + 1]) - cdf(e[i]))));
  EXPECT_LT(worst, 0.005);
}

TEST(Pdf, SumsToOneForAnyInput) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng() % 500);
    for (auto& v : x) v = u(rng);
    const auto p = estimate_pdf(x, uniform_edges(0.0, 1.0, 1 + static_cast<int>(rng() % 60)));
    double s = 0.0;
    for (double v : p.probabilities) {
      ASSERT_GE(v, 0.0);
      s += v;
    }
    ASSERT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Pdf, CensoredAndOutOfRangeAreTallied) {
  std::vector<BreakthroughSample> s{{1.5, Source::Solver2D}, {std::nullopt, Source::Solver2D},
                                    {-1.0, Source::Solver2D}, {9.0, Source::Solver2D}};
  const auto p = estimate_pdf(s, uniform_edges(0.0, 3.0, 3));
  EXPECT_EQ(p.censored, 1u);
  EXPECT_EQ(p.out_of_range, 2u);
  EXPECT_NEAR(p.probabilities[0], 1.0 / 3.0, 1e-5);
  EXPECT_NEAR(p.probabilities[2], 1.0 / 3.0, 1e-5);
  const std::vector<BreakthroughSample> all_censored(3);
  EXPECT_THROW(estimate_pdf(all_censored, uniform_edges(0.0, 1.0, 2)), EstimationError);
  EXPECT_THROW(estimate_pdf(std::vector<double>{0.5}, std::vector<double>{1.0, 0.0}), ArgumentError);
}

TEST(Pdf, SharedEdgesWidenTheReferenceRange) {
  std::vector<BreakthroughSample> s{{100.0, Source::Solver2D}, {200.0, Source::Solver2D}, {}};
  const auto e = shared_edges(s);
  ASSERT_EQ(e.size(), 41u);
  EXPECT_NEAR(e.front(), 95.0, 1e-9);
  EXPECT_NEAR(e.back(), 205.0, 1e-9);
}

// --- mae_pdf / kl_divergence -------------------------------------------------

TEST(Metrics, MaeExamples) {
  EXPECT_EQ(mae_pdf(raw_pdf({0.2, 0.8}), raw_pdf({0.2, 0.8})), 0.0);
  EXPECT_DOUBLE_EQ(mae_pdf(raw_pdf({1, 0}), raw_pdf({0, 1})), 1.0);
  auto q = raw_pdf({0.5, 0.5});
  q.bin_edges[1] = 0.5;
  EXPECT_THROW(mae_pdf(raw_pdf({0.5, 0.5}), q), ArgumentError);
  EXPECT_THROW(kl_divergence(raw_pdf({0.5, 0.5}), q), ArgumentError);
}

TEST(Metrics, KlExamples) {
  EXPECT_EQ(kl_divergence(raw_pdf({0.3, 0.7}), raw_pdf({0.3, 0.7})), 0.0);
  // 0.5 ln(0.5 / 0.25) + 0.5 ln(0.5 / 0.75), evaluated independently.
  const long double direct = 0.5L * std::log(2.0L) + 0.5L * std::log(2.0L / 3.0L);
  EXPECT_NEAR(kl_divergence(raw_pdf({0.5, 0.5}), raw_pdf({0.25, 0.75})), 0.1438, 1e-4);
  EXPECT_NEAR(kl_divergence(raw_pdf({0.5, 0.5}), raw_pdf({0.25, 0.75})), static_cast<double>(direct), 1e-15);
  EXPECT_DOUBLE_EQ(kl_divergence(raw_pdf({1.0, 0.0}), raw_pdf({0.5, 0.5})), std::log(2.0));
}

TEST(Metrics, PropertiesOnRandomPdfs) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const int bins = 2 + static_cast<int>(rng() % 40);
    const auto p = random_pdf(rng, bins), q = random_pdf(rng, bins), r = random_pdf(rng, bins);
    ASSERT_GE(kl_divergence(p, q), 0.0);
    ASSERT_EQ(kl_divergence(p, p), 0.0);
    ASSERT_EQ(mae_pdf(p, p), 0.0);
    ASSERT_GE(mae_pdf(p, q), 0.0);
    ASSERT_EQ(mae_pdf(p, q), mae_pdf(q, p));
    ASSERT_LE(mae_pdf(p, r), mae_pdf(p, q) + mae_pdf(q, r) + 1e-15);
    if (p.probabilities != q.probabilities) {
      ASSERT_GT(mae_pdf(p, q), 0.0);
    }
  }
}

// --- bias_variance_decompose / fit_convergence_rate --------------------------

TEST(Decomposition, AllComponentsVanishAtTheReference) {
  const std::vector<double> t(5, 3.25);
  const auto b = bias_variance_decompose(t, 3.25, 3.25);
  for (double v : {b.discrepancy, b.bias_sq, b.variance, b.eps_disc_sq, b.eps_est_sq, b.eps_samp_sq, b.eps_star_sq})
    EXPECT_EQ(v, 0.0);
  EXPECT_THROW(bias_variance_decompose(std::vector<double>{1.0}, 0, 0), ArgumentError);
}

TEST(Decomposition, IdentitiesOnRandomInputs) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> scale(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double s = std::pow(10.0, scale(rng));
    std::vector<double> t(2 + rng() % 50);
    const double centre = s * n(rng);
    for (auto& v : t) v = centre + s * n(rng);
    const double r = s * n(rng), f = s * n(rng);
    const auto b = bias_variance_decompose(t, r, f);
    // Independent evaluation of (m - f)^2 from its expansion.
    long double m = 0;
    for (double v : t) m += v;
    m /= t.size();
    const long double expanded = (m - r) * (m - r) + (r - f) * (r - f) + 2 * (m - r) * (r - f);
    ASSERT_LE(b.mse_residual(), 1e-10);
    ASSERT_LE(b.bias_residual(), 1e-10);
    ASSERT_NEAR(b.bias_sq, static_cast<double>(expanded), 1e-10 * std::max(1.0, b.bias_sq));
    ASSERT_EQ(b.variance, b.eps_samp_sq);
    ASSERT_GE(b.variance, 0.0);
  }
}

TEST(Decomposition, MonteCarloEstimatorBiasShrinksWithTrials) {
  // Each trial is a 20-sample mean of draws with mean r; r differs from f by a fixed discretization offset.
  const double r = 10.0, f = 10.4;
  auto trials = [&](int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(r, 2.0);
    std::vector<double> t(count);
    for (auto& v : t) {
      double s = 0;
      for (int k = 0; k < 20; ++k) s += n(rng);
      v = s / 20;
    }
    return t;
  };
  const auto few = bias_variance_decompose(trials(10, 1), r, f);
  const auto many = bias_variance_decompose(trials(10'000, 2), r, f);
  EXPECT_LT(many.eps_est_sq, few.eps_est_sq);
  EXPECT_LT(many.eps_est_sq, 1e-3);
  EXPECT_DOUBLE_EQ(few.eps_disc_sq, many.eps_disc_sq);
  EXPECT_LT(std::abs(many.eps_star_sq), 0.05);
}

TEST(ConvergenceRate, ExactPowerLawAndConstant) {
  std::vector<std::pair<double, double>> p, c;
  for (double n : {10.0, 40.0, 160.0, 640.0}) {
    p.push_back({n, 3.7 * std::pow(n, -0.5)});
    c.push_back({n, 0.25});
  }
  EXPECT_NEAR(fit_convergence_rate(p), -0.5, 1e-12);
  EXPECT_NEAR(fit_convergence_rate(c), 0.0, 1e-12);
}

TEST(ConvergenceRate, DegenerateInputsThrow) {
  using P = std::vector<std::pair<double, double>>;
  EXPECT_THROW(fit_convergence_rate(P{{1, 1}, {2, 1}}), ArgumentError);
  EXPECT_THROW(fit_convergence_rate(P{{1, 1}, {2, 0}, {3, 1}}), ArgumentError);
  EXPECT_THROW(fit_convergence_rate(P{{1, 1}, {1, 2}, {3, 1}}), ArgumentError);
  EXPECT_THROW(fit_convergence_rate(P{{3, 1}, {2, 2}, {1, 1}}), ArgumentError);
}

TEST(ConvergenceRate, SampleMeanErrorDecaysAtHalfOrder) {
  // RMS error of n-sample means of exponential draws, 400 replications per n.
  std::mt19937_64 rng(77);
  std::exponential_distribution<double> e(1.0);
  std::vector<std::pair<double, double>> pairs;
  for (int n : {25, 100, 400}) {
    double ss = 0.0;
    for (int rep = 0; rep < 400; ++rep) {
      double s = 0;
      for (int k = 0; k < n; ++k) s += e(rng);
      ss += (s / n - 1.0) * (s / n - 1.0);
    }
    pairs.push_back({static_cast<double>(n), std::sqrt(ss / 400)});
  }
  EXPECT_NEAR(fit_convergence_rate(pairs), -0.5, 0.15);
}

// --- estimators ----------------------------------------------------------------

TEST(MonteCarlo, SingleRunChargesOneUnit) {
  const auto c = small_flow(16);
  EstimatorOptions o;
  o.unit_cost_2d = 311.0;
  const auto e = mc_estimate(c, basis16(), 1, 42, o);
  ASSERT_EQ(e.samples.size(), 1u);
  EXPECT_EQ(e.samples[0].source, Source::Solver2D);
  EXPECT_DOUBLE_EQ(e.cost_seconds, 311.0);
  EXPECT_THROW(mc_estimate(c, basis16(), 0, 42, o), ArgumentError);
  EXPECT_THROW(mc_estimate(small_flow(8), basis16(), 1, 42, o), ArgumentError);
}

TEST(MonteCarlo, DeterministicAcrossThreadCounts) {
  const auto c = small_flow(16);
  EstimatorOptions one, three;
  one.threads = 1;
  three.threads = 3;
  const auto a = mc_estimate(c, basis16(), 12, 7, one);
  EXPECT_EQ(a.samples, mc_estimate(c, basis16(), 12, 7, three).samples);
  EXPECT_NE(a.samples, mc_estimate(c, basis16(), 12, 8, one).samples);
}

TEST(MonteCarlo, SeedStreamsAreDisjoint) {
  std::set<std::uint64_t> a, b, s;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    a.insert(mc_field_seed(1, i));
    b.insert(mc_field_seed(2, i));
    s.insert(surrogate_field_seed(1, i));
  }
  EXPECT_EQ(a.size(), 5000u);
  for (auto v : a) {
    EXPECT_FALSE(b.count(v));
    EXPECT_FALSE(s.count(v));
  }
}

TEST(MonteCarlo, DisjointBatchesAgreeWithinPooledError) {
  const auto c = small_flow(16);
  EstimatorOptions o;
  const auto x = uncensored(mc_estimate(c, basis16(), 500, 100, o).samples);
  const auto y = uncensored(mc_estimate(c, basis16(), 500, 200, o).samples);
  const auto [mx, vx] = mean_variance(x);
  const auto [my, vy] = mean_variance(y);
  const double se = std::sqrt(vx / x.size() + vy / y.size());
  EXPECT_LT(std::abs(mx - my), 3.0 * se);
}

TEST(MonteCarlo, HorizonCalibration) {
  auto c = small_flow(16, 4);
  const auto short_run = c.with_horizon(2000.0);
  const auto h = calibrate_horizon(short_run, basis16(), 20, 3, {}, 1);
  EXPECT_TRUE(h.doubled);
  EXPECT_DOUBLE_EQ(h.flow.t_end, 4000.0);
  EXPECT_EQ(h.flow.snapshot_times.size(), 4u);
  EXPECT_DOUBLE_EQ(h.censored_fraction, 1.0);
  const auto long_run = c.with_horizon(2e6);
  EXPECT_FALSE(calibrate_horizon(long_run, basis16(), 20, 3, {}, 1).doubled);

  std::vector<BreakthroughSample> ref(100, BreakthroughSample{1.0, Source::Solver2D});
  ref[0].t_b.reset();
  ref[1].t_b.reset();
  EXPECT_NO_THROW(check_reference_censoring(ref));
  ref[2].t_b.reset();
  EXPECT_THROW(check_reference_censoring(ref), EstimationError);
}

TEST(Surrogate, EmptyDeterministicAndShapeChecked) {
  const auto c = small_flow(16, 4);
  surrogate::ArchitectureSpec a;
  a.initial_features = 8;
  a.blocks = {1, 1, 1};
  a.growth_rate = 4;
  a.output_channels = 4;
  const auto m = surrogate::init_model(a, 1);
  EXPECT_TRUE(surrogate_estimate(m, basis16(), c.snapshot_times, 0, 1).samples.empty());
  EstimatorOptions o;
  o.chunk = 3;
  const auto x = surrogate_estimate(m, basis16(), c.snapshot_times, 7, 5, o);
  ASSERT_EQ(x.samples.size(), 7u);
  EXPECT_EQ(x.samples[0].source, Source::Surrogate);
  o.chunk = 64;
  o.threads = 2;
  EXPECT_EQ(x.samples, surrogate_estimate(m, basis16(), c.snapshot_times, 7, 5, o).samples);
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(surrogate_estimate(m, basis16(), three, 1, 1), ArgumentError);
  const auto odd = randfield::build_kl_basis({}, Grid::square(18), 8);
  EXPECT_THROW(surrogate_estimate(m, odd, c.snapshot_times, 1, 1), ArgumentError);
}

TEST(Surrogate, ForwardPassIsCheaperThanA2DSolve) {
  // Default architecture at 64x64 against one 2D solve on the same build.
  solver::FlowConfig c;
  const auto basis = randfield::build_kl_basis({}, c.grid, 31);
  const auto m = surrogate::init_model(surrogate::ArchitectureSpec{}, 1);
  EstimatorOptions o;
  o.threads = 1;
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  const auto e = surrogate_estimate(m, basis, c.snapshot_times, 8, 1, o);
  const double pass = std::chrono::duration<double>(clock::now() - t0).count() / 8;
  t0 = clock::now();
  mc_estimate(c, basis, 3, 1, o);
  const double solve = std::chrono::duration<double>(clock::now() - t0).count() / 3;
  std::printf("forward pass %.4f s, 2D solve %.4f s, ratio %.1f\n", pass, solve, solve / pass);
  EXPECT_LT(pass, solve);
}

// --- protocol -------------------------------------------------------------------

TEST(Protocol, RowsSummariesAndSingleTrialSpread) {
  const auto c = small_flow(16, 6);
  surrogate::ArchitectureSpec a;
  a.initial_features = 8;
  a.blocks = {1, 1, 1};
  a.growth_rate = 4;
  a.output_channels = 6;
  const auto m = surrogate::init_model(a, 2);
  UqConfig u;
  u.reference_runs = 200;
  u.surrogate_passes = 30;
  u.trials = 1;
  u.budget_multiples = {1.0, 2.0};
  u.estimator.unit_cost_2d = 1.0;
  u.data_budget_seconds = 10.0;
  u.max_reference_censoring = 1.0;
  u.estimator.threads = 1;
  // An untrained model may never cross the threshold; score the MC tiers only then.
  UqReport rep;
  try {
    rep = run_uq(&m, c, basis16(), u);
  } catch (const EstimationError&) {
    rep = run_uq(nullptr, c, basis16(), u);
  }
  const std::size_t per_trial = rep.summaries.size();
  EXPECT_GE(per_trial, 2u);
  EXPECT_EQ(rep.rows.size(), per_trial);
  for (const auto& s : rep.summaries) {
    EXPECT_EQ(s.mae_std, 0.0);
    EXPECT_EQ(s.kl_std, 0.0);
    EXPECT_FALSE(s.decomposed);
  }
  EXPECT_EQ(rep.summary("mc-2x").n_samples, 20u);
  EXPECT_EQ(rep.summary("mc-1x").n_samples, 10u);
  const auto self = estimate_pdf(rep.reference.samples, rep.reference_pdf.bin_edges);
  EXPECT_EQ(mae_pdf(rep.reference_pdf, self), 0.0);
  EXPECT_EQ(kl_divergence(rep.reference_pdf, self), 0.0);
  EXPECT_NE(trials_csv(rep.rows).find("estimator,trial,budget_seconds"), std::string::npos);
  EXPECT_NE(summary_text(rep).find("mc-2x.kl_mean = "), std::string::npos);
  EXPECT_NE(samples_csv(rep.first_trial_samples).find("mc-1x,solver2d,"), std::string::npos);
}

TEST(Protocol, MonteCarloErrorFallsWithBudgetTier) {
  const auto c = small_flow(16, 12);
  UqConfig u;
  u.reference_runs = 3000;
  u.surrogate_passes = 0;
  u.trials = 5;
  u.budget_multiples = {1.0, 16.0};
  u.estimator.unit_cost_2d = 1.0;
  u.data_budget_seconds = 25.0;
  u.estimator.threads = 1;
  const auto rep = run_uq(nullptr, c, basis16(), u);
  EXPECT_LT(rep.summary("mc-16x").mae_median, rep.summary("mc-1x").mae_median);
  EXPECT_LT(rep.summary("mc-16x").kl_median, rep.summary("mc-1x").kl_median);
  EXPECT_TRUE(rep.summary("mc-16x").decomposed);
  EXPECT_LE(rep.summary("mc-16x").decomposition.mse_residual(), 1e-10);
}
