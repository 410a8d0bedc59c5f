#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "mfs/surrogate/pipeline.hpp"

using namespace mfs;
using namespace mfs::surrogate;
using dataset::Dataset;
using dataset::SamplePair;

namespace {

ArchitectureSpec tiny_arch(Activation act = Activation::SiLU) {
  ArchitectureSpec a;
  a.blocks = {1, 1};
  a.growth_rate = 2;
  a.initial_features = 4;
  a.output_channels = 3;
  a.activation = act;
  return a;
}

/// Inputs are smooth random images; targets are a fixed nonlinear local map
/// of the input so that the task is learnable.
Dataset synthetic_dataset(int n, int h, int w, int t_out, std::uint64_t seed) {
  Dataset d;
  d.height = h;
  d.width = w;
  d.t_out = t_out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < n; ++k) {
    SamplePair s;
    s.seed = static_cast<std::uint64_t>(k);
    s.input.resize(static_cast<std::size_t>(h) * w);
    const double a = normal(rng), b = normal(rng), c = normal(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        s.input[y * w + x] = static_cast<float>(a * std::sin(0.3 * x + b) + c * std::cos(0.2 * y));
    s.target.resize(static_cast<std::size_t>(t_out) * h * w);
    for (int t = 0; t < t_out; ++t)
      for (int i = 0; i < h * w; ++i)
        s.target[t * h * w + i] = static_cast<float>(1.0 / (1.0 + std::exp(-(s.input[i] + 0.5 * t))));
    d.samples.push_back(std::move(s));
  }
  d.normalization = dataset::compute_normalization(d.samples);
  return d;
}

std::string temp_path(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<char>& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(Architecture, TransitionPattern) {
  using enum Transition;
  ArchitectureSpec a;
  EXPECT_EQ(a.transitions(), (std::vector<Transition>{Down, Up, Final}));
  EXPECT_EQ(a.encoder_depth(), 2);
  a.blocks = {3, 4, 4, 3};
  EXPECT_EQ(a.transitions(), (std::vector<Transition>{Down, None, Up, Final}));
  EXPECT_EQ(a.encoder_depth(), 2);
  a.blocks = {1, 1};
  EXPECT_EQ(a.transitions(), (std::vector<Transition>{None, Final}));
  EXPECT_EQ(a.encoder_depth(), 1);
  a.blocks = {2, 2, 2, 2, 2};
  EXPECT_EQ(a.transitions(), (std::vector<Transition>{Down, Down, Up, Up, Final}));
  EXPECT_EQ(a.encoder_depth(), 3);
}

TEST(Architecture, Validation) {
  ArchitectureSpec a;
  EXPECT_NO_THROW(a.check_input(64, 64));
  EXPECT_THROW(a.check_input(62, 64), ArgumentError);
  EXPECT_THROW(a.check_input(64, 30), ArgumentError);
  a.blocks = {};
  EXPECT_THROW(a.validate(), ArgumentError);
  a.blocks = {3, 0, 3};
  EXPECT_THROW(a.validate(), ArgumentError);
  a.blocks = {3, 4, 3};
  a.downsample_factor = 3;
  EXPECT_THROW(a.validate(), ArgumentError);
}

TEST(InitModel, LayerNamesAndShapes) {
  const auto m = init_model(ArchitectureSpec{}, 1);
  const auto names = m.layer_names();
  ASSERT_EQ(names.size(), 1u + 3 + 1 + 4 + 1 + 3 + 1 + 1);
  EXPECT_EQ(names.front(), "init");
  EXPECT_EQ(names[1], "block0.layer0");
  EXPECT_EQ(names[4], "trans0");
  EXPECT_EQ(names.back(), "head");
  EXPECT_EQ(m.tensor("init.weight").shape, (std::vector<int>{48, 1, 7, 7}));
  EXPECT_EQ(m.tensor("block1.layer3.weight").shape, (std::vector<int>{16, 48 + 48, 3, 3}));
  EXPECT_EQ(m.tensor("trans2.weight").shape, (std::vector<int>{52, 104, 1, 1}));
  EXPECT_EQ(m.tensor("head.weight").shape, (std::vector<int>{8, 52, 3, 3}));
  EXPECT_NO_THROW(m.validate());
  EXPECT_THROW(m.tensor("nope"), ArgumentError);
}

TEST(InitModel, DeterministicPerSeed) {
  const auto a = init_model(ArchitectureSpec{}, 42);
  EXPECT_EQ(a, init_model(ArchitectureSpec{}, 42));
  EXPECT_NE(a, init_model(ArchitectureSpec{}, 43));
}

TEST(InitModel, ParameterCountGrowsWithGrowthRate) {
  ArchitectureSpec a;
  std::size_t prev = 0;
  for (int g : {4, 8, 12, 16, 24}) {
    a.growth_rate = g;
    const auto n = init_model(a, 0).num_parameters();
    EXPECT_GT(n, prev);
    prev = n;
  }
}

TEST(InitModel, FanInScaling) {
  const auto m = init_model<double>(ArchitectureSpec{}, 7);
  const auto& w = m.tensor("block1.layer3.weight").data;
  double ss = 0.0;
  for (double v : w) ss += v * v;
  EXPECT_NEAR(ss / w.size(), 2.0 / (96 * 9), 0.1 * 2.0 / (96 * 9));
}

TEST(Forward, ShapeAndRange) {
  const auto m = init_model(ArchitectureSpec{}, 3);
  std::vector<float> x(64 * 64);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 30.0f);
  for (auto& v : x) v = n(rng);
  const auto y = predict(m, std::span<const float>(x), 64, 64);
  ASSERT_EQ(y.size(), 8u * 64 * 64);
  for (float v : y) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  EXPECT_THROW(predict(m, std::span<const float>(x.data(), 100), 64, 64), ArgumentError);
  EXPECT_THROW(predict(m, std::span<const float>(x.data(), 62 * 62), 62, 62), ArgumentError);
}

TEST(Forward, BatchMatchesSingleCalls) {
  auto m = init_model(ArchitectureSpec{}, 4);
  m.normalization = {0.3, 1.7};
  const auto d = synthetic_dataset(5, 32, 32, 8, 2);
  std::vector<float> all;
  for (const auto& s : d.samples) all.insert(all.end(), s.input.begin(), s.input.end());
  const auto batch = predict(m, std::span<const float>(all), 32, 32, 3);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto one = predict(m, std::span<const float>(d.samples[k].input), 32, 32);
    for (std::size_t i = 0; i < one.size(); ++i) ASSERT_EQ(batch[k * one.size() + i], one[i]);
  }
}

TEST(Forward, AppliesStoredNormalization) {
  auto m = init_model(ArchitectureSpec{}, 5);
  m.normalization = {1.25, 0.5};
  const auto d = synthetic_dataset(1, 32, 32, 8, 3);
  std::vector<float> z(32 * 32);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<float>((d.samples[0].input[i] - 1.25) / 0.5);
  Network<float> net(m.arch, 32, 32);
  const auto direct = net.forward(m, z.data());
  EXPECT_EQ(predict(m, std::span<const float>(d.samples[0].input), 32, 32), direct);
}

TEST(L1Loss, BasicCases) {
  std::vector<double> a{0.1, 0.2, 0.9}, b = a;
  EXPECT_EQ(l1_loss<double>(a, b), 0.0);
  for (auto& v : b) v += 0.5;
  EXPECT_NEAR(l1_loss<double>(b, a), 0.5, 1e-15);
  std::vector<double> c{1.0};
  EXPECT_THROW(l1_loss<double>(a, c), ArgumentError);
}

TEST(L1Loss, MatchesScalarLoopOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(1 + trial * 37), t(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = u(rng), t[i] = u(rng);
    long double oracle = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) oracle += p[i] > t[i] ? p[i] - t[i] : t[i] - p[i];
    oracle /= p.size();
    EXPECT_NEAR(l1_loss<double>(p, t), static_cast<double>(oracle), 1e-12);
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  const auto arch = tiny_arch();
  const auto m = init_model<double>(arch, 11);
  Network<double> net(arch, 8, 8);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  std::vector<double> x(64), target(3 * 64);
  for (auto& v : x) v = normal(rng);
  for (auto& v : target) v = unif(rng);

  const auto loss = [&](const ModelParams<double>& p) {
    const auto& y = net.forward(p, x.data());
    return l1_loss<double>(y, target);
  };
  net.forward(m, x.data());
  std::vector<double> dy(target.size());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const double d = net.output()[i] - target[i];
    dy[i] = ((d > 0) - (d < 0)) / static_cast<double>(dy.size());
  }
  auto g = zero_gradients(m);
  net.backward(m, dy.data(), std::vector<bool>(m.num_layers(), true), g);

  std::uniform_int_distribution<std::size_t> pick(0, m.num_parameters() - 1);
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 150; ++trial) {
    std::size_t flat = pick(rng), k = 0;
    while (flat >= m.tensors[k].data.size()) flat -= m.tensors[k++].data.size();
    auto p = m;
    p.tensors[k].data[flat] += 1e-4;
    const double up = loss(p);
    p.tensors[k].data[flat] -= 2e-4;
    const double down = loss(p);
    const double fd = (up - down) / 2e-4;
    const double an = g[k][flat];
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
    worst = std::max(worst, rel);
    ++checked;
  }
  EXPECT_GE(checked, 100);
  EXPECT_LT(worst, 1e-3);
}

TEST(Gradient, EarlyStopLeavesHeadGradientUnchanged) {
  const auto arch = tiny_arch(Activation::ReLU);
  const auto m = init_model<double>(arch, 13);
  Network<double> net(arch, 8, 8);
  std::vector<double> x(64, 0.3), dy(3 * 64, 0.01);
  net.forward(m, x.data());
  auto full = zero_gradients(m), head = zero_gradients(m);
  net.backward(m, dy.data(), std::vector<bool>(m.num_layers(), true), full);
  std::vector<bool> only_head(m.num_layers(), false);
  only_head.back() = true;
  net.backward(m, dy.data(), only_head, head);
  const std::size_t h = 2 * (m.num_layers() - 1);
  EXPECT_EQ(full[h], head[h]);
  EXPECT_EQ(full[h + 1], head[h + 1]);
  for (std::size_t k = 0; k < h; ++k)
    for (double v : head[k]) ASSERT_EQ(v, 0.0);
}

TEST(Validation, CarveSizes) {
  EXPECT_EQ(validation_count(3), 0u);
  EXPECT_EQ(validation_count(4), 1u);
  EXPECT_EQ(validation_count(46), 12u);
  EXPECT_EQ(validation_count(399), 100u);
  EXPECT_EQ(validation_count(400), 100u);
  EXPECT_EQ(validation_count(1000), 250u);
  const auto [tr, va] = carve_validation(50, 9);
  EXPECT_EQ(tr.size() + va.size(), 50u);
  std::vector<std::size_t> all(tr);
  all.insert(all.end(), va.begin(), va.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(all[i], i);
}

TEST(Plateau, ReducesAfterPatienceAndFloors) {
  PlateauScheduler s(1.0, 0.5, 0.2, 2, 1e-4);
  s.step(1.0);
  s.step(1.0);
  s.step(1.0);
  EXPECT_EQ(s.lr(), 1.0);
  s.step(1.0);
  EXPECT_EQ(s.lr(), 0.5);
  for (int i = 0; i < 20; ++i) s.step(1.0);
  EXPECT_EQ(s.lr(), 0.2);
  PlateauScheduler t(1.0, 0.5, 0.1, 0, 1e-4);
  t.step(1.0);
  t.step(0.99995);  // below the relative threshold
  EXPECT_EQ(t.lr(), 0.5);
}

TEST(TrainPhase, FullFreezeIsIdentity) {
  const auto d = synthetic_dataset(6, 16, 16, 3, 4);
  auto m = init_model(tiny_arch(Activation::ReLU), 1, d.normalization);
  TrainConfig c;
  c.epochs = 3;
  std::set<std::string> all;
  for (const auto& n : m.layer_names()) all.insert(n);
  const auto r = train_phase(m, d, c, all);
  EXPECT_EQ(r.model, m);
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(TrainPhase, SchedulerContractAndDeterminism) {
  const auto d = synthetic_dataset(12, 16, 16, 3, 5);
  const auto m = init_model(tiny_arch(Activation::ReLU), 2, d.normalization);
  TrainConfig c;
  c.epochs = 30;
  c.patience = 0;
  c.initial_lr = 1e-2;
  c.min_lr = 1e-3;
  c.batch_size = 4;
  const auto a = train_phase(m, d, c, {});
  for (std::size_t e = 1; e < a.history.size(); ++e) {
    EXPECT_LE(a.history[e].lr, a.history[e - 1].lr);
    EXPECT_GE(a.history[e].lr, c.min_lr);
  }
  c.threads = 3;
  const auto b = train_phase(m, d, c, {});
  EXPECT_EQ(a.model, b.model);
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
}

TEST(TrainPhase, FrozenLayersUnchangedOthersMove) {
  const auto d = synthetic_dataset(8, 16, 16, 3, 6);
  const auto m = init_model(tiny_arch(Activation::ReLU), 3, d.normalization);
  TrainConfig c;
  c.epochs = 2;
  const auto r = train_phase(m, d, c, {"init", "block1.layer0"});
  EXPECT_EQ(r.model.tensor("init.weight"), m.tensor("init.weight"));
  EXPECT_EQ(r.model.tensor("block1.layer0.bias"), m.tensor("block1.layer0.bias"));
  EXPECT_NE(r.model.tensor("head.weight"), m.tensor("head.weight"));
  EXPECT_NE(r.model.tensor("block0.layer0.weight"), m.tensor("block0.layer0.weight"));
}

TEST(TrainPhase, Errors) {
  const auto d = synthetic_dataset(4, 16, 16, 3, 7);
  const auto m = init_model(tiny_arch(), 4, d.normalization);
  TrainConfig c;
  c.epochs = 2;
  EXPECT_THROW(train_phase(m, Dataset{16, 16, 3, {}, {}, {}}, c, {}), ArgumentError);
  EXPECT_THROW(train_phase(m, d, c, {"no_such_layer"}), ArgumentError);
  auto bad = d;
  bad.samples[2].input[5] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_phase(m, bad, c, {});
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
  c.min_lr = c.initial_lr;
  EXPECT_THROW(train_phase(m, d, c, {}), ArgumentError);
}

TEST(TrainPhase, TinyOverfit) {
  const auto d = synthetic_dataset(4, 16, 16, 3, 8);
  ArchitectureSpec a;
  a.initial_features = 16;
  a.blocks = {2, 2, 2};
  a.growth_rate = 8;
  a.output_channels = 3;
  const auto m = init_model(a, 5, d.normalization);
  TrainConfig c;
  c.epochs = 300;
  c.initial_lr = 2e-3;
  c.min_lr = 1e-5;
  c.validation_split = false;
  const auto r = train_phase(m, d, c, {});
  EXPECT_LT(r.history.back().train_loss, 0.1 * r.history.front().train_loss);
}

TEST(TrainPhase, LossFallsOnThirtyTwoSamplesMedianOverSeeds) {
  const auto d = synthetic_dataset(32, 16, 16, 3, 14);
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig c;
    c.epochs = 8;
    c.batch_size = 8;
    c.seed = seed;
    const auto r = train_phase(init_model(tiny_arch(), 100 + seed, d.normalization), d, c, {});
    ratios.push_back(r.history.back().train_loss / r.history.front().train_loss);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_LT(ratios[2], 1.0);
}

TEST(Pipeline, Phase2FreezesAllButHead) {
  const auto low = synthetic_dataset(10, 16, 16, 3, 9);
  const auto high = synthetic_dataset(6, 16, 16, 3, 10);
  PipelineConfig cfg;
  cfg.with(1, 3);
  const auto r = run_transfer_pipeline(init_model(tiny_arch(Activation::ReLU), 6), low, high, cfg);
  ASSERT_EQ(r.checkpoints.size(), 3u);
  const auto& p1 = r.checkpoints[0];
  const auto& p2 = r.checkpoints[1];
  for (std::size_t k = 0; k < p1.tensors.size(); ++k) {
    if (p1.tensors[k].name.rfind("head.", 0) == 0)
      EXPECT_NE(p1.tensors[k], p2.tensors[k]);
    else
      EXPECT_EQ(p1.tensors[k], p2.tensors[k]) << p1.tensors[k].name;
  }
  EXPECT_EQ(r.model.normalization, low.normalization);
  ASSERT_EQ(r.report.phases.size(), 3u);
  EXPECT_NE(r.report.phases[0].digest, r.report.phases[1].digest);
  EXPECT_EQ(r.report.phases[2].digest, model_digest(r.model));
  EXPECT_EQ(r.report.phases[1].history.front().lr, 5e-5);
}

TEST(Pipeline, SameDataContinuedTrainingDoesNotRegress) {
  const auto d = synthetic_dataset(12, 16, 16, 3, 11);
  PipelineConfig cfg;
  cfg.with(2, 40);
  for (auto& c : cfg.phases) c.batch_size = 4;
  const auto r = run_transfer_pipeline(init_model(tiny_arch(Activation::ReLU), 7), d, d, cfg);
  EXPECT_LE(r.report.phases[2].history.back().val_loss, r.report.phases[0].history.back().val_loss);
}

TEST(Pipeline, EmptyHighFidelityNamesPhase2) {
  const auto low = synthetic_dataset(4, 16, 16, 3, 12);
  Dataset empty{16, 16, 3, {}, {}, {}};
  try {
    run_transfer_pipeline(init_model(tiny_arch(), 8), low, empty, PipelineConfig{});
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("phase 2"), std::string::npos);
  }
}

TEST(ModelFile, RoundTripAndForwardIdentity) {
  auto m = init_model(ArchitectureSpec{}, 21);
  m.normalization = {-0.25, 1.4};
  const auto path = temp_path("mfs_model.mfnn");
  save_model(m, path);
  const auto back = load_model(path);
  EXPECT_EQ(back, m);
  const auto d = synthetic_dataset(1, 64, 64, 8, 13);
  EXPECT_EQ(predict(back, std::span<const float>(d.samples[0].input), 64, 64),
            predict(m, std::span<const float>(d.samples[0].input), 64, 64));
  const auto path2 = temp_path("mfs_model2.mfnn");
  save_model(back, path2);
  EXPECT_EQ(file_bytes(path), file_bytes(path2));
}

TEST(ModelFile, CorruptionIsReported) {
  const auto path = temp_path("mfs_model_bad.mfnn");
  save_model(init_model(tiny_arch(), 1), path);
  const auto good = file_bytes(path);
  auto bad = good;
  bad[1] = 'X';
  write_bytes(path, bad);
  EXPECT_THROW(load_model(path), FormatError);
  bad = good;
  bad[4] = 9;
  write_bytes(path, bad);
  try {
    load_model(path);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  bad.assign(good.begin(), good.end() - 3);
  write_bytes(path, bad);
  EXPECT_THROW(load_model(path), FormatError);
}
