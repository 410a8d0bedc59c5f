#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mfs/core/parallel.hpp"
#include "mfs/core/rng.hpp"
#include "mfs/dataset/sample.hpp"
#include "mfs/surrogate/network.hpp"

namespace mfs::surrogate {

/// Mean absolute elementwise difference.
template <typename T>
double l1_loss(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) throw ArgumentError("l1_loss: shape mismatch");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(static_cast<double>(pred[i]) - target[i]);
  return s / static_cast<double>(pred.size());
}

/// (ln k - mean) / std, converted to T.
template <typename T>
void standardize(std::span<const float> raw, const dataset::Normalization& n, T* out) {
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<T>((raw[i] - n.mean) / n.std);
}

/// Surrogate prediction for raw ln k images; inputs are standardized with
/// the model's normalization. Returns B * T_out * H * W values.
template <typename T>
std::vector<T> predict(const ModelParams<T>& m, std::span<const float> inputs, int height, int width,
                       int threads = 1) {
  m.validate();
  const std::size_t in_size = static_cast<std::size_t>(m.arch.input_channels) * height * width;
  if (in_size == 0 || inputs.size() % in_size != 0) throw ArgumentError("predict: input shape mismatch");
  const std::size_t batch = inputs.size() / in_size;
  const std::size_t out_size = static_cast<std::size_t>(m.arch.output_channels) * height * width;
  std::vector<T> out(batch * out_size);
  const int workers = std::max<int>(1, std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(batch, 1)));
  parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
    Network<T> net(m.arch, height, width);
    std::vector<T> x(in_size);
    for (std::size_t b = w; b < batch; b += workers) {
      standardize(inputs.subspan(b * in_size, in_size), m.normalization, x.data());
      const auto& y = net.forward(m, x.data());
      std::copy(y.begin(), y.end(), out.begin() + b * out_size);
    }
  });
  return out;
}

enum class Phase : std::uint8_t { P1 = 1, P2 = 2, P3 = 3 };

struct TrainConfig {
  Phase phase = Phase::P1;
  double initial_lr = 5e-4;
  int epochs = 100;
  double weight_decay = 1e-5;
  double plateau_factor = 0.6;
  double min_lr = 1.5e-6;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int patience = 10;
  double plateau_threshold = 1e-4;
  /// Hold out a validation subset (see validation_count). When false, or
  /// when nothing is held out, the training loss drives the scheduler.
  bool validation_split = true;
  /// Workers for the per-sample passes of a batch. Results do not depend on it.
  int threads = 1;

  /// Settings of the three transfer-learning phases.
  static TrainConfig standard(Phase p) {
    TrainConfig c;
    c.phase = p;
    c.initial_lr = p == Phase::P1 ? 5e-4 : (p == Phase::P2 ? 5e-5 : 1e-5);
    c.min_lr = p == Phase::P3 ? 5e-7 : 1.5e-6;
    return c;
  }

  void validate() const {
    if (!(initial_lr > min_lr && min_lr > 0.0)) throw ArgumentError("train: need initial_lr > min_lr > 0");
    if (epochs <= 0) throw ArgumentError("train: epochs must be positive");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ArgumentError("train: plateau_factor must be in (0, 1)");
    if (batch_size <= 0) throw ArgumentError("train: batch_size must be positive");
    if (!(weight_decay >= 0.0)) throw ArgumentError("train: weight_decay must be non-negative");
    if (patience < 0) throw ArgumentError("train: patience must be non-negative");
  }
};

struct EpochRecord {
  Phase phase = Phase::P1;
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

template <typename T>
struct TrainResult {
  ModelParams<T> model;
  TrainHistory history;
};

/// Reduce-on-plateau schedule on a minimized metric with a relative
/// improvement threshold.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, double min_lr, int patience, double threshold)
      : lr_(lr), factor_(factor), min_lr_(min_lr), patience_(patience), threshold_(threshold) {}

  double lr() const noexcept { return lr_; }

  void step(double metric) {
    if (metric < best_ * (1.0 - threshold_)) {
      best_ = metric;
      bad_ = 0;
    } else if (++bad_ > patience_) {
      lr_ = std::max(lr_ * factor_, min_lr_);
      bad_ = 0;
    }
  }

 private:
  double lr_, factor_, min_lr_;
  int patience_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_ = 0;
};

/// Adam with L2 penalty added to the gradient. Frozen layers are skipped
/// entirely, so their parameters stay bitwise unchanged.
template <typename T>
class Adam {
 public:
  explicit Adam(const ModelParams<T>& m, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& t : m.tensors) {
      m_.emplace_back(t.data.size(), 0.0);
      v_.emplace_back(t.data.size(), 0.0);
    }
  }

  void step(ModelParams<T>& p, const Gradients<double>& grad, const std::vector<bool>& trainable, double lr,
            double weight_decay) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t k = 0; k < p.tensors.size(); ++k) {
      if (!trainable[k / 2]) continue;
      auto& w = p.tensors[k].data;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = grad[k][i] + weight_decay * w[i];
        m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * g;
        v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * g * g;
        w[i] = static_cast<T>(w[i] - lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_));
      }
    }
  }

 private:
  double b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Validation hold-out size: max(100, ceil(n / 4)) once n >= 400, ceil(n / 4)
/// below that, and none for n < 4.
inline std::size_t validation_count(std::size_t n) {
  if (n < 4) return 0;
  const std::size_t quarter = (n + 3) / 4;
  return n >= 400 ? std::max<std::size_t>(100, quarter) : quarter;
}

/// Seeded split of [0, n) into (train, validation) index lists.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_validation(std::size_t n,
                                                                                     std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x7661u));
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t nv = validation_count(n);
  std::vector<std::size_t> val(idx.end() - nv, idx.end());
  idx.resize(n - nv);
  std::sort(idx.begin(), idx.end());
  std::sort(val.begin(), val.end());
  return {idx, val};
}

namespace detail {

/// Batched loss and gradient evaluation. Per-sample gradients are summed in
/// sample order so the result is independent of the worker count.
template <typename T>
class BatchEvaluator {
 public:
  BatchEvaluator(const ArchitectureSpec& arch, int height, int width, int threads, std::size_t max_batch)
      : height_(height), width_(width), workers_(std::max(1, resolve_threads(threads))) {
    for (int w = 0; w < workers_; ++w) nets_.emplace_back(arch, height, width);
    inputs_.assign(workers_, std::vector<T>(nets_[0].input_size()));
    dout_.assign(workers_, std::vector<T>(nets_[0].output_size()));
    sample_grads_.resize(max_batch);
    sample_loss_.resize(max_batch);
  }

  /// Sum of per-sample L1 losses; `grad` receives d(mean batch loss)/d theta
  /// when non-null.
  double run(const ModelParams<T>& p, const dataset::Dataset& d, std::span<const std::size_t> batch,
             const std::vector<bool>& trainable, Gradients<double>* grad) {
    const std::size_t B = batch.size();
    if (grad)
      for (std::size_t b = 0; b < B; ++b)
        if (sample_grads_[b].empty()) sample_grads_[b] = zero_gradients(p);
    const std::size_t chunks = std::min<std::size_t>(workers_, B);
    parallel_for(chunks, static_cast<int>(chunks), [&](std::size_t w) {
      Network<T>& net = nets_[w];
      for (std::size_t b = w; b < B; b += chunks) {
        const auto& s = d.samples[batch[b]];
        standardize(std::span<const float>(s.input), p.normalization, inputs_[w].data());
        const auto& y = net.forward(p, inputs_[w].data());
        const std::size_t N = y.size();
        double loss = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
          const double diff = static_cast<double>(y[i]) - s.target[i];
          loss += std::abs(diff);
          if (grad) dout_[w][i] = static_cast<T>((diff > 0.0) - (diff < 0.0)) / static_cast<T>(B * N);
        }
        sample_loss_[b] = loss / static_cast<double>(N);
        if (grad) net.backward(p, dout_[w].data(), trainable, sample_grads_[b]);
      }
    });
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) total += sample_loss_[b];
    if (grad) {
      for (std::size_t k = 0; k < grad->size(); ++k) {
        if (!trainable[k / 2]) continue;
        auto& g = (*grad)[k];
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sample_grads_[b][k][i];
      }
    }
    return total;
  }

 private:
  int height_, width_, workers_;
  std::vector<Network<T>> nets_;
  std::vector<std::vector<T>> inputs_, dout_;
  std::vector<Gradients<T>> sample_grads_;
  std::vector<double> sample_loss_;
};

}  // namespace detail

/// Mean L1 loss of the model over the given samples.
template <typename T>
double evaluate_loss(const ModelParams<T>& m, const dataset::Dataset& d, std::span<const std::size_t> idx,
                     int threads = 1) {
  if (idx.empty()) return 0.0;
  detail::BatchEvaluator<T> eval(m.arch, d.height, d.width, threads, idx.size());
  const std::vector<bool> none(m.num_layers(), false);
  return eval.run(m, d, idx, none, nullptr) / static_cast<double>(idx.size());
}

/// Trains all layers not named in `frozen` on `d` with Adam on the L1 loss.
/// A validation subset is carved from `d` (see validation_count); without
/// one the training loss drives the scheduler instead.
template <typename T>
TrainResult<T> train_phase(ModelParams<T> model, const dataset::Dataset& d, const TrainConfig& config,
                           const std::set<std::string>& frozen,
                           const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  config.validate();
  model.validate();
  if (d.empty()) throw ArgumentError("train: empty dataset");
  if (d.t_out != model.arch.output_channels) throw ArgumentError("train: dataset T_out does not match the model");
  model.arch.check_input(d.height, d.width);
  const auto trainable = trainable_layers(model, frozen);

  auto [train_idx, val_idx] = carve_validation(d.size(), config.seed);
  if (!config.validation_split) {
    train_idx.resize(d.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
    val_idx.clear();
  }
  const std::size_t B = std::min<std::size_t>(config.batch_size, train_idx.size());
  detail::BatchEvaluator<T> eval(model.arch, d.height, d.width, config.threads, std::max(B, val_idx.size()));
  Adam<T> adam(model);
  PlateauScheduler sched(config.initial_lr, config.plateau_factor, config.min_lr, config.patience,
                         config.plateau_threshold);
  Gradients<double> grad;
  for (const auto& t : model.tensors) grad.emplace_back(t.data.size(), 0.0);
  const bool any_trainable = std::find(trainable.begin(), trainable.end(), true) != trainable.end();

  TrainResult<T> result;
  std::vector<std::size_t> order = train_idx;
  const std::vector<bool> none(model.num_layers(), false);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = sched.lr();
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(B, order.size() - start));
      if (any_trainable) {
        loss_sum += eval.run(model, d, batch, trainable, &grad);
        adam.step(model, grad, trainable, lr, config.weight_decay);
      } else {
        loss_sum += eval.run(model, d, batch, none, nullptr);
      }
    }
    EpochRecord rec{config.phase, epoch, loss_sum / static_cast<double>(order.size()), 0.0, lr};
    if (!std::isfinite(rec.train_loss))
      throw TrainingError("non-finite training loss in epoch " + std::to_string(epoch), epoch);
    rec.val_loss = val_idx.empty() ? rec.train_loss
                                   : eval.run(model, d, val_idx, none, nullptr) / static_cast<double>(val_idx.size());
    if (!std::isfinite(rec.val_loss))
      throw TrainingError("non-finite validation loss in epoch " + std::to_string(epoch), epoch);
    sched.step(rec.val_loss);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace mfs::surrogate
