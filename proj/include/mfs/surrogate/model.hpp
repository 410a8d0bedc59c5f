#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mfs/core/rng.hpp"
#include "mfs/dataset/sample.hpp"
#include "mfs/surrogate/architecture.hpp"

namespace mfs::surrogate {

/// One convolution: `in` -> `out` channels with a k x k kernel.
struct LayerSpec {
  std::string name;
  int in = 0;
  int out = 0;
  int k = 1;
};

/// Convolutions in forward order: "init", "block{b}.layer{l}" for every
/// dense layer, "trans{b}" after every block with a transition, "head".
inline std::vector<LayerSpec> layer_specs(const ArchitectureSpec& arch) {
  arch.validate();
  std::vector<LayerSpec> out;
  out.push_back({"init", arch.input_channels, arch.initial_features, 7});
  const auto trans = arch.transitions();
  int c = arch.initial_features;
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    for (int l = 0; l < arch.blocks[b]; ++l)
      out.push_back({"block" + std::to_string(b) + ".layer" + std::to_string(l), c + l * arch.growth_rate,
                     arch.growth_rate, 3});
    c += arch.blocks[b] * arch.growth_rate;
    if (trans[b] != Transition::None) {
      out.push_back({"trans" + std::to_string(b), c, c / 2, 1});
      c /= 2;
    }
  }
  out.push_back({"head", c, arch.output_channels, 3});
  return out;
}

template <typename T>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> data;

  bool operator==(const Tensor&) const = default;
};

/// Network weights: for each layer of layer_specs(arch), a "<layer>.weight"
/// tensor [out, in, k, k] followed by a "<layer>.bias" tensor [out].
template <typename T>
struct ModelParams {
  ArchitectureSpec arch;
  dataset::Normalization normalization;
  std::vector<Tensor<T>> tensors;

  std::size_t num_layers() const noexcept { return tensors.size() / 2; }
  const Tensor<T>& weight(std::size_t layer) const { return tensors[2 * layer]; }
  const Tensor<T>& bias(std::size_t layer) const { return tensors[2 * layer + 1]; }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.data.size();
    return n;
  }

  /// Layer name of each tensor pair, in forward order.
  std::vector<std::string> layer_names() const {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const auto& n = tensors[2 * l].name;
      names.push_back(n.substr(0, n.rfind('.')));
    }
    return names;
  }

  const Tensor<T>& tensor(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw ArgumentError("model has no tensor '" + name + "'");
  }

  /// Checks names and shapes against the architecture.
  void validate() const {
    const auto specs = layer_specs(arch);
    if (tensors.size() != 2 * specs.size()) throw ArgumentError("model: tensor count does not match architecture");
    for (std::size_t l = 0; l < specs.size(); ++l) {
      const auto& s = specs[l];
      const auto& w = tensors[2 * l];
      const auto& b = tensors[2 * l + 1];
      if (w.name != s.name + ".weight" || b.name != s.name + ".bias")
        throw ArgumentError("model: unexpected tensor name '" + w.name + "'");
      if (w.shape != std::vector<int>{s.out, s.in, s.k, s.k} || b.shape != std::vector<int>{s.out})
        throw ArgumentError("model: shape mismatch in layer '" + s.name + "'");
      if (w.data.size() != static_cast<std::size_t>(s.out) * s.in * s.k * s.k ||
          b.data.size() != static_cast<std::size_t>(s.out))
        throw ArgumentError("model: data size mismatch in layer '" + s.name + "'");
    }
    if (!(normalization.std > 0.0)) throw ArgumentError("model: normalization std must be positive");
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> m{arch, normalization, {}};
    for (const auto& t : tensors) m.tensors.push_back({t.name, t.shape, std::vector<U>(t.data.begin(), t.data.end())});
    return m;
  }

  bool operator==(const ModelParams&) const = default;
};

/// He (fan-in) normal weights and zero biases. Each layer draws from its own
/// stream derived from `seed`, so float and double models from the same seed
/// agree up to rounding.
template <typename T = float>
ModelParams<T> init_model(const ArchitectureSpec& arch, std::uint64_t seed,
                          const dataset::Normalization& norm = {}) {
  ModelParams<T> m{arch, norm, {}};
  const auto specs = layer_specs(arch);
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    const std::size_t fan_in = static_cast<std::size_t>(s.in) * s.k * s.k;
    Tensor<T> w{s.name + ".weight", {s.out, s.in, s.k, s.k}, std::vector<T>(fan_in * s.out)};
    Rng rng(derive_seed(seed, l));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : w.data) v = static_cast<T>(normal(rng));
    m.tensors.push_back(std::move(w));
    m.tensors.push_back({s.name + ".bias", {s.out}, std::vector<T>(s.out, T(0))});
  }
  return m;
}

/// Per-layer trainable flags for a freeze mask of layer names.
template <typename T>
std::vector<bool> trainable_layers(const ModelParams<T>& m, const std::set<std::string>& frozen) {
  const auto names = m.layer_names();
  for (const auto& f : frozen)
    if (std::find(names.begin(), names.end(), f) == names.end())
      throw ArgumentError("freeze mask names unknown layer '" + f + "'");
  std::vector<bool> out(names.size());
  for (std::size_t l = 0; l < names.size(); ++l) out[l] = !frozen.count(names[l]);
  return out;
}

/// Every layer except "head".
template <typename T>
std::set<std::string> all_but_head(const ModelParams<T>& m) {
  std::set<std::string> s;
  for (const auto& n : m.layer_names())
    if (n != "head") s.insert(n);
  return s;
}

}  // namespace mfs::surrogate
