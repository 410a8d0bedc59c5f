#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfs/core/errors.hpp"

namespace mfs::surrogate {

enum class Activation : std::uint8_t { ReLU = 0, SiLU = 1 };

inline const char* to_string(Activation a) { return a == Activation::ReLU ? "relu" : "silu"; }

/// What follows each dense block.
enum class Transition : std::uint8_t { None, Down, Up, Final };

/// Dense encoder-decoder layout. `blocks` lists dense-block depths from the
/// first encoder block to the last decoder block.
struct ArchitectureSpec {
  int input_channels = 1;
  int output_channels = 8;
  int initial_features = 48;
  std::vector<int> blocks{3, 4, 3};
  int growth_rate = 16;
  int downsample_factor = 2;
  Activation activation = Activation::ReLU;

  bool operator==(const ArchitectureSpec&) const = default;

  /// Transition after each block. With L = 2m blocks the encoder is the first
  /// m blocks and the middle pair is joined without a transition; with
  /// L = 2m + 1 the middle block is shared. Every encoder block but the last
  /// downsamples, every decoder block but the last upsamples, and the last
  /// block ends with the full-resolution transition feeding the head.
  std::vector<Transition> transitions() const {
    const int L = static_cast<int>(blocks.size());
    std::vector<Transition> t(L, Transition::None);
    const int m = L / 2;
    for (int i = 0; i < L - 1; ++i) {
      if (L % 2 == 0)
        t[i] = i < m - 1 ? Transition::Down : (i == m - 1 ? Transition::None : Transition::Up);
      else
        t[i] = i < m ? Transition::Down : Transition::Up;
    }
    if (L > 0) t[L - 1] = Transition::Final;
    return t;
  }

  /// Number of factor-2 reductions between the input and the coarsest block,
  /// counting the strided initial convolution.
  int encoder_depth() const {
    int d = 1;
    for (auto t : transitions()) d += t == Transition::Down;
    return d;
  }

  void validate() const {
    if (input_channels < 1 || output_channels < 1 || initial_features < 2 || growth_rate < 1)
      throw ArgumentError("architecture: channel counts must be positive");
    if (downsample_factor != 2) throw ArgumentError("architecture: only downsample_factor 2 is supported");
    if (blocks.empty()) throw ArgumentError("architecture: at least one dense block is required");
    for (int b : blocks)
      if (b < 1) throw ArgumentError("architecture: dense blocks need at least one layer");
    int downs = 0, ups = 0;
    for (auto t : transitions()) {
      downs += t == Transition::Down;
      ups += t == Transition::Up;
    }
    if (downs != ups) throw ArgumentError("architecture: encoder and decoder depths differ");
  }

  void check_input(int height, int width) const {
    const int f = 1 << encoder_depth();
    if (height <= 0 || width <= 0 || height % f != 0 || width % f != 0)
      throw ArgumentError("architecture: input " + std::to_string(height) + "x" + std::to_string(width) +
                          " is not divisible by " + std::to_string(f));
  }

  std::string describe() const {
    std::string s = "init " + std::to_string(initial_features) + ", blocks [";
    for (std::size_t i = 0; i < blocks.size(); ++i) s += (i ? "," : "") + std::to_string(blocks[i]);
    return s + "], growth " + std::to_string(growth_rate) + ", " + to_string(activation) + ", out " +
           std::to_string(output_channels);
  }
};

}  // namespace mfs::surrogate
