#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstring>
#include <vector>

#include "mfs/surrogate/model.hpp"
#include "mfs/surrogate/ops.hpp"

namespace mfs::surrogate {

/// Gradient buffers shaped like ModelParams::tensors.
template <typename T>
using Gradients = std::vector<std::vector<T>>;

template <typename T>
Gradients<T> zero_gradients(const ModelParams<T>& m) {
  Gradients<T> g;
  for (const auto& t : m.tensors) g.emplace_back(t.data.size(), T(0));
  return g;
}

/// Forward/backward workspace for one architecture and input size. Holds the
/// activations of the last forward pass; not thread-safe, use one per worker.
///
/// Dense blocks keep the pre-activation features x, their activations a and
/// the im2col matrix of a for all channels produced so far, so each new layer
/// only unfolds its own output channels.
template <typename T>
class Network {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<Mat>;
  using CMap = Eigen::Map<const Mat>;
  using CVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

  struct Block {
    int c0 = 0, ctot = 0, h = 0, w = 0, layers = 0;
    std::size_t hw = 0;
    int first_layer = 0;  // layer index of its first dense layer
    int trans_layer = -1;
    Transition trans = Transition::None;
    std::vector<T> x, a, col, da, dx, dcol, tmp;
  };

 public:
  Network(const ArchitectureSpec& arch, int height, int width)
      : arch_(arch), specs_(layer_specs(arch)), H_(height), W_(width) {
    arch.check_input(height, width);
    const auto trans = arch.transitions();
    const int g = arch.growth_rate;
    int h = height / 2, w = width / 2, c = arch.initial_features, layer = 1;
    col0_.resize(static_cast<std::size_t>(arch.input_channels) * 49 * h * w);
    for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
      Block blk;
      blk.c0 = c;
      blk.layers = arch.blocks[b];
      blk.ctot = c + blk.layers * g;
      blk.h = h;
      blk.w = w;
      blk.hw = static_cast<std::size_t>(h) * w;
      blk.first_layer = layer;
      layer += blk.layers;
      blk.trans = trans[b];
      const std::size_t n = static_cast<std::size_t>(blk.ctot) * blk.hw;
      blk.x.resize(n);
      blk.a.resize(n);
      blk.da.resize(n);
      blk.dx.resize(n);
      blk.col.resize(9 * n);
      blk.dcol.resize(9 * n);
      blk.tmp.resize(n);
      c = blk.ctot;
      if (blk.trans != Transition::None) {
        blk.trans_layer = layer++;
        c /= 2;
        if (blk.trans == Transition::Down) h /= 2, w /= 2;
        if (blk.trans == Transition::Up || blk.trans == Transition::Final) h *= 2, w *= 2;
        blk.tmp.resize(std::max(n, static_cast<std::size_t>(c) * blk.hw));
      }
      blocks_.push_back(std::move(blk));
    }
    cf_ = c;
    head_layer_ = layer;
    const std::size_t HW = static_cast<std::size_t>(H_) * W_;
    z_.resize(static_cast<std::size_t>(cf_) * HW);
    az_.resize(z_.size());
    dz_.resize(z_.size());
    colz_.resize(9 * z_.size());
    dcolz_.resize(9 * z_.size());
    out_.resize(static_cast<std::size_t>(arch.output_channels) * HW);
    dout_.resize(out_.size());
  }

  int height() const noexcept { return H_; }
  int width() const noexcept { return W_; }
  std::size_t input_size() const noexcept { return static_cast<std::size_t>(arch_.input_channels) * H_ * W_; }
  std::size_t output_size() const noexcept { return out_.size(); }
  const std::vector<T>& output() const noexcept { return out_; }

  /// Runs the network on an already standardized input; the result is in
  /// output().
  const std::vector<T>& forward(const ModelParams<T>& p, const T* input) {
    const Activation act = arch_.activation;
    // Initial strided 7x7 convolution.
    {
      Block& b0 = blocks_.front();
      ops::im2col(input, arch_.input_channels, H_, W_, 7, 2, 3, col0_.data());
      conv(p, 0, col0_.data(), b0.hw, b0.x.data());
    }
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      Block& b = blocks_[bi];
      ops::activate(act, b.x.data(), static_cast<std::size_t>(b.c0) * b.hw, b.a.data());
      ops::im2col(b.a.data(), b.c0, b.h, b.w, 3, 1, 1, b.col.data());
      for (int l = 0; l < b.layers; ++l) {
        const int cin = b.c0 + l * arch_.growth_rate;
        const std::size_t off = static_cast<std::size_t>(cin) * b.hw;
        conv(p, b.first_layer + l, b.col.data(), b.hw, b.x.data() + off);
        ops::activate(act, b.x.data() + off, arch_.growth_rate * b.hw, b.a.data() + off);
        ops::im2col(b.a.data() + off, arch_.growth_rate, b.h, b.w, 3, 1, 1, b.col.data() + 9 * off);
      }
      if (b.trans == Transition::None) {
        Block& next = blocks_[bi + 1];
        std::copy(b.x.begin(), b.x.end(), next.x.begin());
        continue;
      }
      const int half = b.ctot / 2;
      conv(p, b.trans_layer, b.a.data(), b.hw, b.tmp.data());
      if (b.trans == Transition::Down) {
        ops::avgpool2(b.tmp.data(), half, b.h, b.w, blocks_[bi + 1].x.data());
      } else if (b.trans == Transition::Up) {
        ops::upsample2(b.tmp.data(), half, b.h, b.w, blocks_[bi + 1].x.data());
      } else {
        ops::upsample2(b.tmp.data(), half, b.h, b.w, z_.data());
      }
    }
    ops::activate(act, z_.data(), z_.size(), az_.data());
    ops::im2col(az_.data(), cf_, H_, W_, 3, 1, 1, colz_.data());
    const std::size_t HW = static_cast<std::size_t>(H_) * W_;
    conv(p, head_layer_, colz_.data(), HW, out_.data());
    for (auto& v : out_) v = ops::sigmoid(v);
    return out_;
  }

  /// Back-propagates d loss / d output through the last forward pass.
  /// Gradients of trainable layers are overwritten in `g`; propagation stops
  /// below the first trainable layer.
  void backward(const ModelParams<T>& p, const T* d_output, const std::vector<bool>& trainable,
                Gradients<T>& g) {
    int first = static_cast<int>(trainable.size());
    for (int l = 0; l < static_cast<int>(trainable.size()); ++l)
      if (trainable[l]) {
        first = l;
        break;
      }
    if (first == static_cast<int>(trainable.size())) return;

    const Activation act = arch_.activation;
    const std::size_t HW = static_cast<std::size_t>(H_) * W_;
    for (std::size_t i = 0; i < out_.size(); ++i) dout_[i] = d_output[i] * out_[i] * (T(1) - out_[i]);

    // Head.
    if (trainable[head_layer_]) weight_grad(p, head_layer_, dout_.data(), colz_.data(), HW, g);
    if (first >= head_layer_) return;
    input_grad(p, head_layer_, dout_.data(), HW, dcolz_.data(), false);
    std::fill(dz_.begin(), dz_.end(), T(0));
    ops::col2im_add(dcolz_.data(), cf_, H_, W_, 3, 1, 1, dz_.data());
    ops::activate_backward(act, z_.data(), dz_.data(), dz_.size(), dz_.data());

    for (int bi = static_cast<int>(blocks_.size()) - 1; bi >= 0; --bi) {
      Block& b = blocks_[bi];
      const std::size_t n = static_cast<std::size_t>(b.ctot) * b.hw;
      std::fill(b.dx.begin(), b.dx.begin() + n, T(0));
      std::fill(b.da.begin(), b.da.begin() + n, T(0));
      if (b.trans == Transition::None) {
        const Block& next = blocks_[bi + 1];
        std::copy(next.dx.begin(), next.dx.begin() + n, b.dx.begin());
      } else {
        const int half = b.ctot / 2;
        if (b.trans == Transition::Final)
          ops::upsample2_backward(dz_.data(), half, b.h, b.w, b.tmp.data());
        else if (b.trans == Transition::Up)
          ops::upsample2_backward(blocks_[bi + 1].dx.data(), half, b.h, b.w, b.tmp.data());
        else
          ops::avgpool2_backward(blocks_[bi + 1].dx.data(), half, b.h, b.w, b.tmp.data());
        if (trainable[b.trans_layer]) weight_grad(p, b.trans_layer, b.tmp.data(), b.a.data(), b.hw, g);
        if (first >= b.trans_layer) return;
        input_grad(p, b.trans_layer, b.tmp.data(), b.hw, b.da.data(), false);
      }

      std::fill(b.dcol.begin(), b.dcol.begin() + 9 * n, T(0));
      const int gr = arch_.growth_rate;
      for (int l = b.layers - 1; l >= 0; --l) {
        const int cin = b.c0 + l * gr;
        const std::size_t off = static_cast<std::size_t>(cin) * b.hw;
        finish_channels(b, cin, gr);
        T* d_out = b.dx.data() + off;
        const int layer = b.first_layer + l;
        if (trainable[layer]) weight_grad(p, layer, d_out, b.col.data(), b.hw, g);
        if (first >= layer) return;
        input_grad(p, layer, d_out, b.hw, b.dcol.data(), true);
      }
      finish_channels(b, 0, b.c0);
    }
    if (trainable[0]) weight_grad(p, 0, blocks_.front().dx.data(), col0_.data(), blocks_.front().hw, g);
  }

  /// Index of the head in layer order.
  int head_layer() const noexcept { return head_layer_; }

 private:
  // out[out_ch x n] = W * in[k x n] + bias.
  void conv(const ModelParams<T>& p, int layer, const T* in, std::size_t n, T* out) const {
    const auto& w = p.weight(layer);
    const int co = w.shape[0];
    const int k = w.shape[1] * w.shape[2] * w.shape[3];
    const auto cols = static_cast<Eigen::Index>(n);
    Map o(out, co, cols);
    o.noalias() = CMap(w.data.data(), co, k) * CMap(in, k, cols);
    o.colwise() += CVec(p.bias(layer).data.data(), co);
  }

  void weight_grad(const ModelParams<T>& p, int layer, const T* d_out, const T* in, std::size_t n,
                   Gradients<T>& g) const {
    const auto& w = p.weight(layer);
    const int co = w.shape[0];
    const int k = w.shape[1] * w.shape[2] * w.shape[3];
    const auto cols = static_cast<Eigen::Index>(n);
    const CMap d(d_out, co, cols);
    Map(g[2 * layer].data(), co, k).noalias() = d * CMap(in, k, cols).transpose();
    // Plain loop: Eigen's vectorized row sum changes its summation order
    // with buffer alignment, which would make results depend on the worker.
    for (int r = 0; r < co; ++r) {
      const T* row = d_out + static_cast<std::size_t>(r) * n;
      T sum = T(0);
      for (std::size_t i = 0; i < n; ++i) sum += row[i];
      g[2 * layer + 1][r] = sum;
    }
  }

  // d_in[k x n] (+)= W^T d_out.
  void input_grad(const ModelParams<T>& p, int layer, const T* d_out, std::size_t n, T* d_in,
                  bool accumulate) const {
    const auto& w = p.weight(layer);
    const int co = w.shape[0];
    const int k = w.shape[1] * w.shape[2] * w.shape[3];
    const auto cols = static_cast<Eigen::Index>(n);
    Map di(d_in, k, cols);
    if (accumulate)
      di.noalias() += CMap(w.data.data(), co, k).transpose() * CMap(d_out, co, cols);
    else
      di.noalias() = CMap(w.data.data(), co, k).transpose() * CMap(d_out, co, cols);
  }

  // Completes dx for channels [c, c + count): every consumer of these
  // channels has contributed to da or to their im2col rows in dcol.
  void finish_channels(Block& b, int c, int count) {
    const std::size_t off = static_cast<std::size_t>(c) * b.hw;
    const std::size_t len = static_cast<std::size_t>(count) * b.hw;
    ops::col2im_add(b.dcol.data() + 9 * off, count, b.h, b.w, 3, 1, 1, b.da.data() + off);
    ops::activate_backward(arch_.activation, b.x.data() + off, b.da.data() + off, len, b.tmp.data());
    for (std::size_t i = 0; i < len; ++i) b.dx[off + i] += b.tmp[i];
  }

  ArchitectureSpec arch_;
  std::vector<LayerSpec> specs_;
  int H_, W_;
  int cf_ = 0;
  int head_layer_ = 0;
  std::vector<T> col0_;
  std::vector<Block> blocks_;
  std::vector<T> z_, az_, dz_, colz_, dcolz_, out_, dout_;
};

}  // namespace mfs::surrogate
