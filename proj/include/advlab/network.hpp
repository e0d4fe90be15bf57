#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "advlab/errors.hpp"
#include "advlab/linalg.hpp"
#include "advlab/rng.hpp"

namespace advlab {

struct DenseLayer {
  Mat w;                  // [out x in]
  std::vector<double> b;  // [out]
};

struct TrainConfig {
  std::size_t epochs = 160;
  double base_lr = 0.1;
  std::vector<std::size_t> lr_decay_epochs = {80, 120};
  double lr_decay_factor = 10.0;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs == 0) throw ValidationError("train config: epochs must be positive");
  if (!(cfg.base_lr > 0.0)) throw ValidationError("train config: base_lr must be positive");
  if (!(cfg.lr_decay_factor > 0.0)) throw ValidationError("train config: lr_decay_factor must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw ValidationError("train config: momentum must lie in [0,1)");
  if (cfg.weight_decay < 0.0) throw ValidationError("train config: weight_decay must be nonnegative");
  if (cfg.batch_size == 0) throw ValidationError("train config: batch_size must be positive");
  for (std::size_t i = 0; i < cfg.lr_decay_epochs.size(); ++i) {
    if (cfg.lr_decay_epochs[i] >= cfg.epochs)
      throw ValidationError("train config: lr_decay_epochs entries must be < epochs");
    if (i > 0 && cfg.lr_decay_epochs[i] <= cfg.lr_decay_epochs[i - 1])
      throw ValidationError("train config: lr_decay_epochs must be strictly increasing");
  }
}

inline double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.base_lr;
  for (std::size_t d : cfg.lr_decay_epochs)
    if (d <= epoch) lr /= cfg.lr_decay_factor;
  return lr;
}

// Dense feedforward classifier: affine layers with ReLU between them and raw
// logits at the output. All parameters are doubles.
class Network {
 public:
  Network() = default;

  Network(std::size_t input_dim, std::vector<DenseLayer> layers)
      : input_dim_(input_dim), layers_(std::move(layers)) {
    if (input_dim_ == 0) throw std::invalid_argument("network: input_dim must be positive");
    if (layers_.empty()) throw std::invalid_argument("network: at least one layer required");
    std::size_t in = input_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const DenseLayer& layer = layers_[l];
      if (layer.w.cols != in)
        throw std::invalid_argument("network: layer " + std::to_string(l) +
                                    " expects input width " + std::to_string(layer.w.cols) +
                                    " but receives " + std::to_string(in));
      if (layer.b.size() != layer.w.rows)
        throw std::invalid_argument("network: layer " + std::to_string(l) +
                                    " bias length differs from its output width");
      in = layer.w.rows;
    }
    if (in < 2) throw std::invalid_argument("network: class_count must be at least 2");
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t class_count() const { return layers_.back().w.rows; }
  std::size_t layer_count() const { return layers_.size(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

 private:
  std::size_t input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

// Glorot-style uniform init in +-sqrt(6/(fan_in+fan_out)); biases zero.
inline Network make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                        std::size_t class_count, std::uint64_t seed) {
  std::vector<std::size_t> widths;
  widths.push_back(input_dim);
  for (std::size_t h : hidden) widths.push_back(h);
  widths.push_back(class_count);
  Rng rng(derive_seed(seed, 0x696e6974ULL));
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    layer.w.resize(fan_out, fan_in);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : layer.w.data) v = rng.uniform(-bound, bound);
    layer.b.assign(fan_out, 0.0);
    layers.push_back(std::move(layer));
  }
  return Network(input_dim, std::move(layers));
}

// Per-layer intermediates kept by forward() so backward() can reuse them.
// Buffers persist across calls to avoid reallocation in training loops.
struct Trace {
  std::vector<Mat> pre;  // pre-activation of each layer; back() holds logits
  std::vector<Mat> act;  // post-ReLU output of each hidden layer
  Mat dflow_a;           // backward scratch
  Mat dflow_b;
};

inline void forward(const Network& net, const Mat& x, Trace& tr) {
  if (x.cols != net.input_dim())
    throw std::invalid_argument("forward: batch width " + std::to_string(x.cols) +
                                " differs from network input_dim " +
                                std::to_string(net.input_dim()));
  const std::size_t n_layers = net.layer_count();
  tr.pre.resize(n_layers);
  tr.act.resize(n_layers - 1);
  const Mat* cur = &x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    affine_forward(*cur, net.layers()[l].w, net.layers()[l].b, tr.pre[l]);
    if (l + 1 < n_layers) {
      relu_forward(tr.pre[l], tr.act[l]);
      cur = &tr.act[l];
    }
  }
}

inline Mat forward(const Network& net, const Mat& x) {
  Trace tr;
  forward(net, x, tr);
  return tr.pre.back();
}

inline void softmax_row(const double* logits, std::size_t n, double* out) {
  double mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

inline void softmax(const Mat& logits, Mat& probs) {
  probs.resize(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r)
    softmax_row(logits.row(r), logits.cols, probs.row(r));
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> out(logits.size());
  softmax_row(logits.data(), logits.size(), out.data());
  return out;
}

// -log p with the log floored at 1e-300 so saturated predictions cannot
// produce infinities.
inline double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

inline double cross_entropy(const double* probs, std::size_t n, std::size_t label) {
  if (label >= n) throw std::invalid_argument("cross_entropy: label out of range");
  return -safe_log(probs[label]);
}

inline double cross_entropy(const std::vector<double>& probs, std::size_t label) {
  return cross_entropy(probs.data(), probs.size(), label);
}

inline double soft_cross_entropy(const double* target, const double* probs, std::size_t n) {
  double loss = 0.0;
  for (std::size_t c = 0; c < n; ++c)
    if (target[c] != 0.0) loss -= target[c] * safe_log(probs[c]);
  return loss;
}

inline double soft_cross_entropy(const std::vector<double>& target,
                                 const std::vector<double>& probs) {
  if (target.size() != probs.size())
    throw std::invalid_argument("soft_cross_entropy: distribution lengths differ");
  return soft_cross_entropy(target.data(), probs.data(), target.size());
}

struct Gradients {
  std::vector<Mat> dw;
  std::vector<std::vector<double>> db;

  void resize_like(const Network& net) {
    dw.resize(net.layer_count());
    db.resize(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      dw[l].resize(net.layers()[l].w.rows, net.layers()[l].w.cols);
      db[l].resize(net.layers()[l].b.size());
    }
  }

  void fill(double v) {
    for (Mat& m : dw) m.fill(v);
    for (auto& b : db) std::fill(b.begin(), b.end(), v);
  }
};

inline void add_scaled(Gradients& dst, const Gradients& src, double scale) {
  for (std::size_t l = 0; l < dst.dw.size(); ++l) {
    for (std::size_t i = 0; i < dst.dw[l].size(); ++i)
      dst.dw[l].data[i] += scale * src.dw[l].data[i];
    for (std::size_t i = 0; i < dst.db[l].size(); ++i)
      dst.db[l][i] += scale * src.db[l][i];
  }
}

// Reverse-mode pass for the trace produced by forward() on input x.
// dlogits holds dL/dlogits per example. Parameter gradients land in grads;
// pass dinput to also get dL/dx (needed by every gradient-based attack).
inline void backward(const Network& net, const Mat& x, Trace& tr, const Mat& dlogits,
                     Gradients& grads, Mat* dinput = nullptr) {
  const std::size_t n_layers = net.layer_count();
  if (dlogits.rows != x.rows || dlogits.cols != net.class_count())
    throw std::invalid_argument("backward: dlogits shape differs from the logits shape");
  grads.resize_like(net);
  const Mat* d = &dlogits;
  for (std::size_t l = n_layers; l-- > 0;) {
    const Mat& input_act = (l == 0) ? x : tr.act[l - 1];
    // affine_backward zeroes dx while reading d, so they must never alias.
    Mat& dx = (l == 0 && dinput != nullptr)
                  ? *dinput
                  : (d == &tr.dflow_a ? tr.dflow_b : tr.dflow_a);
    affine_backward(input_act, net.layers()[l].w, *d, grads.dw[l], grads.db[l], dx);
    if (l > 0) {
      relu_backward(tr.pre[l - 1], dx, dx);
      d = &dx;
    }
  }
}

// Input gradient only; skips all parameter-gradient accumulation. Attacks
// call this every step, so the saved work matters.
inline void backward_input_only(const Network& net, Trace& tr, const Mat& dlogits,
                                Mat& dinput) {
  const std::size_t n_layers = net.layer_count();
  const Mat* d = &dlogits;
  for (std::size_t l = n_layers; l-- > 0;) {
    // Same aliasing rule as backward(): dx must be a different buffer than d.
    Mat& dx = (l == 0) ? dinput : (d == &tr.dflow_a ? tr.dflow_b : tr.dflow_a);
    affine_backward_input(net.layers()[l].w, *d, dx);
    if (l > 0) {
      relu_backward(tr.pre[l - 1], dx, dx);
      d = &dx;
    }
  }
}

struct SgdState {
  std::vector<Mat> vw;
  std::vector<std::vector<double>> vb;

  void init_like(const Network& net) {
    vw.resize(net.layer_count());
    vb.resize(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      vw[l].resize(net.layers()[l].w.rows, net.layers()[l].w.cols);
      vw[l].fill(0.0);
      vb[l].assign(net.layers()[l].b.size(), 0.0);
    }
  }
};

// v <- momentum*v + (grad + weight_decay*param); param <- param - lr(epoch)*v.
inline void sgd_step(Network& net, const Gradients& grads, SgdState& state,
                     std::size_t epoch, const TrainConfig& cfg) {
  const double lr = learning_rate(cfg, epoch);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    DenseLayer& layer = net.layers()[l];
    Mat& vw = state.vw[l];
    for (std::size_t i = 0; i < layer.w.size(); ++i) {
      vw.data[i] = cfg.momentum * vw.data[i] +
                   (grads.dw[l].data[i] + cfg.weight_decay * layer.w.data[i]);
      layer.w.data[i] -= lr * vw.data[i];
    }
    std::vector<double>& vb = state.vb[l];
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      vb[i] = cfg.momentum * vb[i] + (grads.db[l][i] + cfg.weight_decay * layer.b[i]);
      layer.b[i] -= lr * vb[i];
    }
  }
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) {
  const std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

struct Checkpoint {
  Network net;
  TrainConfig cfg;
};

constexpr std::uint32_t kCheckpointMagic = 0x414c4e31;  // "ALN1"

// Versioned little-endian binary checkpoint; round-trips bit-exactly.
inline void save_checkpoint(const Network& net, const TrainConfig& cfg,
                            const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidationError("cannot open checkpoint file for writing: " + path);
  detail::write_u32(os, kCheckpointMagic);
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(net.input_dim()));
  detail::write_u32(os, static_cast<std::uint32_t>(net.layer_count()));
  for (const DenseLayer& layer : net.layers()) {
    detail::write_u32(os, static_cast<std::uint32_t>(layer.w.rows));
    detail::write_u32(os, static_cast<std::uint32_t>(layer.w.cols));
    for (double v : layer.w.data) detail::write_f64(os, v);
    for (double v : layer.b) detail::write_f64(os, v);
  }
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.epochs));
  detail::write_f64(os, cfg.base_lr);
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.lr_decay_epochs.size()));
  for (std::size_t e : cfg.lr_decay_epochs)
    detail::write_u32(os, static_cast<std::uint32_t>(e));
  detail::write_f64(os, cfg.lr_decay_factor);
  detail::write_f64(os, cfg.momentum);
  detail::write_f64(os, cfg.weight_decay);
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.batch_size));
  detail::write_u64(os, cfg.seed);
  if (!os) throw ValidationError("failed while writing checkpoint file: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint file: " + path);
  if (detail::read_u32(is) != kCheckpointMagic)
    throw ValidationError("not a network checkpoint file: " + path);
  const std::uint32_t version = detail::read_u32(is);
  if (version != 1)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version) +
                          " in " + path);
  const std::size_t input_dim = detail::read_u32(is);
  const std::size_t n_layers = detail::read_u32(is);
  std::vector<DenseLayer> layers(n_layers);
  for (DenseLayer& layer : layers) {
    const std::size_t rows = detail::read_u32(is);
    const std::size_t cols = detail::read_u32(is);
    layer.w.resize(rows, cols);
    for (double& v : layer.w.data) v = detail::read_f64(is);
    layer.b.resize(rows);
    for (double& v : layer.b) v = detail::read_f64(is);
  }
  Checkpoint ck;
  ck.cfg.epochs = detail::read_u32(is);
  ck.cfg.base_lr = detail::read_f64(is);
  ck.cfg.lr_decay_epochs.resize(detail::read_u32(is));
  for (std::size_t& e : ck.cfg.lr_decay_epochs) e = detail::read_u32(is);
  ck.cfg.lr_decay_factor = detail::read_f64(is);
  ck.cfg.momentum = detail::read_f64(is);
  ck.cfg.weight_decay = detail::read_f64(is);
  ck.cfg.batch_size = detail::read_u32(is);
  ck.cfg.seed = detail::read_u64(is);
  if (!is) throw ValidationError("checkpoint file truncated: " + path);
  ck.net = Network(input_dim, std::move(layers));
  return ck;
}

}  // namespace advlab
