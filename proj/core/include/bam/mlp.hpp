#pragma once

#include <cstdint>
#include <vector>

#include "bam/rng.hpp"
#include "bam/types.hpp"

namespace bam {

enum class Activation { Relu };

/// Fully-connected net shape: layer_dims = [input, hidden..., output].
/// Hidden layers use ReLU, the output layer is linear. batchnorm[l] inserts
/// a batch-norm stage between layer l's affine map and its activation.
struct MlpSpec {
  std::vector<int> layer_dims;
  Activation activation = Activation::Relu;
  std::vector<bool> batchnorm;  // empty means none; else one flag per layer

  int num_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  bool has_bn(int layer) const {
    return !batchnorm.empty() && batchnorm[static_cast<std::size_t>(layer)];
  }
  void validate() const;
};

struct LayerParams {
  Matrix w;  // in x out
  Vector b;  // out
  // Batch-norm state; sized only when the layer has a norm stage.
  Vector gamma, beta, run_mean, run_var;
};

struct NetParams {
  std::vector<LayerParams> layers;
};

/// Encoder f (theta) and projector g (phi), plus their shapes. A teacher is
/// simply a second ModelParams with identical shapes.
struct ModelParams {
  MlpSpec spec_f, spec_g;
  NetParams f, g;

  void check_finite() const;
};

enum class TensorKind { Weight, Bias, BnGamma, BnBeta, BnMean, BnVar };

/// Visits every tensor of both nets in declaration order. BnMean/BnVar are
/// running statistics, not trainable parameters.
template <typename P, typename Fn>
void for_each_tensor(P& params, Fn&& fn) {
  auto walk = [&](auto& net, const MlpSpec& spec) {
    for (int l = 0; l < spec.num_layers(); ++l) {
      auto& lp = net.layers[static_cast<std::size_t>(l)];
      fn(lp.w, TensorKind::Weight);
      fn(lp.b, TensorKind::Bias);
      if (spec.has_bn(l)) {
        fn(lp.gamma, TensorKind::BnGamma);
        fn(lp.beta, TensorKind::BnBeta);
        fn(lp.run_mean, TensorKind::BnMean);
        fn(lp.run_var, TensorKind::BnVar);
      }
    }
  };
  walk(params.f, params.spec_f);
  walk(params.g, params.spec_g);
}

/// Lockstep visit over two structurally-identical parameter sets
/// (e.g. gradients and their velocity buffers).
template <typename PA, typename PB, typename Fn>
void for_each_tensor_pair(PA& a, PB& b, Fn&& fn) {
  auto walk = [&](auto& na, auto& nb, const MlpSpec& spec) {
    for (int l = 0; l < spec.num_layers(); ++l) {
      auto& la = na.layers[static_cast<std::size_t>(l)];
      auto& lb = nb.layers[static_cast<std::size_t>(l)];
      fn(la.w, lb.w, TensorKind::Weight);
      fn(la.b, lb.b, TensorKind::Bias);
      if (spec.has_bn(l)) {
        fn(la.gamma, lb.gamma, TensorKind::BnGamma);
        fn(la.beta, lb.beta, TensorKind::BnBeta);
        fn(la.run_mean, lb.run_mean, TensorKind::BnMean);
        fn(la.run_var, lb.run_var, TensorKind::BnVar);
      }
    }
  };
  walk(a.f, b.f, a.spec_f);
  walk(a.g, b.g, a.spec_g);
}

enum class BnMode { Train, Inference };

struct LayerTape {
  Matrix input;    // batch x in
  Matrix pre_act;  // value fed to the activation (post-norm when normed)
  // Batch-norm caches (train mode), sized only when the layer has one.
  Matrix affine_out, xhat;
  Vector mean, var;
  BnMode bn_mode = BnMode::Train;
};

struct NetTape {
  std::vector<LayerTape> layers;
  Matrix output;
};

/// Everything backward needs to reproduce the forward pass exactly.
struct ForwardTape {
  NetTape f, g;
  BnMode mode = BnMode::Train;
};

struct ForwardResult {
  Matrix h;  // encoder output, the representation used for evaluation
  Matrix z;  // projector output, consumed by the loss
  ForwardTape tape;
};

/// Fan-in-scaled uniform init: W ~ U(-a, a) with a = sqrt(3 / fan_in)
/// (std 1/sqrt(fan_in)); biases zero; gamma 1, beta 0 where normed.
ModelParams init_params(const MlpSpec& spec_f, const MlpSpec& spec_g, std::uint64_t seed);

ForwardResult forward(const ModelParams& params, const Matrix& x,
                      BnMode mode = BnMode::Train);

/// Exact gradients of a scalar loss with dL/dz given; returned in a
/// ModelParams-shaped container (running stats stay zero).
ModelParams backward(const ModelParams& params, const ForwardTape& tape,
                     const Matrix& dl_dz);

/// Zero-valued gradient/velocity container with the same shapes.
ModelParams zeros_like(const ModelParams& params);

/// teacher' = momentum * teacher + (1 - momentum) * student, elementwise.
ModelParams ema_update(const ModelParams& student, const ModelParams& teacher,
                       double momentum);

/// Folds the tape's batch statistics into the running mean/var buffers
/// (run = momentum * run + (1 - momentum) * batch). No-op without norms.
void accumulate_bn_stats(ModelParams& params, const ForwardTape& tape,
                         double momentum = 0.9);

}  // namespace bam
