#include "bam/mlp.hpp"

#include <cmath>

namespace bam {

namespace {
constexpr double kBnEps = 1e-5;
}

void MlpSpec::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("mlp: need at least one layer");
  for (int d : layer_dims)
    if (d < 1) throw ConfigError("mlp: layer dims must be positive");
  if (!batchnorm.empty() && batchnorm.size() != static_cast<std::size_t>(num_layers()))
    throw ConfigError("mlp: batchnorm flags must match layer count");
}

void ModelParams::check_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](const auto& t, TensorKind) {
    if (!t.allFinite()) ok = false;
  });
  if (!ok) throw NumericError("model parameters contain non-finite values");
}

namespace {

NetParams init_net(const MlpSpec& spec, Rng& rng) {
  NetParams net;
  net.layers.resize(static_cast<std::size_t>(spec.num_layers()));
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_dims[static_cast<std::size_t>(l)];
    const int out = spec.layer_dims[static_cast<std::size_t>(l + 1)];
    auto& lp = net.layers[static_cast<std::size_t>(l)];
    lp.w.resize(in, out);
    const double a = std::sqrt(3.0 / in);
    for (int r = 0; r < in; ++r)
      for (int c = 0; c < out; ++c) lp.w(r, c) = rng.uniform(-a, a);
    lp.b = Vector::Zero(out);
    if (spec.has_bn(l)) {
      lp.gamma = Vector::Ones(out);
      lp.beta = Vector::Zero(out);
      lp.run_mean = Vector::Zero(out);
      lp.run_var = Vector::Ones(out);
    }
  }
  return net;
}

}  // namespace

ModelParams init_params(const MlpSpec& spec_f, const MlpSpec& spec_g, std::uint64_t seed) {
  spec_f.validate();
  spec_g.validate();
  if (spec_g.input_dim() != spec_f.output_dim())
    throw ConfigError("init_params: projector input dim " +
                      std::to_string(spec_g.input_dim()) +
                      " != encoder output dim " + std::to_string(spec_f.output_dim()));
  ModelParams p;
  p.spec_f = spec_f;
  p.spec_g = spec_g;
  Rng rng = Rng::derive(seed, Stream::Init, 0);
  p.f = init_net(spec_f, rng);
  p.g = init_net(spec_g, rng);
  return p;
}

namespace {

Matrix net_forward(const NetParams& net, const MlpSpec& spec, const Matrix& x,
                   BnMode mode, NetTape& tape) {
  tape.layers.resize(static_cast<std::size_t>(spec.num_layers()));
  Matrix cur = x;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const auto& lp = net.layers[static_cast<std::size_t>(l)];
    auto& lt = tape.layers[static_cast<std::size_t>(l)];
    lt.input = cur;
    lt.bn_mode = mode;

    Matrix u = cur * lp.w;
    u.rowwise() += lp.b.transpose();

    if (spec.has_bn(l)) {
      lt.affine_out = u;
      const auto batch = static_cast<double>(u.rows());
      if (mode == BnMode::Train) {
        lt.mean = u.colwise().mean();
        Matrix centered = u.rowwise() - lt.mean.transpose();
        lt.var = centered.array().square().colwise().sum() / batch;
        Vector inv_std = (lt.var.array() + kBnEps).rsqrt();
        lt.xhat = centered.array().rowwise() * inv_std.transpose().array();
      } else {
        lt.mean = lp.run_mean;
        lt.var = lp.run_var;
        Vector inv_std = (lt.var.array() + kBnEps).rsqrt();
        lt.xhat = (u.rowwise() - lt.mean.transpose()).array().rowwise() *
                  inv_std.transpose().array();
      }
      u = lt.xhat.array().rowwise() * lp.gamma.transpose().array();
      u.rowwise() += lp.beta.transpose();
    }

    lt.pre_act = u;
    if (l + 1 < spec.num_layers()) cur = u.cwiseMax(0.0);  // ReLU on hidden layers
    else cur = u;
  }
  tape.output = cur;
  return cur;
}

}  // namespace

ForwardResult forward(const ModelParams& params, const Matrix& x, BnMode mode) {
  if (x.cols() != params.spec_f.input_dim())
    throw ConfigError("forward: input has " + std::to_string(x.cols()) +
                      " columns, encoder expects " +
                      std::to_string(params.spec_f.input_dim()));
  if (!x.allFinite()) throw DataError("forward: non-finite input");

  ForwardResult res;
  res.tape.mode = mode;
  res.h = net_forward(params.f, params.spec_f, x, mode, res.tape.f);
  res.z = net_forward(params.g, params.spec_g, res.h, mode, res.tape.g);
  return res;
}

namespace {

// Returns dL/d(input of the net); fills grads.
Matrix net_backward(const NetParams& net, const MlpSpec& spec, const NetTape& tape,
                    const Matrix& dl_dout, NetParams& grads) {
  Matrix delta = dl_dout;
  for (int l = spec.num_layers() - 1; l >= 0; --l) {
    const auto& lp = net.layers[static_cast<std::size_t>(l)];
    const auto& lt = tape.layers[static_cast<std::size_t>(l)];
    auto& gl = grads.layers[static_cast<std::size_t>(l)];

    if (l + 1 < spec.num_layers())
      delta = delta.cwiseProduct((lt.pre_act.array() > 0.0).cast<double>().matrix());

    if (spec.has_bn(l)) {
      // d(gamma * xhat + beta)
      gl.gamma += (delta.cwiseProduct(lt.xhat)).colwise().sum().transpose();
      gl.beta += delta.colwise().sum().transpose();
      Matrix dxhat = delta.array().rowwise() * lp.gamma.transpose().array();

      Vector inv_std = (lt.var.array() + kBnEps).rsqrt();
      if (lt.bn_mode == BnMode::Train) {
        // Batch statistics depend on the inputs, so fold their paths in.
        const auto batch = static_cast<double>(lt.affine_out.rows());
        Matrix centered = lt.affine_out.rowwise() - lt.mean.transpose();
        Vector dvar = (dxhat.cwiseProduct(centered)).colwise().sum().transpose();
        dvar = dvar.array() * (-0.5) * inv_std.array().cube();
        Vector dmean = -(dxhat.colwise().sum().transpose().array() * inv_std.array());
        dmean.array() += dvar.array() * (-2.0 / batch) * centered.colwise().sum().transpose().array();
        delta = dxhat.array().rowwise() * inv_std.transpose().array();
        delta += centered * (2.0 / batch) * dvar.asDiagonal();
        delta.rowwise() += (dmean / batch).transpose();
      } else {
        delta = dxhat.array().rowwise() * inv_std.transpose().array();
      }
    }

    gl.w += lt.input.transpose() * delta;
    gl.b += delta.colwise().sum().transpose();
    delta = delta * lp.w.transpose();
  }
  return delta;
}

}  // namespace

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z = params;
  for_each_tensor(z, [](auto& t, TensorKind) { t.setZero(); });
  return z;
}

ModelParams backward(const ModelParams& params, const ForwardTape& tape,
                     const Matrix& dl_dz) {
  if (tape.g.output.rows() != dl_dz.rows() || tape.g.output.cols() != dl_dz.cols())
    throw InternalError("backward: dL/dz shape does not match the taped batch");

  ModelParams grads = zeros_like(params);
  Matrix dl_dh = net_backward(params.g, params.spec_g, tape.g, dl_dz, grads.g);
  net_backward(params.f, params.spec_f, tape.f, dl_dh, grads.f);
  return grads;
}

ModelParams ema_update(const ModelParams& student, const ModelParams& teacher,
                       double momentum) {
  if (momentum < 0.0 || momentum > 1.0)
    throw ConfigError("ema_update: momentum must be in [0, 1]");
  if (student.spec_f.layer_dims != teacher.spec_f.layer_dims ||
      student.spec_g.layer_dims != teacher.spec_g.layer_dims)
    throw ConfigError("ema_update: student/teacher shapes differ");

  ModelParams out = teacher;
  auto blend = [&](auto& net_out, const auto& net_student) {
    for (std::size_t l = 0; l < net_out.layers.size(); ++l) {
      auto& t = net_out.layers[l];
      const auto& s = net_student.layers[l];
      if (t.w.rows() != s.w.rows() || t.w.cols() != s.w.cols())
        throw ConfigError("ema_update: layer shape mismatch");
      t.w = momentum * t.w + (1.0 - momentum) * s.w;
      t.b = momentum * t.b + (1.0 - momentum) * s.b;
      if (t.gamma.size() > 0) {
        t.gamma = momentum * t.gamma + (1.0 - momentum) * s.gamma;
        t.beta = momentum * t.beta + (1.0 - momentum) * s.beta;
        t.run_mean = momentum * t.run_mean + (1.0 - momentum) * s.run_mean;
        t.run_var = momentum * t.run_var + (1.0 - momentum) * s.run_var;
      }
    }
  };
  blend(out.f, student.f);
  blend(out.g, student.g);
  return out;
}

void accumulate_bn_stats(ModelParams& params, const ForwardTape& tape, double momentum) {
  auto fold = [&](NetParams& net, const MlpSpec& spec, const NetTape& nt) {
    for (int l = 0; l < spec.num_layers(); ++l) {
      if (!spec.has_bn(l)) continue;
      auto& lp = net.layers[static_cast<std::size_t>(l)];
      const auto& lt = nt.layers[static_cast<std::size_t>(l)];
      if (lt.bn_mode != BnMode::Train) continue;
      lp.run_mean = momentum * lp.run_mean + (1.0 - momentum) * lt.mean;
      lp.run_var = momentum * lp.run_var + (1.0 - momentum) * lt.var;
    }
  };
  fold(params.f, params.spec_f, tape.f);
  fold(params.g, params.spec_g, tape.g);
}

}  // namespace bam
