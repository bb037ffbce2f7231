#include "bam/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <ostream>

#include "bam/teacher.hpp"

namespace bam {

double lr_at(const OptimConfig& cfg, int step) {
  const double base = cfg.learning_rate_base;
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
    return base * static_cast<double>(step) / cfg.warmup_steps;
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  if (span <= 0.0) return base;
  const double t = static_cast<double>(step - cfg.warmup_steps) / span;
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(t, 1.0)));
}

CollapseStats collapse_indicators(const Matrix& h) {
  if (h.rows() < 2) throw UsageError("collapse_indicators: needs at least 2 rows");
  CollapseStats st;

  const double batch = static_cast<double>(h.rows());
  Eigen::RowVectorXd mean = h.colwise().mean();
  Matrix centered = h.rowwise() - mean;
  Vector var = centered.array().square().colwise().sum() / batch;
  st.latent_std = var.array().sqrt().mean();

  Eigen::JacobiSVD<Matrix> svd(centered);
  Vector sv = svd.singularValues();
  const double total = sv.sum();
  if (total <= 0.0) {
    st.effective_rank = 1.0;
    return st;
  }
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double p = sv[i] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  st.effective_rank = std::exp(entropy);
  return st;
}

namespace {

bool all_tensors_finite(const ModelParams& p) {
  bool ok = true;
  for_each_tensor(p, [&](const auto& t, TensorKind) {
    if (!t.allFinite()) ok = false;
  });
  return ok;
}

std::string format_log_json(const StepLog& log) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%d,\"loss\":%.17g,\"entropy_a\":%.17g,\"entropy_b\":%.17g,"
                "\"latent_std\":%.17g,\"effective_rank\":%.17g,"
                "\"sinkhorn_warning\":%s,\"lr\":%.17g}",
                log.step, log.loss, log.entropy_a, log.entropy_b, log.latent_std,
                log.effective_rank, log.sinkhorn_warning ? "true" : "false", log.lr);
  return buf;
}

// Epoch shuffle indices live in a high band so they never collide with the
// per-class streams the dataset generators consume.
constexpr std::uint64_t kShuffleBand = 1ull << 32;

}  // namespace

TrainResult train(const RunConfig& cfg, const Dataset& ds, const StepCallback& on_log) {
  cfg.validate();
  ds.validate();
  if (ds.size() < cfg.n)
    throw ConfigError("run.n: batch of " + std::to_string(cfg.n) +
                      " images exceeds dataset size " + std::to_string(ds.size()));

  const MlpSpec enc = cfg.encoder_spec(ds.dim());
  const MlpSpec proj = cfg.projector_spec();
  const PairPolicy policy = cfg.effective_policy();
  const AttentionOptions attn_opt = cfg.attention_options();

  TrainResult result;
  result.params = init_params(enc, proj, cfg.seed);
  if (cfg.loss_mode == LossMode::BamTeacher) result.teacher = result.params;

  ModelParams velocity = zeros_like(result.params);
  const BatchLayout layout{cfg.n, cfg.k};

  std::vector<int> perm;
  std::size_t perm_pos = 0;
  std::uint64_t epoch = 0;
  StepLog last_log;

  for (int step = 0; step < cfg.optim.total_steps; ++step) {
    if (perm_pos + static_cast<std::size_t>(cfg.n) > perm.size()) {
      perm.resize(static_cast<std::size_t>(ds.size()));
      std::iota(perm.begin(), perm.end(), 0);
      Rng shuffle_rng = Rng::derive(cfg.seed, Stream::Data, kShuffleBand + epoch);
      shuffle_rng.shuffle(perm);
      perm_pos = 0;
      ++epoch;
    }
    std::span<const int> indices(perm.data() + perm_pos, static_cast<std::size_t>(cfg.n));
    perm_pos += static_cast<std::size_t>(cfg.n);

    const std::uint64_t view_seed =
        Rng::derive(cfg.seed, Stream::Augment, static_cast<std::uint64_t>(step)).next_u64();
    ViewBatch vb = sample_views(ds, indices, cfg.k, cfg.augment, view_seed);

    ForwardResult fwd = forward(result.params, vb.views, BnMode::Train);
    LatentSet z{fwd.z, layout};

    LossOutput lo;
    try {
      switch (cfg.loss_mode) {
        case LossMode::Vanilla:
          lo = loss_vanilla(z, policy, attn_opt, cfg.vanilla_symmetric_grad);
          break;
        case LossMode::Bam:
          lo = loss_bam(z, policy, attn_opt, cfg.tau_b, cfg.sinkhorn);
          break;
        case LossMode::BamTeacher: {
          ForwardResult tfwd = forward(*result.teacher, vb.views, BnMode::Inference);
          lo = loss_bam_teacher(z, LatentSet{tfwd.z, layout}, policy, attn_opt,
                                cfg.tau_b, cfg.sinkhorn);
          break;
        }
        case LossMode::Contrastive:
          lo = loss_contrastive(z, policy, cfg.tau);
          break;
      }
    } catch (const NumericError& e) {
      throw NumericError("training aborted at step " + std::to_string(step) + ": " +
                         e.what() + "; last log " + format_log_json(last_log));
    }

    if (!std::isfinite(lo.value) || !lo.grad_z.allFinite())
      throw NumericError("training aborted at step " + std::to_string(step) +
                         ": non-finite loss or latent gradient; last log " +
                         format_log_json(last_log));

    ModelParams grads = backward(result.params, fwd.tape, lo.grad_z);
    if (!all_tensors_finite(grads))
      throw NumericError("training aborted at step " + std::to_string(step) +
                         ": non-finite parameter gradient; last log " +
                         format_log_json(last_log));

    if (cfg.optim.weight_decay > 0.0)
      for_each_tensor_pair(grads, result.params, [&](auto& g, const auto& w, TensorKind kind) {
        if (kind == TensorKind::Weight) g += cfg.optim.weight_decay * w;
      });

    if (cfg.optim.grad_clip > 0.0) {
      double sq = 0.0;
      for_each_tensor(grads, [&](const auto& g, TensorKind kind) {
        if (kind != TensorKind::BnMean && kind != TensorKind::BnVar) sq += g.squaredNorm();
      });
      const double norm = std::sqrt(sq);
      if (norm > cfg.optim.grad_clip) {
        const double s = cfg.optim.grad_clip / norm;
        for_each_tensor(grads, [&](auto& g, TensorKind) { g *= s; });
      }
    }

    const double lr = lr_at(cfg.optim, step + 1);
    for_each_tensor_pair(velocity, grads, [&](auto& v, const auto& g, TensorKind kind) {
      if (kind == TensorKind::BnMean || kind == TensorKind::BnVar) return;
      v = cfg.optim.momentum * v + g;
    });
    for_each_tensor_pair(result.params, velocity, [&](auto& w, const auto& v, TensorKind kind) {
      if (kind == TensorKind::BnMean || kind == TensorKind::BnVar) return;
      w -= lr * v;
    });

    if (cfg.batchnorm) accumulate_bn_stats(result.params, fwd.tape);
    if (result.teacher)
      result.teacher = ema_update(result.params, *result.teacher, cfg.teacher_momentum);

    if (step % cfg.log_every == 0 || step + 1 == cfg.optim.total_steps) {
      CollapseStats cs = collapse_indicators(fwd.h);
      StepLog log;
      log.step = step;
      log.loss = lo.value;
      log.entropy_a = lo.entropy.mean_row_entropy_a;
      log.entropy_b = lo.entropy.mean_row_entropy_b;
      log.latent_std = cs.latent_std;
      log.effective_rank = cs.effective_rank;
      log.sinkhorn_warning = lo.sinkhorn_warning;
      log.lr = lr;
      result.logs.push_back(log);
      last_log = log;
      if (on_log) on_log(log, result.params);
    }
  }
  return result;
}

void write_steplog_jsonl(std::ostream& out, std::span<const StepLog> logs) {
  for (const StepLog& log : logs) out << format_log_json(log) << "\n";
}

void write_steplog_csv(std::ostream& out, std::span<const StepLog> logs) {
  out << "step,loss,entropy_a,entropy_b,latent_std,effective_rank,sinkhorn_warning,lr\n";
  char buf[400];
  for (const StepLog& log : logs) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                  log.step, log.loss, log.entropy_a, log.entropy_b, log.latent_std,
                  log.effective_rank, log.sinkhorn_warning ? 1 : 0, log.lr);
    out << buf;
  }
}

}  // namespace bam
