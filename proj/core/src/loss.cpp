#include "bam/loss.hpp"

#include <cmath>

#include "loss_internal.hpp"

namespace bam {

using internal::CeGrad;
using internal::fixed_target_ce;
using internal::grad_through_cosine_self;
using internal::is_masked_entry;
using internal::kNegInf;
using internal::normalize_latents;
using internal::NormalizedLatents;
using internal::pair_scale;

PairPolicy PairPolicy::all_ordered(int k) {
  PairPolicy p;
  for (int j = 0; j < k; ++j)
    for (int jp = 0; jp < k; ++jp)
      if (j != jp) p.pairs.emplace_back(j, jp);
  return p;
}

void PairPolicy::validate(int k) const {
  if (pairs.empty()) throw ConfigError("pair policy: no pairs");
  for (auto [j, jp] : pairs) {
    if (j == jp) throw ConfigError("pair policy: self-pair (" + std::to_string(j) + ")");
    if (j < 0 || jp < 0 || j >= k || jp >= k)
      throw ConfigError("pair policy: view index out of range for k=" + std::to_string(k));
  }
}

namespace detail {

Matrix accumulate_target_rows(const Matrix& rows, const BatchLayout& layout,
                              const PairPolicy& policy) {
  Matrix t = Matrix::Zero(rows.rows(), rows.cols());
  for (auto [j, jp] : policy.pairs)
    for (int i = 0; i < layout.n; ++i)
      t.row(layout.row_of(i, jp)) += rows.row(layout.row_of(i, j));
  return t;
}

}  // namespace detail

namespace {

struct AttnBuild {
  NormalizedLatents nl;
  SimMatrix sim;    // post-mask similarity actually normalized
  AttnMatrix attn;  // A
};

AttnBuild build_attention(const LatentSet& z, const AttentionOptions& opt) {
  if (!(opt.tau > 0.0)) throw ConfigError("loss: tau must be positive");
  if (z.layout.k < 2) throw ConfigError("loss: needs k >= 2 views");
  if (z.z.rows() != z.layout.rows())
    throw UsageError("loss: latent rows do not match layout");
  AttnBuild out;
  out.nl = normalize_latents(z.z, "loss");
  out.sim.values = out.nl.zn * out.nl.zn.transpose();
  out.sim.values.diagonal().setOnes();
  out.sim.n = z.layout.n;
  out.sim.k = z.layout.k;
  out.sim.self_similarity = true;
  if (opt.mask_positives) out.sim = mask_positives(std::move(out.sim), opt.mask_mode);
  out.attn = opt.global_norm ? softmax_rows(out.sim, opt.tau)
                             : softmax_rows_blocked(out.sim, opt.tau);
  return out;
}

EntropyReport report_from(const AttnMatrix& a, const Matrix& target_rows) {
  EntropyReport rep;
  rep.mean_row_entropy_a = row_entropies(a.values).mean();
  rep.mean_row_entropy_b = row_entropies(target_rows).mean();
  rep.matrix_entropy = matrix_entropy(target_rows);
  return rep;
}

}  // namespace

LossOutput loss_vanilla(const LatentSet& z, const PairPolicy& policy,
                        const AttentionOptions& opt, bool symmetric_grad) {
  policy.validate(z.layout.k);
  AttnBuild ab = build_attention(z, opt);
  const int group = opt.global_norm ? z.layout.rows() : z.layout.n;
  const double scale = pair_scale(z.layout, policy);

  Matrix target = detail::accumulate_target_rows(ab.attn.values, z.layout, policy);
  CeGrad ce = fixed_target_ce(ab.attn.values, target, opt.tau, group, z.layout.n,
                              opt.mask_positives, /*zero_diag=*/true, scale);

  if (symmetric_grad) {
    // Extra path through the target rows: for pair (j, j') the row (i, j)
    // also enters as the distribution side of -<a_s, log a_r>.
    const Matrix& a = ab.attn.values;
    for (auto [j, jp] : policy.pairs) {
      for (int i = 0; i < z.layout.n; ++i) {
        const int s = z.layout.row_of(i, j);
        const int r = z.layout.row_of(i, jp);
        for (int g0 = 0; g0 < z.layout.rows(); g0 += group) {
          double inner = 0.0;
          for (int q = g0; q < g0 + group; ++q)
            if (a(s, q) > 0.0) inner += a(s, q) * std::log(a(r, q));
          for (int q = g0; q < g0 + group; ++q) {
            if (!(a(s, q) > 0.0)) continue;
            if (opt.mask_positives && is_masked_entry(s, q, z.layout.n)) continue;
            if (!opt.mask_positives && s == q) continue;
            ce.g(s, q) += -scale / opt.tau * a(s, q) * (std::log(a(r, q)) - inner);
          }
        }
      }
    }
  }

  LossOutput out;
  out.value = ce.value;
  out.grad_z = grad_through_cosine_self(ce.g, ab.nl);
  out.entropy = report_from(ab.attn, target);
  // The target rows are attention rows, so both entropy series coincide.
  out.entropy.mean_row_entropy_b = out.entropy.mean_row_entropy_a;
  return out;
}

LossOutput loss_bam(const LatentSet& z, const PairPolicy& policy,
                    const AttentionOptions& opt, double target_temperature,
                    const SinkhornSettings& sinkhorn) {
  policy.validate(z.layout.k);
  AttnBuild ab = build_attention(z, opt);
  const int group = opt.global_norm ? z.layout.rows() : z.layout.n;
  const double scale = pair_scale(z.layout, policy);

  BalancedMatrix balanced =
      opt.global_norm
          ? sinkhorn_balance(ab.sim, target_temperature, sinkhorn.max_iters, sinkhorn.tol)
          : sinkhorn_balance_blocked(ab.sim, target_temperature, sinkhorn.max_iters,
                                     sinkhorn.tol);

  Matrix target = detail::accumulate_target_rows(balanced.values, z.layout, policy);
  CeGrad ce = fixed_target_ce(ab.attn.values, target, opt.tau, group, z.layout.n,
                              opt.mask_positives, /*zero_diag=*/true, scale);

  LossOutput out;
  out.value = ce.value;
  out.grad_z = grad_through_cosine_self(ce.g, ab.nl);
  out.entropy = entropy_report(ab.attn, balanced);
  out.sinkhorn_warning = !balanced.converged;
  return out;
}

LossOutput loss_contrastive(const LatentSet& z, const PairPolicy& policy, double tau) {
  policy.validate(z.layout.k);
  if (!(tau > 0.0)) throw ConfigError("loss: tau must be positive");
  if (z.z.rows() != z.layout.rows())
    throw UsageError("loss: latent rows do not match layout");

  NormalizedLatents nl = normalize_latents(z.z, "loss");
  SimMatrix sim;
  sim.values = nl.zn * nl.zn.transpose();
  sim.values.diagonal().setConstant(kNegInf);  // self entries leave the support
  sim.n = z.layout.n;
  sim.k = z.layout.k;
  sim.masked = true;
  sim.mask_mode = MaskMode::NegInf;
  AttnMatrix attn = softmax_rows(sim, tau);

  Matrix target = Matrix::Zero(sim.values.rows(), sim.values.cols());
  for (auto [j, jp] : policy.pairs)
    for (int i = 0; i < z.layout.n; ++i)
      target(z.layout.row_of(i, jp), z.layout.row_of(i, j)) += 1.0;

  const double scale = pair_scale(z.layout, policy);
  CeGrad ce = fixed_target_ce(attn.values, target, tau, z.layout.rows(), z.layout.n,
                              /*masked=*/false, /*zero_diag=*/true, scale);

  LossOutput out;
  out.value = ce.value;
  out.grad_z = grad_through_cosine_self(ce.g, nl);
  out.entropy.mean_row_entropy_a = row_entropies(attn.values).mean();
  out.entropy.mean_row_entropy_b = row_entropies(target).mean();
  out.entropy.matrix_entropy = matrix_entropy(target);
  return out;
}

namespace detail {

double swapped_ce_value(const LatentSet& z, const Matrix& target,
                        const PairPolicy& policy, const AttentionOptions& opt) {
  AttnBuild ab = build_attention(z, opt);
  double raw = 0.0;
  const Matrix& a = ab.attn.values;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index q = 0; q < a.cols(); ++q)
      if (target(r, q) > 0.0) raw -= target(r, q) * std::log(a(r, q));
  return raw * pair_scale(z.layout, policy);
}

}  // namespace detail

}  // namespace bam
