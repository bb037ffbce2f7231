#include "bam/teacher.hpp"

#include "loss_internal.hpp"

namespace bam {

using internal::fixed_target_ce;
using internal::grad_through_cosine_cross;
using internal::normalize_latents;
using internal::pair_scale;

LossOutput loss_bam_teacher(const LatentSet& z_student, const LatentSet& z_teacher,
                            const PairPolicy& policy, const AttentionOptions& opt,
                            double target_temperature,
                            const SinkhornSettings& sinkhorn) {
  const BatchLayout& layout = z_student.layout;
  policy.validate(layout.k);
  if (!(opt.tau > 0.0)) throw ConfigError("loss: tau must be positive");
  if (layout.k < 2) throw ConfigError("loss: needs k >= 2 views");
  if (z_student.z.rows() != layout.rows())
    throw UsageError("loss: latent rows do not match layout");
  if (z_teacher.layout.n != layout.n || z_teacher.layout.k != layout.k ||
      z_teacher.z.rows() != z_student.z.rows() ||
      z_teacher.z.cols() != z_student.z.cols())
    throw UsageError("loss: student/teacher layouts differ");

  auto nl_s = normalize_latents(z_student.z, "loss (student)");
  auto nl_t = normalize_latents(z_teacher.z, "loss (teacher)");

  // Attention side: student rows against teacher columns. The diagonal is a
  // genuine similarity here, not an identity.
  SimMatrix cross;
  cross.values = nl_s.zn * nl_t.zn.transpose();
  cross.n = layout.n;
  cross.k = layout.k;
  cross.self_similarity = false;
  if (opt.mask_positives) cross = mask_positives(std::move(cross), opt.mask_mode);
  AttnMatrix attn = opt.global_norm ? softmax_rows(cross, opt.tau)
                                    : softmax_rows_blocked(cross, opt.tau);

  // Target side: balanced teacher-only similarities.
  SimMatrix self;
  self.values = nl_t.zn * nl_t.zn.transpose();
  self.values.diagonal().setOnes();
  self.n = layout.n;
  self.k = layout.k;
  self.self_similarity = true;
  if (opt.mask_positives) self = mask_positives(std::move(self), opt.mask_mode);
  BalancedMatrix balanced =
      opt.global_norm
          ? sinkhorn_balance(self, target_temperature, sinkhorn.max_iters, sinkhorn.tol)
          : sinkhorn_balance_blocked(self, target_temperature, sinkhorn.max_iters,
                                     sinkhorn.tol);

  Matrix target = detail::accumulate_target_rows(balanced.values, layout, policy);
  const int group = opt.global_norm ? layout.rows() : layout.n;
  const double scale = pair_scale(layout, policy);
  // zero_diag=false: the cross diagonal moves with the student latents.
  auto ce = fixed_target_ce(attn.values, target, opt.tau, group, layout.n,
                            opt.mask_positives, /*zero_diag=*/false, scale);

  LossOutput out;
  out.value = ce.value;
  out.grad_z = grad_through_cosine_cross(ce.g, nl_s, nl_t.zn);
  out.entropy = entropy_report(attn, balanced);
  out.sinkhorn_warning = !balanced.converged;
  return out;
}

}  // namespace bam
