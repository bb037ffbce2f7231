#pragma once

#include <utility>
#include <vector>

#include "bam/attention.hpp"
#include "bam/balancing.hpp"
#include "bam/types.hpp"

namespace bam {

/// Ordered view pairs (j, j'): the target distribution comes from view j, the
/// log side (which receives gradient) from view j'. Self-pairs are invalid.
struct PairPolicy {
  std::vector<std::pair<int, int>> pairs;

  static PairPolicy all_ordered(int k);
  void validate(int k) const;
  int count() const { return static_cast<int>(pairs.size()); }
};

/// How the attention side of every loss is built.
struct AttentionOptions {
  double tau = 0.1;
  bool mask_positives = true;
  MaskMode mask_mode = MaskMode::Zero;
  bool global_norm = true;  // false: softmax/balancing per n x n view block
};

struct LossOutput {
  double value = 0.0;  // mean over (pairs x images); always >= 0
  Matrix grad_z;       // d value / d latents, (n*k) x d
  EntropyReport entropy;
  bool sinkhorn_warning = false;
};

/// Swapped cross-entropy between attention rows, the target side held
/// constant. The degenerate fixed point (all latents equal) has zero grad.
/// symmetric_grad additionally propagates through the target rows.
LossOutput loss_vanilla(const LatentSet& z, const PairPolicy& policy,
                        const AttentionOptions& opt, bool symmetric_grad = false);

/// Swapped cross-entropy against the balanced target: rows of the
/// doubly-stochastic balance of the masked similarities at target_temperature,
/// held constant (no gradient through the balancing).
LossOutput loss_bam(const LatentSet& z, const PairPolicy& policy,
                    const AttentionOptions& opt, double target_temperature,
                    const SinkhornSettings& sinkhorn);

/// One-hot positive-pair target (the classic instance-discrimination
/// baseline): softmax over all non-self entries, -log mass at the paired
/// view's column. Always global, always diagonal-excluded.
LossOutput loss_contrastive(const LatentSet& z, const PairPolicy& policy, double tau);

namespace detail {

/// T[row(i, j')] += rows.row(row(i, j)) for every (j, j') in the policy.
Matrix accumulate_target_rows(const Matrix& rows, const BatchLayout& layout,
                              const PairPolicy& policy);

/// Value of -sum T log A(z) / (pairs * n) with T fixed — the quantity whose
/// z-gradient the losses report. Exposed for finite-difference checks.
double swapped_ce_value(const LatentSet& z, const Matrix& target,
                        const PairPolicy& policy, const AttentionOptions& opt);

}  // namespace detail

}  // namespace bam
