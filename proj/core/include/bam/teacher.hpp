#pragma once

#include "bam/loss.hpp"
#include "bam/mlp.hpp"

namespace bam {

/// Momentum-averaged shadow copy of the student. Updated after every
/// optimizer step; never receives gradients.
struct TeacherState {
  ModelParams params;
  double momentum = 0.99;
};

/// Balanced-matching loss with a teacher: the attention side softmaxes the
/// masked student-to-teacher similarities, the balanced target comes from the
/// teacher-to-teacher similarities alone. grad_z refers to student rows only.
LossOutput loss_bam_teacher(const LatentSet& z_student, const LatentSet& z_teacher,
                            const PairPolicy& policy, const AttentionOptions& opt,
                            double target_temperature,
                            const SinkhornSettings& sinkhorn);

}  // namespace bam
