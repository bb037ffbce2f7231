#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bam/config.hpp"
#include "bam/datagen.hpp"
#include "bam/mlp.hpp"
#include "bam/types.hpp"

namespace bam {

/// lr(t) = base * t / warmup for t <= warmup, then cosine decay to 0 at
/// t = total. t counts optimizer steps starting at 1.
double lr_at(const OptimConfig& cfg, int step);

struct StepLog {
  int step = 0;
  double loss = 0.0;
  double entropy_a = 0.0;
  double entropy_b = 0.0;
  double latent_std = 0.0;      // mean per-dimension std of h over the batch
  double effective_rank = 0.0;  // exp entropy of centered h's singular values
  bool sinkhorn_warning = false;
  double lr = 0.0;
};

struct CollapseStats {
  double latent_std = 0.0;
  double effective_rank = 0.0;
};

/// Collapse diagnostics of an embedding batch. A constant embedding gives
/// (0, 1); spreading rows raise the effective rank toward min(batch, dim).
CollapseStats collapse_indicators(const Matrix& h);

struct TrainResult {
  ModelParams params;
  std::optional<ModelParams> teacher;
  std::vector<StepLog> logs;
};

/// Called at every logged step; `params` is the post-update student.
using StepCallback =
    std::function<void(const StepLog& log, const ModelParams& params)>;

/// Runs the full optimization loop. Deterministic in (cfg, ds): identical
/// inputs give bit-identical parameters and logs. A non-finite loss or
/// gradient aborts with the failing step in the message.
TrainResult train(const RunConfig& cfg, const Dataset& ds,
                  const StepCallback& on_log = {});

void write_steplog_jsonl(std::ostream& out, std::span<const StepLog> logs);
void write_steplog_csv(std::ostream& out, std::span<const StepLog> logs);

}  // namespace bam
