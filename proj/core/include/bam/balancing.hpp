#pragma once

#include <vector>

#include "bam/attention.hpp"
#include "bam/types.hpp"

namespace bam {

/// Iteration budget for the matrix balancing. Training runs use a loose
/// budget; diagnostics and tests use the strict one.
struct SinkhornSettings {
  int max_iters = 5;
  double tol = 1e-3;

  static SinkhornSettings training() { return {5, 1e-3}; }
  static SinkhornSettings strict() { return {100, 1e-6}; }
};

/// Doubly-stochastic target matrix: rows and columns sum to 1 within the
/// converged tolerance, symmetric (within tolerance) when the input is.
struct BalancedMatrix {
  Matrix values;
  double target_temperature = 0.0;
  int iterations_used = 0;
  double marginal_error = 0.0;  // max |row or column sum - 1| at exit
  bool converged = true;        // false is a warning, never a throw
};

/// Per-iteration record of the balancing loop, for convergence diagnostics.
struct SinkhornTrace {
  std::vector<double> row_err;  // after each full row+column round
  std::vector<double> col_err;
  Matrix first_row_normalized;  // the kernel right after the initial row pass
};

/// Balances K = exp(s / target_temperature) by alternating row and column
/// normalization, rows first. exp is shift-stabilized by the max entry, so
/// the result is invariant to it; -inf entries stay exactly 0.
/// Non-convergence within the budget sets converged = false.
BalancedMatrix sinkhorn_balance(const SimMatrix& s, double target_temperature,
                                int max_iters, double tol,
                                SinkhornTrace* trace = nullptr);

/// Same balancing applied independently to every n x n view block.
BalancedMatrix sinkhorn_balance_blocked(const SimMatrix& s, double target_temperature,
                                        int max_iters, double tol);

/// h(M) = -sum m_ij log m_ij with 0 log 0 = 0. Entries must be >= 0.
double matrix_entropy(const Matrix& m);

/// -sum_i p_i log p_i per row.
Vector row_entropies(const Matrix& m);

struct EntropyReport {
  double mean_row_entropy_a = 0.0;
  double mean_row_entropy_b = 0.0;
  double matrix_entropy = 0.0;  // h of the target matrix
};

EntropyReport entropy_report(const AttnMatrix& a, const BalancedMatrix& b);

/// Entropy-regularized transport objective <-s, b> - temperature * h(b).
/// Entries where b is 0 contribute nothing, even against -inf costs.
double ot_objective(const SimMatrix& s, const Matrix& b, double temperature);

}  // namespace bam
