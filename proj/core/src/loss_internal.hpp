#pragma once

// Shared internals of the loss implementations. Not installed.

#include <cmath>
#include <limits>
#include <string>

#include "bam/loss.hpp"

namespace bam::internal {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct NormalizedLatents {
  Matrix zn;     // unit rows
  Vector norms;  // original row norms
};

inline NormalizedLatents normalize_latents(const Matrix& z, const char* who) {
  NormalizedLatents out;
  out.zn = z;
  out.norms.resize(z.rows());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double norm = z.row(r).norm();
    if (!(norm > 0.0))
      throw NumericError(std::string(who) + ": zero-norm latent at row " +
                         std::to_string(r));
    out.zn.row(r) /= norm;
    out.norms[r] = norm;
  }
  return out;
}

inline bool is_masked_entry(Eigen::Index p, Eigen::Index q, int n) {
  return p % n == q % n;
}

// Value and dL/dS of the fixed-target grouped softmax cross-entropy. Group
// width is the softmax normalization span (full row or one view block).
// Entries whose logit is constant — masked positions and, for
// self-similarities, the unit diagonal — get a zero gradient.
struct CeGrad {
  double value = 0.0;
  Matrix g;
};

inline CeGrad fixed_target_ce(const Matrix& attn, const Matrix& target, double tau,
                              int group_width, int n, bool masked, bool zero_diag,
                              double scale) {
  const Eigen::Index rows = attn.rows();
  const Eigen::Index cols = attn.cols();
  CeGrad out;
  out.g = Matrix::Zero(rows, cols);
  double raw = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index g0 = 0; g0 < cols; g0 += group_width) {
      double mass = 0.0;
      for (Eigen::Index q = g0; q < g0 + group_width; ++q) {
        const double t = target(r, q);
        mass += t;
        if (t > 0.0) {
          const double a = attn(r, q);
          if (!(a > 0.0))
            throw NumericError("loss: target mass on an excluded attention entry");
          raw -= t * std::log(a);
        }
      }
      for (Eigen::Index q = g0; q < g0 + group_width; ++q)
        out.g(r, q) = scale * (attn(r, q) * mass - target(r, q)) / tau;
    }
    if (masked) {
      for (Eigen::Index q = r % n; q < cols; q += n) out.g(r, q) = 0.0;
    } else if (zero_diag) {
      out.g(r, r) = 0.0;
    }
  }
  out.value = scale * raw;
  return out;
}

// Chain rule through unit-normalization and the similarity product.
// Self case: S = zn zn^T, so row and column occurrences both contribute.
inline Matrix grad_through_cosine_self(const Matrix& g, const NormalizedLatents& nl) {
  Matrix dzn = (g + g.transpose()) * nl.zn;
  Matrix grad(nl.zn.rows(), nl.zn.cols());
  for (Eigen::Index r = 0; r < nl.zn.rows(); ++r) {
    const double dot = dzn.row(r).dot(nl.zn.row(r));
    grad.row(r) = (dzn.row(r) - dot * nl.zn.row(r)) / nl.norms[r];
  }
  return grad;
}

// Cross case: S = zn_a zn_b^T, gradient w.r.t. the row side only.
inline Matrix grad_through_cosine_cross(const Matrix& g, const NormalizedLatents& a,
                                        const Matrix& zn_b) {
  Matrix dzn = g * zn_b;
  Matrix grad(a.zn.rows(), a.zn.cols());
  for (Eigen::Index r = 0; r < a.zn.rows(); ++r) {
    const double dot = dzn.row(r).dot(a.zn.row(r));
    grad.row(r) = (dzn.row(r) - dot * a.zn.row(r)) / a.norms[r];
  }
  return grad;
}

inline double pair_scale(const BatchLayout& layout, const PairPolicy& policy) {
  return 1.0 / (static_cast<double>(policy.count()) * layout.n);
}

}  // namespace bam::internal
