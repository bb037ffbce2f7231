#pragma once

#include <iosfwd>
#include <string>

#include "bam/types.hpp"

namespace bam {

/// What to write into same-image entries: 0 keeps them in the softmax support
/// with neutral weight; -inf removes them from the support entirely.
enum class MaskMode { Zero, NegInf };

std::string to_string(MaskMode mode);

/// Pairwise similarity over the augmented batch. Self-similarities produce a
/// symmetric matrix with unit diagonal; cross-similarities (student rows vs
/// teacher columns) are generally neither.
struct SimMatrix {
  Matrix values;  // (n*k) x (n*k)
  int n = 0;
  int k = 0;
  bool masked = false;
  MaskMode mask_mode = MaskMode::Zero;
  // True when rows and columns come from the same latent set; the diagonal is
  // then identically 1 and carries no gradient.
  bool self_similarity = true;
};

/// Right-stochastic attention matrix; every row sums to 1.
struct AttnMatrix {
  Matrix values;
  double temperature = 0.0;
};

/// Cosine similarities of a latent set with itself. The diagonal is written
/// as exactly 1 rather than through the quotient.
SimMatrix cosine_similarity(const LatentSet& z);

/// Cosine similarities between two latent sets with the same layout
/// (rows: a, columns: b). No diagonal snapping.
SimMatrix cross_cosine_similarity(const LatentSet& a, const LatentSet& b);

/// Overwrites every entry (p, q) with p = q (mod n) — the diagonal included —
/// by 0 or -inf. The input must not be masked already.
SimMatrix mask_positives(SimMatrix s, MaskMode mode);

/// Numerically-stable softmax over each full row, one normalization across
/// all n*k columns. -inf entries map to exactly 0.
AttnMatrix softmax_rows(const SimMatrix& s, double temperature);

/// Softmax normalized separately inside each n-wide view block of each row
/// (each block of a row sums to 1, so a full row sums to k).
AttnMatrix softmax_rows_blocked(const SimMatrix& s, double temperature);

/// Diagnostic CSV dump with a `# n=.. k=.. tau=.. masked=..` header line.
void dump_csv(std::ostream& out, const Matrix& values, int n, int k, double tau,
              const std::string& masked);

namespace detail {
/// Stable row softmax on a raw matrix over [begin, end) column groups.
/// Throws NumericError when a group has no finite entry.
void softmax_groups_inplace(Matrix& m, double temperature, int group_width);
}  // namespace detail

}  // namespace bam
