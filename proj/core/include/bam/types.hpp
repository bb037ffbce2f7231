#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace bam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. Configuration errors are bad settings, data errors are bad
// inputs, usage errors are API misuse, numeric errors are degenerate math,
// internal errors are broken invariants, io errors are file problems.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct UsageError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct InternalError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

/// Row layout of an augmented batch: view j of image i lives at global row
/// j*n + i, so "same image" is exactly "equal row index mod n".
struct BatchLayout {
  int n = 0;  // images per batch
  int k = 0;  // views per image

  int rows() const { return n * k; }
  int row_of(int image, int view) const { return view * n + image; }
  int image_of(int row) const { return row % n; }
  int view_of(int row) const { return row / n; }
};

/// Latents of one augmented batch: row r of z is the projector output for the
/// view at layout row r.
struct LatentSet {
  Matrix z;  // (n*k) x d
  BatchLayout layout;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InternalError(msg);
}

}  // namespace bam
