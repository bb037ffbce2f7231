#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bam/rng.hpp"
#include "bam/types.hpp"

namespace bam {

/// Labeled point cloud. Labels are dense class ids in [0, num_classes) and
/// every class is populated.
struct Dataset {
  Matrix points;            // m x d_in
  std::vector<int> labels;  // length m
  int num_classes = 0;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  void validate() const;
};

/// Stochastic view family for vector data: multiplicative scale jitter, a
/// random planar rotation, additive isotropic noise, and coordinate dropout,
/// applied in that order. The all-neutral spec reproduces inputs exactly.
struct AugmentSpec {
  double noise_sigma = 0.0;       // >= 0
  double scale_lo = 1.0;          // 0 < lo <= hi
  double scale_hi = 1.0;
  double dropout_prob = 0.0;      // [0, 1)
  double rotate_angle_max = 0.0;  // radians, >= 0

  bool is_identity() const {
    return noise_sigma == 0.0 && scale_lo == 1.0 && scale_hi == 1.0 &&
           dropout_prob == 0.0 && rotate_angle_max == 0.0;
  }
  void validate() const;
};

/// n*k augmented rows; view j of image i sits at row j*n + i (BatchLayout).
struct ViewBatch {
  Matrix views;  // (n*k) x d_in
  BatchLayout layout;

  int row_of(int image, int view) const { return layout.row_of(image, view); }
};

/// Isotropic Gaussian blobs around per-class centers drawn from
/// N(0, center_sigma^2 I). Points are ordered class-major.
Dataset make_gaussian_mixture(int num_classes, int per_class, int d_in,
                              double center_sigma, double cluster_sigma,
                              std::uint64_t seed);

/// Two concentric rings in 2-D with additive Gaussian noise; labels by ring.
Dataset make_two_rings(int per_class, std::array<double, 2> radii, double noise,
                       std::uint64_t seed);

/// Draws k views for each selected point with independent augmentation
/// parameters per view. Deterministic in (spec, seed).
ViewBatch sample_views(const Dataset& ds, std::span<const int> indices, int k,
                       const AugmentSpec& spec, std::uint64_t seed);

/// Reads `label,f0,f1,...` rows (UTF-8, '.' decimal point). Malformed rows
/// are hard errors that name the line.
Dataset load_csv(const std::string& path);

/// Writes the same format load_csv reads.
void save_csv(const std::string& path, const Dataset& ds);

}  // namespace bam
