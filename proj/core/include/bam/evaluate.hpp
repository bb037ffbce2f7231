#pragma once

#include <cstdint>
#include <vector>

#include "bam/types.hpp"

namespace bam {

struct KmeansResult {
  std::vector<int> assignments;
  double inertia = 0.0;
};

/// Lloyd iterations with k-means++ seeding, best of `restarts` by inertia
/// (ties by restart index). Empty clusters are re-seeded from the point
/// farthest from its center.
KmeansResult kmeans(const Matrix& h, int k, int restarts, int max_iters,
                    std::uint64_t seed);

/// Normalized mutual information with arithmetic-mean normalization:
/// I(pred; truth) / ((H(pred) + H(truth)) / 2). Two trivial single-cluster
/// partitions count as identical (1).
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

/// Adjusted Rand index from the pair-counting contingency formula.
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

struct ClusterResult {
  std::vector<int> assignments;
  double nmi = 0.0;
  double ari = 0.0;
  double inertia = 0.0;
};

/// kmeans + both agreement scores against the ground-truth labels.
ClusterResult cluster_eval(const Matrix& h, const std::vector<int>& labels, int k,
                           int restarts, int max_iters, std::uint64_t seed);

struct ProbeResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
};

/// Multinomial logistic regression on frozen features: full-batch gradient
/// descent on softmax cross-entropy + l2 * ||W||^2 (bias unregularized).
/// The step size is halved whenever the training loss rises after the first
/// ten epochs, which keeps the trace monotone on this convex objective.
ProbeResult linear_probe(const Matrix& h_train, const std::vector<int>& y_train,
                         const Matrix& h_test, const std::vector<int>& y_test,
                         double l2, int epochs, double lr, std::uint64_t seed);

}  // namespace bam
