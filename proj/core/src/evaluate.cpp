#include "bam/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bam/rng.hpp"

namespace bam {

namespace {

double sq_dist(const Matrix& h, Eigen::Index row, const Matrix& centers, int c) {
  return (h.row(row) - centers.row(c)).squaredNorm();
}

struct LloydState {
  Matrix centers;
  std::vector<int> assign;
  double inertia = 0.0;
};

LloydState run_lloyd(const Matrix& h, int k, int max_iters, Rng& rng) {
  const Eigen::Index m = h.rows();
  LloydState st;
  st.centers.resize(k, h.cols());
  st.assign.assign(static_cast<std::size_t>(m), -1);

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(m),
                         std::numeric_limits<double>::infinity());
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
  st.centers.row(0) = h.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      d2[static_cast<std::size_t>(r)] =
          std::min(d2[static_cast<std::size_t>(r)], sq_dist(h, r, st.centers, c - 1));
      total += d2[static_cast<std::size_t>(r)];
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        acc += d2[static_cast<std::size_t>(r)];
        if (u < acc || r == m - 1) {
          pick = r;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
    }
    st.centers.row(c) = h.row(pick);
  }

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    // Assignment step.
    bool changed = false;
    st.inertia = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      int best = 0;
      double best_d = sq_dist(h, r, st.centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(h, r, st.centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (st.assign[static_cast<std::size_t>(r)] != best) changed = true;
      st.assign[static_cast<std::size_t>(r)] = best;
      st.inertia += best_d;
    }
    if (st.inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia))
      throw InternalError("kmeans: inertia increased across an iteration");
    prev_inertia = st.inertia;
    if (!changed && it > 0) break;

    // Update step, with empty clusters re-seeded from the farthest point.
    Matrix sums = Matrix::Zero(k, h.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index r = 0; r < m; ++r) {
      sums.row(st.assign[static_cast<std::size_t>(r)]) += h.row(r);
      ++counts[static_cast<std::size_t>(st.assign[static_cast<std::size_t>(r)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        st.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index r = 0; r < m; ++r) {
          const double d = sq_dist(h, r, st.centers, st.assign[static_cast<std::size_t>(r)]);
          if (d > far_d) {
            far_d = d;
            far = r;
          }
        }
        st.centers.row(c) = h.row(far);
      }
    }
  }
  return st;
}

}  // namespace

KmeansResult kmeans(const Matrix& h, int k, int restarts, int max_iters,
                    std::uint64_t seed) {
  if (k < 1) throw UsageError("kmeans: k must be >= 1");
  if (k > h.rows())
    throw UsageError("kmeans: k = " + std::to_string(k) + " exceeds " +
                     std::to_string(h.rows()) + " rows");
  if (restarts < 1) throw UsageError("kmeans: restarts must be >= 1");

  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int rs = 0; rs < restarts; ++rs) {
    Rng rng = Rng::derive(seed, Stream::Eval, static_cast<std::uint64_t>(rs));
    LloydState st = run_lloyd(h, k, max_iters, rng);
    if (st.inertia < best.inertia) {
      best.inertia = st.inertia;
      best.assignments = st.assign;
    }
  }
  return best;
}

namespace {

struct Contingency {
  std::vector<std::vector<long long>> table;  // pred x truth counts
  std::vector<long long> pred_sizes, truth_sizes;
  long long total = 0;
};

Contingency contingency(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw UsageError("cluster metrics: label vectors differ in length");
  if (pred.empty()) throw UsageError("cluster metrics: empty label vectors");
  int pc = 0, tc = 0;
  for (int v : pred) {
    if (v < 0) throw UsageError("cluster metrics: negative label");
    pc = std::max(pc, v + 1);
  }
  for (int v : truth) {
    if (v < 0) throw UsageError("cluster metrics: negative label");
    tc = std::max(tc, v + 1);
  }
  Contingency c;
  c.table.assign(static_cast<std::size_t>(pc),
                 std::vector<long long>(static_cast<std::size_t>(tc), 0));
  c.pred_sizes.assign(static_cast<std::size_t>(pc), 0);
  c.truth_sizes.assign(static_cast<std::size_t>(tc), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++c.table[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])];
    ++c.pred_sizes[static_cast<std::size_t>(pred[i])];
    ++c.truth_sizes[static_cast<std::size_t>(truth[i])];
  }
  c.total = static_cast<long long>(pred.size());
  return c;
}

double entropy_of_sizes(const std::vector<long long>& sizes, long long total) {
  double h = 0.0;
  for (long long s : sizes) {
    if (s == 0) continue;
    const double p = static_cast<double>(s) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

double choose2(long long x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

}  // namespace

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  Contingency c = contingency(pred, truth);
  const double hp = entropy_of_sizes(c.pred_sizes, c.total);
  const double ht = entropy_of_sizes(c.truth_sizes, c.total);
  if (hp == 0.0 && ht == 0.0) return 1.0;  // both single-cluster

  double mi = 0.0;
  const double n = static_cast<double>(c.total);
  for (std::size_t p = 0; p < c.table.size(); ++p) {
    for (std::size_t t = 0; t < c.table[p].size(); ++t) {
      const long long nij = c.table[p][t];
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / n;
      const double pi = static_cast<double>(c.pred_sizes[p]) / n;
      const double qj = static_cast<double>(c.truth_sizes[t]) / n;
      mi += pij * std::log(pij / (pi * qj));
    }
  }
  const double value = mi / (0.5 * (hp + ht));
  return std::clamp(value, 0.0, 1.0);
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() < 2) throw UsageError("ari: needs at least two points");
  Contingency c = contingency(pred, truth);

  double sum_ij = 0.0;
  for (const auto& row : c.table)
    for (long long nij : row) sum_ij += choose2(nij);
  double sum_p = 0.0, sum_t = 0.0;
  for (long long s : c.pred_sizes) sum_p += choose2(s);
  for (long long s : c.truth_sizes) sum_t += choose2(s);
  const double pairs = choose2(c.total);

  const double expected = sum_p * sum_t / pairs;
  const double maximum = 0.5 * (sum_p + sum_t);
  if (maximum == expected) return 1.0;  // both partitions degenerate and equal
  return (sum_ij - expected) / (maximum - expected);
}

ClusterResult cluster_eval(const Matrix& h, const std::vector<int>& labels, int k,
                           int restarts, int max_iters, std::uint64_t seed) {
  if (h.rows() != static_cast<Eigen::Index>(labels.size()))
    throw UsageError("cluster_eval: rows/labels mismatch");
  KmeansResult km = kmeans(h, k, restarts, max_iters, seed);
  ClusterResult res;
  res.assignments = km.assignments;
  res.inertia = km.inertia;
  res.nmi = nmi(km.assignments, labels);
  res.ari = ari(km.assignments, labels);
  return res;
}

ProbeResult linear_probe(const Matrix& h_train, const std::vector<int>& y_train,
                         const Matrix& h_test, const std::vector<int>& y_test,
                         double l2, int epochs, double lr, std::uint64_t seed) {
  if (h_train.rows() != static_cast<Eigen::Index>(y_train.size()) ||
      h_test.rows() != static_cast<Eigen::Index>(y_test.size()))
    throw UsageError("linear_probe: rows/labels mismatch");
  if (h_train.cols() != h_test.cols())
    throw UsageError("linear_probe: train/test dims differ");

  int num_classes = 0;
  for (int y : y_train) num_classes = std::max(num_classes, y + 1);
  for (int y : y_test) num_classes = std::max(num_classes, y + 1);
  {
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (int y : y_train) seen[static_cast<std::size_t>(y)] = true;
    for (int cls = 0; cls < num_classes; ++cls)
      if (!seen[static_cast<std::size_t>(cls)])
        throw ConfigError("linear_probe: class " + std::to_string(cls) +
                          " absent from the training set");
  }

  const Eigen::Index m = h_train.rows();
  const Eigen::Index d = h_train.cols();
  Rng rng = Rng::derive(seed, Stream::Eval, 0);
  Matrix w(d, num_classes);
  for (Eigen::Index r = 0; r < d; ++r)
    for (int ccol = 0; ccol < num_classes; ++ccol) w(r, ccol) = 0.01 * rng.normal();
  Vector b = Vector::Zero(num_classes);

  auto eval_loss = [&](const Matrix& wm, const Vector& bv, Matrix* probs) {
    Matrix scores = h_train * wm;
    scores.rowwise() += bv.transpose();
    double loss = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      const double mx = scores.row(r).maxCoeff();
      double sum = 0.0;
      for (int ccol = 0; ccol < num_classes; ++ccol)
        sum += std::exp(scores(r, ccol) - mx);
      loss -= scores(r, y_train[static_cast<std::size_t>(r)]) - mx - std::log(sum);
      if (probs)
        for (int ccol = 0; ccol < num_classes; ++ccol)
          (*probs)(r, ccol) = std::exp(scores(r, ccol) - mx) / sum;
    }
    loss /= static_cast<double>(m);
    loss += l2 * wm.squaredNorm();
    return loss;
  };

  double prev_loss = std::numeric_limits<double>::infinity();
  Matrix probs(m, num_classes);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double loss = eval_loss(w, b, &probs);
    if (epoch > 10 && loss > prev_loss) lr *= 0.5;
    prev_loss = loss;

    Matrix delta = probs;
    for (Eigen::Index r = 0; r < m; ++r)
      delta(r, y_train[static_cast<std::size_t>(r)]) -= 1.0;
    delta /= static_cast<double>(m);
    Matrix gw = h_train.transpose() * delta + 2.0 * l2 * w;
    Vector gb = delta.colwise().sum().transpose();
    w -= lr * gw;
    b -= lr * gb;
  }

  ProbeResult res;
  res.per_class_accuracy.assign(static_cast<std::size_t>(num_classes), 0.0);
  std::vector<int> per_class_total(static_cast<std::size_t>(num_classes), 0);
  Matrix scores = h_test * w;
  scores.rowwise() += b.transpose();
  int correct = 0;
  for (Eigen::Index r = 0; r < h_test.rows(); ++r) {
    Eigen::Index arg = 0;
    scores.row(r).maxCoeff(&arg);
    const int y = y_test[static_cast<std::size_t>(r)];
    ++per_class_total[static_cast<std::size_t>(y)];
    if (static_cast<int>(arg) == y) {
      ++correct;
      res.per_class_accuracy[static_cast<std::size_t>(y)] += 1.0;
    }
  }
  for (int cls = 0; cls < num_classes; ++cls)
    if (per_class_total[static_cast<std::size_t>(cls)] > 0)
      res.per_class_accuracy[static_cast<std::size_t>(cls)] /=
          per_class_total[static_cast<std::size_t>(cls)];
  res.accuracy = static_cast<double>(correct) / static_cast<double>(h_test.rows());
  return res;
}

}  // namespace bam
