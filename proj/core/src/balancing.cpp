#include "bam/balancing.hpp"

#include <cmath>
#include <limits>

namespace bam {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// exp((s - shift) / tau); -inf maps to exactly 0. The shift only guards
// against overflow: subsequent normalizations cancel it.
Matrix stabilized_kernel(const Matrix& s, double tau) {
  double mx = kNegInf;
  for (Eigen::Index r = 0; r < s.rows(); ++r)
    for (Eigen::Index c = 0; c < s.cols(); ++c) mx = std::max(mx, s(r, c));
  if (!(mx > kNegInf)) throw NumericError("sinkhorn: all entries are -inf");

  Matrix k(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r)
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      const double v = s(r, c);
      k(r, c) = v == kNegInf ? 0.0 : std::exp((v - mx) / tau);
    }
  return k;
}

struct BalanceResult {
  int iterations = 0;
  double marginal_error = 0.0;
  bool converged = false;
};

// Alternating normalization, rows first. Marginal error is measured after
// each full round on the live matrix (columns are then exact).
BalanceResult balance_inplace(Matrix& k, int max_iters, double tol,
                              SinkhornTrace* trace) {
  BalanceResult res;
  for (int it = 0; it < max_iters; ++it) {
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
      const double sum = k.row(r).sum();
      if (!(sum > 0.0))
        throw NumericError("sinkhorn: row " + std::to_string(r) + " sums to zero");
      k.row(r) /= sum;
    }
    if (trace && it == 0) trace->first_row_normalized = k;
    for (Eigen::Index c = 0; c < k.cols(); ++c) {
      const double sum = k.col(c).sum();
      if (!(sum > 0.0))
        throw NumericError("sinkhorn: column " + std::to_string(c) + " sums to zero");
      k.col(c) /= sum;
    }
    double row_err = 0.0, col_err = 0.0;
    for (Eigen::Index r = 0; r < k.rows(); ++r)
      row_err = std::max(row_err, std::abs(k.row(r).sum() - 1.0));
    for (Eigen::Index c = 0; c < k.cols(); ++c)
      col_err = std::max(col_err, std::abs(k.col(c).sum() - 1.0));
    if (trace) {
      trace->row_err.push_back(row_err);
      trace->col_err.push_back(col_err);
    }
    res.iterations = it + 1;
    res.marginal_error = std::max(row_err, col_err);
    if (res.marginal_error <= tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace

BalancedMatrix sinkhorn_balance(const SimMatrix& s, double target_temperature,
                                int max_iters, double tol, SinkhornTrace* trace) {
  if (!(target_temperature > 0.0))
    throw ConfigError("sinkhorn: target_temperature must be positive");
  if (!(tol > 0.0)) throw ConfigError("sinkhorn: tol must be positive");
  if (max_iters < 1) throw ConfigError("sinkhorn: max_iters must be >= 1");

  BalancedMatrix out;
  out.values = stabilized_kernel(s.values, target_temperature);
  const auto res = balance_inplace(out.values, max_iters, tol, trace);
  out.target_temperature = target_temperature;
  out.iterations_used = res.iterations;
  out.marginal_error = res.marginal_error;
  out.converged = res.converged;
  return out;
}

BalancedMatrix sinkhorn_balance_blocked(const SimMatrix& s, double target_temperature,
                                        int max_iters, double tol) {
  if (s.n < 1 || s.k < 1) throw UsageError("sinkhorn blocked: layout not set");
  if (!(target_temperature > 0.0))
    throw ConfigError("sinkhorn: target_temperature must be positive");

  BalancedMatrix out;
  out.values.resize(s.values.rows(), s.values.cols());
  out.target_temperature = target_temperature;
  out.converged = true;
  for (int bj = 0; bj < s.k; ++bj) {
    for (int bq = 0; bq < s.k; ++bq) {
      Matrix block = s.values.block(bj * s.n, bq * s.n, s.n, s.n);
      Matrix kernel = stabilized_kernel(block, target_temperature);
      const auto res = balance_inplace(kernel, max_iters, tol, nullptr);
      out.values.block(bj * s.n, bq * s.n, s.n, s.n) = kernel;
      out.iterations_used = std::max(out.iterations_used, res.iterations);
      out.marginal_error = std::max(out.marginal_error, res.marginal_error);
      out.converged = out.converged && res.converged;
    }
  }
  return out;
}

double matrix_entropy(const Matrix& m) {
  double h = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (v < 0.0) throw InternalError("entropy: negative entry");
      if (v > 0.0) h -= v * std::log(v);
    }
  return h;
}

Vector row_entropies(const Matrix& m) {
  Vector h = Vector::Zero(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (v < 0.0) throw InternalError("entropy: negative entry");
      if (v > 0.0) acc -= v * std::log(v);
    }
    h[r] = acc;
  }
  return h;
}

EntropyReport entropy_report(const AttnMatrix& a, const BalancedMatrix& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw UsageError("entropy_report: shape mismatch");
  EntropyReport rep;
  rep.mean_row_entropy_a = row_entropies(a.values).mean();
  rep.mean_row_entropy_b = row_entropies(b.values).mean();
  rep.matrix_entropy = matrix_entropy(b.values);
  return rep;
}

double ot_objective(const SimMatrix& s, const Matrix& b, double temperature) {
  if (s.values.rows() != b.rows() || s.values.cols() != b.cols())
    throw UsageError("ot_objective: shape mismatch");
  double cost = 0.0;
  double entropy = 0.0;
  for (Eigen::Index r = 0; r < b.rows(); ++r)
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      const double w = b(r, c);
      if (w < 0.0) throw UsageError("ot_objective: negative transport entry");
      if (w == 0.0) continue;  // no mass, no cost, even against -inf
      cost -= s.values(r, c) * w;
      entropy -= w * std::log(w);
    }
  return cost - temperature * entropy;
}

}  // namespace bam
