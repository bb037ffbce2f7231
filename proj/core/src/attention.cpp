#include "bam/attention.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace bam {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::string to_string(MaskMode mode) {
  return mode == MaskMode::Zero ? "zero" : "neg_inf";
}

namespace {

Matrix normalized_rows(const Matrix& z, const char* who) {
  Matrix out = z;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double norm = z.row(r).norm();
    if (!(norm > 0.0))
      throw NumericError(std::string(who) + ": zero-norm latent at row " +
                         std::to_string(r));
    out.row(r) /= norm;
  }
  return out;
}

}  // namespace

SimMatrix cosine_similarity(const LatentSet& z) {
  if (z.z.rows() != z.layout.rows())
    throw UsageError("cosine_similarity: latent rows do not match layout");
  Matrix zn = normalized_rows(z.z, "cosine_similarity");
  SimMatrix s;
  s.values = zn * zn.transpose();
  s.values.diagonal().setOnes();
  s.n = z.layout.n;
  s.k = z.layout.k;
  s.self_similarity = true;
  return s;
}

SimMatrix cross_cosine_similarity(const LatentSet& a, const LatentSet& b) {
  if (a.layout.n != b.layout.n || a.layout.k != b.layout.k)
    throw UsageError("cross_cosine_similarity: layouts differ");
  if (a.z.rows() != b.z.rows() || a.z.cols() != b.z.cols())
    throw UsageError("cross_cosine_similarity: latent shapes differ");
  Matrix an = normalized_rows(a.z, "cross_cosine_similarity");
  Matrix bn = normalized_rows(b.z, "cross_cosine_similarity");
  SimMatrix s;
  s.values = an * bn.transpose();
  s.n = a.layout.n;
  s.k = a.layout.k;
  s.self_similarity = false;
  return s;
}

SimMatrix mask_positives(SimMatrix s, MaskMode mode) {
  if (s.masked) throw UsageError("mask_positives: input is already masked");
  if (s.n < 1 || s.k < 1) throw UsageError("mask_positives: layout not set");
  const double fill = mode == MaskMode::Zero ? 0.0 : kNegInf;
  const Eigen::Index rows = s.values.rows();
  for (Eigen::Index p = 0; p < rows; ++p)
    for (Eigen::Index q = p % s.n; q < rows; q += s.n) s.values(p, q) = fill;
  s.masked = true;
  s.mask_mode = mode;
  return s;
}

namespace detail {

void softmax_groups_inplace(Matrix& m, double temperature, int group_width) {
  if (!(temperature > 0.0)) throw ConfigError("softmax: temperature must be positive");
  const Eigen::Index cols = m.cols();
  if (cols % group_width != 0)
    throw InternalError("softmax: group width does not divide column count");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index g0 = 0; g0 < cols; g0 += group_width) {
      double mx = kNegInf;
      for (Eigen::Index q = g0; q < g0 + group_width; ++q)
        mx = std::max(mx, m(r, q));
      if (!(mx > kNegInf))
        throw NumericError("softmax: row " + std::to_string(r) +
                           " has no finite entry in its normalization group");
      double sum = 0.0;
      for (Eigen::Index q = g0; q < g0 + group_width; ++q) {
        const double v = m(r, q);
        const double e = v == kNegInf ? 0.0 : std::exp((v - mx) / temperature);
        m(r, q) = e;
        sum += e;
      }
      for (Eigen::Index q = g0; q < g0 + group_width; ++q) m(r, q) /= sum;
    }
  }
}

}  // namespace detail

AttnMatrix softmax_rows(const SimMatrix& s, double temperature) {
  AttnMatrix a;
  a.values = s.values;
  a.temperature = temperature;
  detail::softmax_groups_inplace(a.values, temperature,
                                 static_cast<int>(a.values.cols()));
  return a;
}

AttnMatrix softmax_rows_blocked(const SimMatrix& s, double temperature) {
  if (s.n < 1 || s.k < 1) throw UsageError("softmax_rows_blocked: layout not set");
  AttnMatrix a;
  a.values = s.values;
  a.temperature = temperature;
  detail::softmax_groups_inplace(a.values, temperature, s.n);
  return a;
}

void dump_csv(std::ostream& out, const Matrix& values, int n, int k, double tau,
              const std::string& masked) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", tau);
  out << "# n=" << n << " k=" << k << " tau=" << buf << " masked=" << masked << "\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", values(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace bam
