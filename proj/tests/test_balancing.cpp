#include <doctest.h>

#include <cmath>
#include <limits>

#include "bam/attention.hpp"
#include "bam/balancing.hpp"
#include "bam/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace bam;

namespace {

// Latent dimension matters here: low-dimensional random vectors have extreme
// cosines and the balancing slows down sharply. 64 is the projector default.
SimMatrix random_masked_sim(int n, int k, int d, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, Stream::Data, 0);
  Matrix z = testutil::random_matrix(n * k, d, rng);
  return mask_positives(cosine_similarity(LatentSet{z, {n, k}}), MaskMode::Zero);
}

double max_marginal_error(const Matrix& b) {
  double err = 0.0;
  for (Eigen::Index r = 0; r < b.rows(); ++r)
    err = std::max(err, std::abs(b.row(r).sum() - 1.0));
  for (Eigen::Index c = 0; c < b.cols(); ++c)
    err = std::max(err, std::abs(b.col(c).sum() - 1.0));
  return err;
}

}  // namespace

TEST_CASE("constant similarities balance to the uniform matrix") {
  SimMatrix s;
  s.values = Matrix::Constant(6, 6, 0.37);
  s.n = 6;
  s.k = 1;
  BalancedMatrix b = sinkhorn_balance(s, 0.05, 100, 1e-10);
  CHECK(b.converged);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      CHECK(b.values(r, c) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("2x2 symmetric case matches the closed form and the projection oracle") {
  SimMatrix s;
  s.values.resize(2, 2);
  s.values << 1.0, 0.0, 0.0, 1.0;
  s.n = 2;
  s.k = 1;
  for (double tau_b : {0.5, 0.25, 0.1}) {
    BalancedMatrix b = sinkhorn_balance(s, tau_b, 1000, 1e-12);
    const double a = std::exp(1.0 / tau_b) / (std::exp(1.0 / tau_b) + 1.0);
    CHECK(b.values(0, 0) == doctest::Approx(a).epsilon(1e-10));
    CHECK(b.values(0, 1) == doctest::Approx(1.0 - a).epsilon(1e-10));
    CHECK(b.values(1, 0) == doctest::Approx(1.0 - a).epsilon(1e-10));
    CHECK(b.values(1, 1) == doctest::Approx(a).epsilon(1e-10));

    // Long-run alternating projection, written independently.
    oracle::Mat ref = oracle::sinkhorn(testutil::to_oracle(s.values), tau_b, 100000, 1e-14);
    CHECK(testutil::max_rel_err(b.values, testutil::from_oracle(ref), 1e-12) < 1e-9);
  }
}

TEST_CASE("first row normalization equals the row softmax at the same temperature") {
  SimMatrix s = random_masked_sim(4, 2, 6, 11);
  const double tau = 0.1;
  SinkhornTrace trace;
  sinkhorn_balance(s, tau, 5, 1e-3, &trace);
  AttnMatrix a = softmax_rows(s, tau);
  CHECK((trace.first_row_normalized - a.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("random symmetric inputs converge and stay symmetric") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const int n = 16, k = 2;
    SimMatrix s = random_masked_sim(n, k, 64, seed);
    BalancedMatrix b = sinkhorn_balance(s, 0.05, 100, 1e-6);
    CHECK(b.converged);
    CHECK(b.iterations_used <= 100);
    CHECK(max_marginal_error(b.values) <= 1e-6 * (1 + 1e-9));
    CHECK((b.values - b.values.transpose()).cwiseAbs().maxCoeff() <= 10 * 1e-6);
    CHECK(b.values.minCoeff() >= 0.0);
  }
}

TEST_CASE("non-convergence is a warning carried in the result") {
  SimMatrix s = random_masked_sim(8, 2, 6, 3);
  BalancedMatrix b = sinkhorn_balance(s, 0.02, 1, 1e-14);
  CHECK_FALSE(b.converged);
  CHECK(b.iterations_used == 1);
  CHECK(b.marginal_error > 1e-14);
}

TEST_CASE("neg-inf masked entries stay exactly zero") {
  Rng rng = Rng::derive(17, Stream::Data, 0);
  Matrix z = testutil::random_matrix(8, 64, rng);
  SimMatrix s = mask_positives(cosine_similarity(LatentSet{z, {4, 2}}), MaskMode::NegInf);
  BalancedMatrix b = sinkhorn_balance(s, 0.1, 200, 1e-8);
  for (int p = 0; p < 8; ++p)
    for (int q = 0; q < 8; ++q)
      if (p % 4 == q % 4) CHECK(b.values(p, q) == 0.0);
  CHECK(b.converged);
}

TEST_CASE("result is invariant to a constant shift of the similarities") {
  SimMatrix s = random_masked_sim(6, 2, 32, 23);
  BalancedMatrix b1 = sinkhorn_balance(s, 0.05, 200, 1e-10);
  SimMatrix shifted = s;
  shifted.values.array() += 0.9;
  BalancedMatrix b2 = sinkhorn_balance(shifted, 0.05, 200, 1e-10);
  CHECK((b1.values - b2.values).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("blocked balancing makes every view block doubly stochastic") {
  SimMatrix s = random_masked_sim(5, 2, 64, 31);
  BalancedMatrix b = sinkhorn_balance_blocked(s, 0.05, 500, 1e-8);
  CHECK(b.converged);
  for (int bj = 0; bj < 2; ++bj)
    for (int bq = 0; bq < 2; ++bq) {
      Matrix block = b.values.block(bj * 5, bq * 5, 5, 5);
      CHECK(max_marginal_error(block) <= 1e-8 * (1 + 1e-9));
    }
  // And it differs from the global balance.
  BalancedMatrix global = sinkhorn_balance(s, 0.05, 500, 1e-8);
  CHECK((global.values - b.values).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("entropy: uniform, one-hot, half-half rows") {
  Matrix m(3, 4);
  m << 0.25, 0.25, 0.25, 0.25,  //
      1.0, 0.0, 0.0, 0.0,       //
      0.5, 0.5, 0.0, 0.0;
  Vector h = row_entropies(m);
  CHECK(h[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(h[1] == doctest::Approx(0.0));
  CHECK(h[2] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(matrix_entropy(m) == doctest::Approx(std::log(4.0) + std::log(2.0)).epsilon(1e-12));

  Matrix bad(1, 2);
  bad << -0.1, 1.1;
  CHECK_THROWS_AS(matrix_entropy(bad), InternalError);
}

TEST_CASE("entropy report bounds and shape mismatch") {
  SimMatrix s = random_masked_sim(4, 2, 16, 41);
  AttnMatrix a = softmax_rows(s, 0.1);
  BalancedMatrix b = sinkhorn_balance(s, 0.05, 100, 1e-8);
  EntropyReport rep = entropy_report(a, b);
  CHECK(rep.mean_row_entropy_a >= 0.0);
  CHECK(rep.mean_row_entropy_a <= std::log(8.0) + 1e-12);
  CHECK(rep.mean_row_entropy_b >= 0.0);
  CHECK(rep.mean_row_entropy_b <= std::log(8.0) + 1e-12);

  BalancedMatrix small;
  small.values = Matrix::Constant(2, 2, 0.5);
  CHECK_THROWS_AS(entropy_report(a, small), UsageError);
}

TEST_CASE("target temperature below tau produces the entropy gap") {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    SimMatrix s = random_masked_sim(16, 2, 32, seed);
    const double tau = 0.1;
    AttnMatrix a = softmax_rows(s, tau);
    BalancedMatrix b = sinkhorn_balance(s, tau / 2.0, 100, 1e-8);
    EntropyReport rep = entropy_report(a, b);
    CHECK(rep.mean_row_entropy_b < rep.mean_row_entropy_a);
  }
}

TEST_CASE("ot objective: permutation and uniform closed forms") {
  const int m = 4;
  SimMatrix s;
  s.values = Matrix::Constant(m, m, -0.3);
  s.n = m;
  s.k = 1;
  // Permutation (identity) with unit similarities on its support.
  Matrix perm = Matrix::Identity(m, m);
  s.values.diagonal().setOnes();
  CHECK(ot_objective(s, perm, 0.1) == doctest::Approx(-m).epsilon(1e-12));

  SimMatrix c;
  c.values = Matrix::Constant(m, m, 0.7);
  c.n = m;
  c.k = 1;
  Matrix uniform = Matrix::Constant(m, m, 1.0 / m);
  const double tau = 0.05;
  // <-S, B> = -c * m; h(B) = m log m.
  CHECK(ot_objective(c, uniform, tau) ==
        doctest::Approx(-0.7 * m - tau * m * std::log(m)).epsilon(1e-12));

  Matrix wrong = Matrix::Constant(m + 1, m + 1, 0.1);
  CHECK_THROWS_AS(ot_objective(c, wrong, tau), UsageError);
}

TEST_CASE("balanced output attains the lowest transport objective (sampled)") {
  Rng rng = Rng::derive(77, Stream::Data, 0);
  const double tau = 0.1;
  Matrix z = testutil::random_matrix(3, 4, rng);
  SimMatrix s = cosine_similarity(LatentSet{z, {3, 1}});
  BalancedMatrix b = sinkhorn_balance(s, tau, 20000, 1e-13);
  const double best = ot_objective(s, b.values, tau);
  for (int trial = 0; trial < 2000; ++trial) {
    oracle::Mat raw(3, std::vector<double>(3));
    for (auto& row : raw)
      for (double& v : row) v = rng.uniform() + 1e-3;
    // Balance the sample with the independent oracle loop.
    oracle::Mat ds = oracle::sinkhorn(
        [&] {
          oracle::Mat logm = raw;
          for (auto& row : logm)
            for (double& v : row) v = std::log(v);
          return logm;
        }(),
        1.0, 5000, 1e-11);
    const double other = ot_objective(s, testutil::from_oracle(ds), tau);
    CHECK(best <= other + 1e-8);
  }
}
