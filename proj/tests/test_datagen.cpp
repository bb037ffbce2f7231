#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "bam/datagen.hpp"
#include "bam/evaluate.hpp"

using namespace bam;

TEST_CASE("gaussian mixture: sizes, labels, determinism") {
  Dataset ds = make_gaussian_mixture(8, 64, 32, 5.0, 1.0, 7);
  CHECK(ds.size() == 512);
  CHECK(ds.dim() == 32);
  CHECK(ds.num_classes == 8);
  std::set<int> seen(ds.labels.begin(), ds.labels.end());
  CHECK(seen.size() == 8);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 7);
  ds.validate();

  Dataset again = make_gaussian_mixture(8, 64, 32, 5.0, 1.0, 7);
  CHECK(ds.points == again.points);
  Dataset other = make_gaussian_mixture(8, 64, 32, 5.0, 1.0, 8);
  CHECK(ds.points != other.points);
}

TEST_CASE("gaussian mixture: degenerate noise pins points to centers") {
  Dataset ds = make_gaussian_mixture(2, 1, 2, 5.0, 1e-12, 3);
  REQUIRE(ds.size() == 2);
  // Rebuild with a visible cluster spread; centers dominate either way.
  const double dist = (ds.points.row(0) - ds.points.row(1)).norm();
  Dataset wide = make_gaussian_mixture(2, 1, 2, 5.0, 1e-6, 3);
  const double dist_wide = (wide.points.row(0) - wide.points.row(1)).norm();
  CHECK(dist == doctest::Approx(dist_wide).epsilon(1e-4));
  CHECK(dist > 0.0);
}

TEST_CASE("gaussian mixture: raw k-means recovers well-separated classes") {
  Dataset ds = make_gaussian_mixture(4, 100, 16, 10.0, 0.5, 21);
  ClusterResult res = cluster_eval(ds.points, ds.labels, 4, 10, 100, 5);
  CHECK(res.nmi >= 0.99);
}

TEST_CASE("gaussian mixture: invalid parameters are configuration errors") {
  CHECK_THROWS_AS(make_gaussian_mixture(1, 10, 4, 5.0, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(make_gaussian_mixture(3, 0, 4, 5.0, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(make_gaussian_mixture(3, 10, 4, 1.0, 2.0, 0), ConfigError);
}

TEST_CASE("two rings: counts, exact radii at zero noise, gap") {
  Dataset tiny = make_two_rings(1, {1.0, 2.0}, 0.0, 5);
  REQUIRE(tiny.size() == 2);
  CHECK(tiny.points.row(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tiny.points.row(1).norm() == doctest::Approx(2.0).epsilon(1e-12));

  Dataset ds = make_two_rings(100, {1.0, 3.0}, 0.05, 5);
  CHECK(ds.size() == 200);
  double min_gap = 1e300;
  for (int i = 0; i < ds.size(); ++i)
    for (int j = 0; j < ds.size(); ++j)
      if (ds.labels[static_cast<std::size_t>(i)] != ds.labels[static_cast<std::size_t>(j)])
        min_gap = std::min(min_gap, (ds.points.row(i) - ds.points.row(j)).norm());
  CHECK(min_gap > 1.0);
}

TEST_CASE("two rings: raw coordinates are not linearly separable") {
  Dataset ds = make_two_rings(50, {1.0, 3.0}, 0.05, 9);
  ProbeResult probe =
      linear_probe(ds.points, ds.labels, ds.points, ds.labels, 1e-4, 400, 0.5, 1);
  CHECK(probe.accuracy < 0.8);  // chance-ish for concentric rings
}

TEST_CASE("two rings: overlap rejected") {
  CHECK_THROWS_AS(make_two_rings(10, {1.0, 1.2}, 0.1, 0), ConfigError);
  CHECK_THROWS_AS(make_two_rings(10, {2.0, 1.0}, 0.0, 0), ConfigError);
}

TEST_CASE("sample_views: identity spec copies rows exactly") {
  Dataset ds = make_gaussian_mixture(2, 4, 6, 5.0, 1.0, 1);
  std::vector<int> idx{0, 3, 5};
  AugmentSpec identity;
  ViewBatch vb = sample_views(ds, idx, 2, identity, 99);
  REQUIRE(vb.views.rows() == 6);
  for (int i = 0; i < 3; ++i) {
    CHECK(vb.views.row(vb.row_of(i, 0)) == ds.points.row(idx[static_cast<std::size_t>(i)]));
    CHECK(vb.views.row(vb.row_of(i, 0)) == vb.views.row(vb.row_of(i, 1)));
  }
}

TEST_CASE("sample_views: layout law and determinism") {
  Dataset ds = make_gaussian_mixture(2, 8, 4, 5.0, 1.0, 1);
  std::vector<int> idx{1, 2, 3, 4};
  AugmentSpec spec;
  spec.noise_sigma = 0.1;
  ViewBatch a = sample_views(ds, idx, 3, spec, 7);
  ViewBatch b = sample_views(ds, idx, 3, spec, 7);
  CHECK(a.views == b.views);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) CHECK(a.row_of(i, j) % 4 == i);
  ViewBatch c = sample_views(ds, idx, 3, spec, 8);
  CHECK(a.views != c.views);
}

TEST_CASE("sample_views: views of one image differ under noise") {
  Dataset ds = make_gaussian_mixture(2, 4, 8, 5.0, 1.0, 2);
  std::vector<int> idx{0, 1};
  AugmentSpec spec;
  spec.noise_sigma = 0.2;
  ViewBatch vb = sample_views(ds, idx, 2, spec, 3);
  CHECK((vb.views.row(vb.row_of(0, 0)) - vb.views.row(vb.row_of(0, 1))).norm() > 0.0);
}

TEST_CASE("sample_views: dropout zeroes the expected fraction") {
  // Binomial concentration at d = 1000: the zero fraction lands near 1/2.
  Dataset ds = make_gaussian_mixture(2, 1, 1000, 5.0, 1.0, 4);
  // Shift points away from zero so dropped coordinates are identifiable.
  for (int r = 0; r < ds.size(); ++r)
    for (int c = 0; c < ds.dim(); ++c)
      if (std::abs(ds.points(r, c)) < 0.5) ds.points(r, c) = 1.0;
  AugmentSpec spec;
  spec.dropout_prob = 0.5;
  std::vector<int> idx{0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ViewBatch vb = sample_views(ds, idx, 2, spec, seed);
    int zeros = 0;
    for (int c = 0; c < 1000; ++c)
      if (vb.views(0, c) == 0.0) ++zeros;
    const double frac = zeros / 1000.0;
    CHECK(frac >= 0.45);
    CHECK(frac <= 0.55);
  }
}

TEST_CASE("sample_views: k < 2 and bad indices rejected") {
  Dataset ds = make_gaussian_mixture(2, 2, 4, 5.0, 1.0, 0);
  std::vector<int> idx{0};
  CHECK_THROWS_AS(sample_views(ds, idx, 1, AugmentSpec{}, 0), ConfigError);
  std::vector<int> bad{17};
  CHECK_THROWS_AS(sample_views(ds, bad, 2, AugmentSpec{}, 0), DataError);
}

TEST_CASE("augment spec validation") {
  AugmentSpec spec;
  spec.scale_lo = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = AugmentSpec{};
  spec.dropout_prob = 1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK(AugmentSpec{}.is_identity());
}

TEST_CASE("csv: round trip and malformed rows") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "bam_csv_test";
  fs::create_directories(dir);

  Dataset ds = make_gaussian_mixture(3, 5, 4, 5.0, 1.0, 6);
  const std::string path = (dir / "ok.csv").string();
  save_csv(path, ds);
  Dataset back = load_csv(path);
  CHECK(back.num_classes == 3);
  CHECK(back.points == ds.points);
  CHECK(back.labels == ds.labels);

  {
    std::ofstream out(dir / "bad_header.csv");
    out << "lbl,f0\n0,1.0\n";
  }
  CHECK_THROWS_WITH_AS(load_csv((dir / "bad_header.csv").string()),
                       doctest::Contains("line 1"), DataError);

  {
    std::ofstream out(dir / "bad_row.csv");
    out << "label,f0,f1\n0,1.0,2.0\n1,oops,3.0\n";
  }
  CHECK_THROWS_WITH_AS(load_csv((dir / "bad_row.csv").string()),
                       doctest::Contains("line 3"), DataError);

  {
    std::ofstream out(dir / "short_row.csv");
    out << "label,f0,f1\n0,1.0\n";
  }
  CHECK_THROWS_WITH_AS(load_csv((dir / "short_row.csv").string()),
                       doctest::Contains("line 2"), DataError);

  {
    std::ofstream out(dir / "gap.csv");
    out << "label,f0\n0,1.0\n2,2.0\n";  // class 1 missing
  }
  CHECK_THROWS_AS(load_csv((dir / "gap.csv").string()), DataError);

  CHECK_THROWS_AS(load_csv((dir / "missing.csv").string()), IoError);
}
