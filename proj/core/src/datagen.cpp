#include "bam/datagen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace bam {

void Dataset::validate() const {
  if (num_classes < 1) throw ConfigError("dataset: num_classes must be >= 1");
  if (points.rows() != static_cast<Eigen::Index>(labels.size()))
    throw DataError("dataset: points/labels length mismatch");
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int lbl : labels) {
    if (lbl < 0 || lbl >= num_classes)
      throw DataError("dataset: label " + std::to_string(lbl) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    ++counts[static_cast<std::size_t>(lbl)];
  }
  for (int c = 0; c < num_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw DataError("dataset: class " + std::to_string(c) + " has no points");
  if (!points.allFinite()) throw DataError("dataset: non-finite point entries");
}

void AugmentSpec::validate() const {
  if (noise_sigma < 0.0) throw ConfigError("augment: noise_sigma must be >= 0");
  if (!(scale_lo > 0.0) || scale_lo > scale_hi)
    throw ConfigError("augment: scale range requires 0 < lo <= hi");
  if (dropout_prob < 0.0 || dropout_prob >= 1.0)
    throw ConfigError("augment: dropout_prob must be in [0, 1)");
  if (rotate_angle_max < 0.0)
    throw ConfigError("augment: rotate_angle_max must be >= 0");
}

Dataset make_gaussian_mixture(int num_classes, int per_class, int d_in,
                              double center_sigma, double cluster_sigma,
                              std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("gaussian mixture: num_classes must be >= 2");
  if (per_class < 1) throw ConfigError("gaussian mixture: per_class must be >= 1");
  if (d_in < 1) throw ConfigError("gaussian mixture: d_in must be >= 1");
  if (!(center_sigma > cluster_sigma) || !(cluster_sigma > 0.0))
    throw ConfigError("gaussian mixture: requires center_sigma > cluster_sigma > 0");

  Dataset ds;
  ds.num_classes = num_classes;
  ds.points.resize(static_cast<Eigen::Index>(num_classes) * per_class, d_in);
  ds.labels.resize(static_cast<std::size_t>(num_classes) * per_class);

  Matrix centers(num_classes, d_in);
  Rng center_rng = Rng::derive(seed, Stream::Data, 0);
  for (int c = 0; c < num_classes; ++c)
    for (int j = 0; j < d_in; ++j) centers(c, j) = center_sigma * center_rng.normal();

  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    Rng rng = Rng::derive(seed, Stream::Data, 1 + static_cast<std::uint64_t>(c));
    for (int p = 0; p < per_class; ++p) {
      for (int j = 0; j < d_in; ++j)
        ds.points(row, j) = centers(c, j) + cluster_sigma * rng.normal();
      ds.labels[static_cast<std::size_t>(row)] = c;
      ++row;
    }
  }
  return ds;
}

Dataset make_two_rings(int per_class, std::array<double, 2> radii, double noise,
                       std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("two rings: per_class must be >= 1");
  if (!(radii[0] > 0.0) || !(radii[0] < radii[1]))
    throw ConfigError("two rings: requires 0 < radii[0] < radii[1]");
  if (noise < 0.0) throw ConfigError("two rings: noise must be >= 0");
  if (!(noise < (radii[1] - radii[0]) / 4.0))
    throw ConfigError("two rings: rings overlap; need noise < (r1 - r0) / 4");

  Dataset ds;
  ds.num_classes = 2;
  ds.points.resize(2 * per_class, 2);
  ds.labels.resize(static_cast<std::size_t>(2 * per_class));

  Eigen::Index row = 0;
  for (int c = 0; c < 2; ++c) {
    Rng rng = Rng::derive(seed, Stream::Data, static_cast<std::uint64_t>(c));
    for (int p = 0; p < per_class; ++p) {
      double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double x = radii[static_cast<std::size_t>(c)] * std::cos(theta);
      double y = radii[static_cast<std::size_t>(c)] * std::sin(theta);
      ds.points(row, 0) = x + noise * rng.normal();
      ds.points(row, 1) = y + noise * rng.normal();
      ds.labels[static_cast<std::size_t>(row)] = c;
      ++row;
    }
  }
  return ds;
}

namespace {

// Scale, rotate, noise, dropout — in this fixed order so the draw sequence
// is part of the format. Neutral parameters leave the row bit-identical.
void augment_row(Eigen::RowVectorXd& x, const AugmentSpec& spec, Rng& rng) {
  const int d = static_cast<int>(x.size());

  double scale = rng.uniform(spec.scale_lo, spec.scale_hi);
  x *= scale;

  if (d >= 2) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(d - 1)));
    if (b >= a) ++b;  // distinct pair
    double angle = rng.uniform(-spec.rotate_angle_max, spec.rotate_angle_max);
    double c = std::cos(angle), s = std::sin(angle);
    double xa = x[a], xb = x[b];
    x[a] = c * xa - s * xb;
    x[b] = s * xa + c * xb;
  }

  for (int j = 0; j < d; ++j) x[j] += spec.noise_sigma * rng.normal();

  for (int j = 0; j < d; ++j)
    if (rng.uniform() < spec.dropout_prob) x[j] = 0.0;
}

}  // namespace

ViewBatch sample_views(const Dataset& ds, std::span<const int> indices, int k,
                       const AugmentSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (k < 2) throw ConfigError("sample_views: k must be >= 2 (losses need view pairs)");
  const int n = static_cast<int>(indices.size());
  if (n < 1) throw ConfigError("sample_views: empty index list");
  for (int idx : indices)
    if (idx < 0 || idx >= ds.size())
      throw DataError("sample_views: index " + std::to_string(idx) + " out of range");

  ViewBatch vb;
  vb.layout = BatchLayout{n, k};
  vb.views.resize(static_cast<Eigen::Index>(n) * k, ds.dim());
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i) {
      const int row = vb.layout.row_of(i, j);
      Eigen::RowVectorXd view = ds.points.row(indices[static_cast<std::size_t>(i)]);
      Rng rng = Rng::derive(seed, Stream::Augment, static_cast<std::uint64_t>(row));
      augment_row(view, spec, rng);
      vb.views.row(row) = view;
    }
  }
  if (!vb.views.allFinite()) throw DataError("sample_views: non-finite view entries");
  return vb;
}

namespace {

double parse_double_or_throw(const std::string& tok, int line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw DataError("csv line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  if (!std::isfinite(v))
    throw DataError("csv line " + std::to_string(line_no) + ": non-finite value");
  return v;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open csv file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_commas(line);
  if (header.empty() || header[0] != "label")
    throw DataError("csv line 1: header must start with 'label'");
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1) throw DataError("csv line 1: no feature columns");
  for (int j = 0; j < d; ++j)
    if (header[static_cast<std::size_t>(j + 1)] != "f" + std::to_string(j))
      throw DataError("csv line 1: expected column 'f" + std::to_string(j) + "'");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto toks = split_commas(line);
    if (static_cast<int>(toks.size()) != d + 1)
      throw DataError("csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(d + 1) + " fields, got " +
                      std::to_string(toks.size()));
    int lbl = 0;
    {
      auto [ptr, ec] = std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), lbl);
      if (ec != std::errc{} || ptr != toks[0].data() + toks[0].size() || lbl < 0)
        throw DataError("csv line " + std::to_string(line_no) + ": bad label '" + toks[0] + "'");
    }
    std::vector<double> row(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      row[static_cast<std::size_t>(j)] = parse_double_or_throw(toks[static_cast<std::size_t>(j + 1)], line_no);
    rows.push_back(std::move(row));
    labels.push_back(lbl);
  }
  if (rows.empty()) throw DataError("csv: no data rows in " + path);

  Dataset ds;
  ds.points.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int j = 0; j < d; ++j)
      ds.points(static_cast<Eigen::Index>(r), j) = rows[r][static_cast<std::size_t>(j)];
  ds.labels = std::move(labels);
  ds.num_classes = 0;
  for (int lbl : ds.labels) ds.num_classes = std::max(ds.num_classes, lbl + 1);
  ds.validate();  // rejects gaps in the label range
  return ds;
}

void save_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv file: " + path);
  out << "label";
  for (int j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << "\n";
  char buf[64];
  for (int r = 0; r < ds.size(); ++r) {
    out << ds.labels[static_cast<std::size_t>(r)];
    for (int j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.points(r, j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace bam
