#include "bam/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace bam {

namespace {

constexpr char kMagic[8] = {'B', 'A', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u8(std::ostream& out, std::uint8_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("checkpoint: truncated file");
  return v;
}

std::uint8_t get_u8(std::istream& in) {
  std::uint8_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("checkpoint: truncated file");
  return v;
}

double get_f64(std::istream& in) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("checkpoint: truncated file");
  return v;
}

void put_spec(std::ostream& out, const MlpSpec& spec) {
  put_u32(out, static_cast<std::uint32_t>(spec.layer_dims.size()));
  for (int d : spec.layer_dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (int l = 0; l < spec.num_layers(); ++l) put_u8(out, spec.has_bn(l) ? 1 : 0);
}

MlpSpec get_spec(std::istream& in) {
  MlpSpec spec;
  const std::uint32_t count = get_u32(in);
  if (count < 2 || count > 1024) throw DataError("checkpoint: implausible layer count");
  spec.layer_dims.resize(count);
  for (auto& d : spec.layer_dims) {
    d = static_cast<int>(get_u32(in));
    if (d < 1 || d > (1 << 24)) throw DataError("checkpoint: implausible layer dim");
  }
  bool any_bn = false;
  std::vector<bool> flags(count - 1);
  for (std::size_t l = 0; l + 1 < count; ++l) {
    flags[l] = get_u8(in) != 0;
    any_bn = any_bn || flags[l];
  }
  if (any_bn) spec.batchnorm = flags;
  return spec;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

void put_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

void get_matrix(std::istream& in, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(in);
}

void get_vector(std::istream& in, Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get_f64(in);
}

void put_params(std::ostream& out, const ModelParams& p) {
  for_each_tensor(p, [&](const auto& t, TensorKind) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>)
      put_matrix(out, t);
    else
      put_vector(out, t);
  });
}

ModelParams get_params(std::istream& in, const MlpSpec& spec_f, const MlpSpec& spec_g) {
  // Shape the container, then fill tensors in declaration order.
  ModelParams p = init_params(spec_f, spec_g, 0);
  for_each_tensor(p, [&](auto& t, TensorKind) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>)
      get_matrix(in, t);
    else
      get_vector(in, t);
  });
  bool finite = true;
  for_each_tensor(p, [&](const auto& t, TensorKind) {
    if (!t.allFinite()) finite = false;
  });
  if (!finite) throw DataError("checkpoint: non-finite tensor values");
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& student,
                     const ModelParams* teacher) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u8(out, teacher ? 1 : 0);
  put_spec(out, student.spec_f);
  put_spec(out, student.spec_g);
  put_params(out, student);
  if (teacher) {
    if (teacher->spec_f.layer_dims != student.spec_f.layer_dims ||
        teacher->spec_g.layer_dims != student.spec_g.layer_dims)
      throw UsageError("checkpoint: teacher shapes differ from student");
    put_params(out, *teacher);
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const bool has_teacher = get_u8(in) != 0;
  const MlpSpec spec_f = get_spec(in);
  const MlpSpec spec_g = get_spec(in);
  if (spec_g.input_dim() != spec_f.output_dim())
    throw DataError("checkpoint: encoder/projector dims inconsistent");

  Checkpoint ck{get_params(in, spec_f, spec_g), std::nullopt};
  if (has_teacher) ck.teacher = get_params(in, spec_f, spec_g);
  // Anything left over means the shapes in the header lied.
  char extra;
  if (in.read(&extra, 1)) throw DataError("checkpoint: trailing bytes");
  return ck;
}

}  // namespace bam
