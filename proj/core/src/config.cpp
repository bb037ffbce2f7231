#include "bam/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bam {

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::Vanilla: return "vanilla";
    case LossMode::Bam: return "bam";
    case LossMode::BamTeacher: return "bam_teacher";
    case LossMode::Contrastive: return "contrastive";
  }
  throw InternalError("unknown loss mode");
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "vanilla") return LossMode::Vanilla;
  if (s == "bam") return LossMode::Bam;
  if (s == "bam_teacher") return LossMode::BamTeacher;
  if (s == "contrastive") return LossMode::Contrastive;
  throw ConfigError("loss.mode: expected vanilla|bam|bam_teacher|contrastive, got '" + s + "'");
}

AttentionOptions RunConfig::attention_options() const {
  AttentionOptions opt;
  opt.tau = tau;
  opt.mask_positives = mask_positives;
  opt.mask_mode = mask_mode;
  opt.global_norm = global_norm;
  return opt;
}

PairPolicy RunConfig::effective_policy() const {
  return pair_policy.pairs.empty() ? PairPolicy::all_ordered(k) : pair_policy;
}

MlpSpec RunConfig::encoder_spec(int d_in) const {
  MlpSpec spec;
  spec.layer_dims = encoder_dims.empty() ? std::vector<int>{d_in, 128, 64} : encoder_dims;
  if (spec.layer_dims.front() != d_in)
    throw ConfigError("model.encoder_dims: input dim " +
                      std::to_string(spec.layer_dims.front()) +
                      " does not match dataset dim " + std::to_string(d_in));
  if (batchnorm) {
    spec.batchnorm.assign(static_cast<std::size_t>(spec.num_layers()), true);
    spec.batchnorm.back() = false;  // linear output stays raw
  }
  spec.validate();
  return spec;
}

MlpSpec RunConfig::projector_spec() const {
  const int h_dim = encoder_dims.empty() ? 64 : encoder_dims.back();
  MlpSpec spec;
  spec.layer_dims =
      projector_dims.empty() ? std::vector<int>{h_dim, 256, 256, 64} : projector_dims;
  if (spec.layer_dims.front() != h_dim)
    throw ConfigError("model.projector_dims: input dim " +
                      std::to_string(spec.layer_dims.front()) +
                      " does not match encoder output " + std::to_string(h_dim));
  if (batchnorm) {
    spec.batchnorm.assign(static_cast<std::size_t>(spec.num_layers()), true);
    spec.batchnorm.back() = false;
  }
  spec.validate();
  return spec;
}

void RunConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("loss.tau: tau must be positive");
  if (!(tau_b > 0.0))
    throw ConfigError("loss.target_temperature: target_temperature must be positive");
  if (n < 2) throw ConfigError("run.n: need at least 2 images per batch");
  if (k < 2) throw ConfigError("run.k: need at least 2 views per image");
  if (!global_norm && k < 2)
    throw ConfigError("loss.global_norm: per-block normalization needs k >= 2");
  if (loss_mode == LossMode::BamTeacher &&
      (teacher_momentum < 0.0 || teacher_momentum > 1.0))
    throw ConfigError("teacher.momentum: must be in [0, 1]");
  if (!(sinkhorn.tol > 0.0)) throw ConfigError("sinkhorn.tol: must be positive");
  if (sinkhorn.max_iters < 1) throw ConfigError("sinkhorn.max_iters: must be >= 1");
  if (optim.total_steps < 1) throw ConfigError("optim.total_steps: must be >= 1");
  if (optim.warmup_steps < 0 || optim.warmup_steps > optim.total_steps)
    throw ConfigError("optim.warmup_steps: must be in [0, total_steps]");
  if (optim.momentum < 0.0 || optim.momentum >= 1.0)
    throw ConfigError("optim.momentum: must be in [0, 1)");
  if (optim.weight_decay < 0.0) throw ConfigError("optim.weight_decay: must be >= 0");
  if (optim.learning_rate_base < 0.0)
    throw ConfigError("optim.learning_rate_base: must be >= 0");
  if (log_every < 1) throw ConfigError("run.log_every: must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("run.checkpoint_every: must be >= 1");
  augment.validate();
  if (!pair_policy.pairs.empty()) pair_policy.validate(k);
  if (data.kind == DataConfig::Kind::Csv && data.csv_path.empty())
    throw ConfigError("data.csv_path: required when data.kind = csv");
}

Dataset build_dataset(const DataConfig& data, std::uint64_t run_seed) {
  const std::uint64_t seed = data.seed.value_or(run_seed);
  switch (data.kind) {
    case DataConfig::Kind::GaussianMixture:
      return make_gaussian_mixture(data.num_classes, data.per_class, data.d_in,
                                   data.center_sigma, data.cluster_sigma, seed);
    case DataConfig::Kind::TwoRings:
      return make_two_rings(data.rings_per_class, data.radii, data.ring_noise, seed);
    case DataConfig::Kind::Csv:
      return load_csv(data.csv_path);
  }
  throw InternalError("unknown data kind");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& val,
                            const std::string& what) {
  throw ConfigError(key + ": expected " + what + ", got '" + val + "'");
}

double parse_real(const std::string& key, const std::string& val) {
  try {
    std::size_t pos = 0;
    double v = std::stod(val, &pos);
    if (pos != val.size()) bad_value(key, val, "a real number");
    if (!std::isfinite(v)) bad_value(key, val, "a finite real number");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, val, "a real number");
  }
}

long long parse_int(const std::string& key, const std::string& val) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
  if (ec != std::errc{} || ptr != val.data() + val.size())
    bad_value(key, val, "an integer");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& val) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
  if (ec != std::errc{} || ptr != val.data() + val.size())
    bad_value(key, val, "a non-negative integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& val) {
  if (val == "true") return true;
  if (val == "false") return false;
  bad_value(key, val, "true or false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& val) {
  std::vector<int> out;
  std::stringstream ss(val);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    out.push_back(static_cast<int>(parse_int(key, tok)));
  }
  if (out.empty()) bad_value(key, val, "a comma-separated integer list");
  return out;
}

PairPolicy parse_policy(const std::string& key, const std::string& val) {
  PairPolicy p;
  if (val == "all") return p;  // empty means all ordered pairs
  std::stringstream ss(val);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    auto gt = tok.find('>');
    if (gt == std::string::npos) bad_value(key, val, "'all' or a list like 0>1,1>0");
    int a = static_cast<int>(parse_int(key, trim(tok.substr(0, gt))));
    int b = static_cast<int>(parse_int(key, trim(tok.substr(gt + 1))));
    p.pairs.emplace_back(a, b);
  }
  if (p.pairs.empty()) bad_value(key, val, "'all' or a list like 0>1,1>0");
  return p;
}

MaskMode parse_mask_mode(const std::string& key, const std::string& val) {
  if (val == "zero") return MaskMode::Zero;
  if (val == "neg_inf") return MaskMode::NegInf;
  bad_value(key, val, "zero or neg_inf");
}

DataConfig::Kind parse_data_kind(const std::string& key, const std::string& val) {
  if (val == "gaussian_mixture") return DataConfig::Kind::GaussianMixture;
  if (val == "two_rings") return DataConfig::Kind::TwoRings;
  if (val == "csv") return DataConfig::Kind::Csv;
  bad_value(key, val, "gaussian_mixture, two_rings, or csv");
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig out;
  out.verbatim = text;
  RunConfig& cfg = out.config;

  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;

    if (full == "data.kind") cfg.data.kind = parse_data_kind(full, val);
    else if (full == "data.num_classes") cfg.data.num_classes = static_cast<int>(parse_int(full, val));
    else if (full == "data.per_class") cfg.data.per_class = static_cast<int>(parse_int(full, val));
    else if (full == "data.d_in") cfg.data.d_in = static_cast<int>(parse_int(full, val));
    else if (full == "data.center_sigma") cfg.data.center_sigma = parse_real(full, val);
    else if (full == "data.cluster_sigma") cfg.data.cluster_sigma = parse_real(full, val);
    else if (full == "data.rings_per_class") cfg.data.rings_per_class = static_cast<int>(parse_int(full, val));
    else if (full == "data.radii_inner") cfg.data.radii[0] = parse_real(full, val);
    else if (full == "data.radii_outer") cfg.data.radii[1] = parse_real(full, val);
    else if (full == "data.ring_noise") cfg.data.ring_noise = parse_real(full, val);
    else if (full == "data.csv_path") cfg.data.csv_path = val;
    else if (full == "data.seed") cfg.data.seed = parse_u64(full, val);
    else if (full == "augment.noise_sigma") cfg.augment.noise_sigma = parse_real(full, val);
    else if (full == "augment.scale_lo") cfg.augment.scale_lo = parse_real(full, val);
    else if (full == "augment.scale_hi") cfg.augment.scale_hi = parse_real(full, val);
    else if (full == "augment.dropout_prob") cfg.augment.dropout_prob = parse_real(full, val);
    else if (full == "augment.rotate_angle_max") cfg.augment.rotate_angle_max = parse_real(full, val);
    else if (full == "model.encoder_dims") cfg.encoder_dims = parse_int_list(full, val);
    else if (full == "model.projector_dims") cfg.projector_dims = parse_int_list(full, val);
    else if (full == "model.batchnorm") cfg.batchnorm = parse_bool(full, val);
    else if (full == "loss.mode") cfg.loss_mode = loss_mode_from_string(val);
    else if (full == "loss.tau") cfg.tau = parse_real(full, val);
    else if (full == "loss.target_temperature") cfg.tau_b = parse_real(full, val);
    else if (full == "loss.mask_positives") cfg.mask_positives = parse_bool(full, val);
    else if (full == "loss.mask_mode") cfg.mask_mode = parse_mask_mode(full, val);
    else if (full == "loss.global_norm") cfg.global_norm = parse_bool(full, val);
    else if (full == "loss.pair_policy") cfg.pair_policy = parse_policy(full, val);
    else if (full == "loss.vanilla_symmetric_grad") cfg.vanilla_symmetric_grad = parse_bool(full, val);
    else if (full == "sinkhorn.max_iters") cfg.sinkhorn.max_iters = static_cast<int>(parse_int(full, val));
    else if (full == "sinkhorn.tol") cfg.sinkhorn.tol = parse_real(full, val);
    else if (full == "optim.learning_rate_base") cfg.optim.learning_rate_base = parse_real(full, val);
    else if (full == "optim.warmup_steps") cfg.optim.warmup_steps = static_cast<int>(parse_int(full, val));
    else if (full == "optim.total_steps") cfg.optim.total_steps = static_cast<int>(parse_int(full, val));
    else if (full == "optim.momentum") cfg.optim.momentum = parse_real(full, val);
    else if (full == "optim.weight_decay") cfg.optim.weight_decay = parse_real(full, val);
    else if (full == "optim.grad_clip") cfg.optim.grad_clip = parse_real(full, val);
    else if (full == "teacher.momentum") cfg.teacher_momentum = parse_real(full, val);
    else if (full == "run.n") cfg.n = static_cast<int>(parse_int(full, val));
    else if (full == "run.k") cfg.k = static_cast<int>(parse_int(full, val));
    else if (full == "run.seed") cfg.seed = parse_u64(full, val);
    else if (full == "run.out_dir") cfg.out_dir = val;
    else if (full == "run.log_every") cfg.log_every = static_cast<int>(parse_int(full, val));
    else if (full == "run.checkpoint_every") cfg.checkpoint_every = static_cast<int>(parse_int(full, val));
    else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + full + "'");
  }

  cfg.validate();
  if (cfg.tau_b >= cfg.tau)
    out.warnings.push_back(
        "loss.target_temperature >= loss.tau: the target entropy no longer sits "
        "below the attention entropy, a regime known to collapse training");
  return out;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_dims(const std::vector<int>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i)
    s += (i ? "," : "") + std::to_string(dims[i]);
  return s;
}

std::string data_kind_name(DataConfig::Kind k) {
  switch (k) {
    case DataConfig::Kind::GaussianMixture: return "gaussian_mixture";
    case DataConfig::Kind::TwoRings: return "two_rings";
    case DataConfig::Kind::Csv: return "csv";
  }
  throw InternalError("unknown data kind");
}

}  // namespace

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[data]\n";
  os << "kind = " << data_kind_name(cfg.data.kind) << "\n";
  os << "num_classes = " << cfg.data.num_classes << "\n";
  os << "per_class = " << cfg.data.per_class << "\n";
  os << "d_in = " << cfg.data.d_in << "\n";
  os << "center_sigma = " << fmt_real(cfg.data.center_sigma) << "\n";
  os << "cluster_sigma = " << fmt_real(cfg.data.cluster_sigma) << "\n";
  os << "rings_per_class = " << cfg.data.rings_per_class << "\n";
  os << "radii_inner = " << fmt_real(cfg.data.radii[0]) << "\n";
  os << "radii_outer = " << fmt_real(cfg.data.radii[1]) << "\n";
  os << "ring_noise = " << fmt_real(cfg.data.ring_noise) << "\n";
  if (!cfg.data.csv_path.empty()) os << "csv_path = " << cfg.data.csv_path << "\n";
  if (cfg.data.seed) os << "seed = " << *cfg.data.seed << "\n";
  os << "\n[augment]\n";
  os << "noise_sigma = " << fmt_real(cfg.augment.noise_sigma) << "\n";
  os << "scale_lo = " << fmt_real(cfg.augment.scale_lo) << "\n";
  os << "scale_hi = " << fmt_real(cfg.augment.scale_hi) << "\n";
  os << "dropout_prob = " << fmt_real(cfg.augment.dropout_prob) << "\n";
  os << "rotate_angle_max = " << fmt_real(cfg.augment.rotate_angle_max) << "\n";
  os << "\n[model]\n";
  if (!cfg.encoder_dims.empty()) os << "encoder_dims = " << fmt_dims(cfg.encoder_dims) << "\n";
  if (!cfg.projector_dims.empty())
    os << "projector_dims = " << fmt_dims(cfg.projector_dims) << "\n";
  os << "batchnorm = " << (cfg.batchnorm ? "true" : "false") << "\n";
  os << "\n[loss]\n";
  os << "mode = " << to_string(cfg.loss_mode) << "\n";
  os << "tau = " << fmt_real(cfg.tau) << "\n";
  os << "target_temperature = " << fmt_real(cfg.tau_b) << "\n";
  os << "mask_positives = " << (cfg.mask_positives ? "true" : "false") << "\n";
  os << "mask_mode = " << to_string(cfg.mask_mode) << "\n";
  os << "global_norm = " << (cfg.global_norm ? "true" : "false") << "\n";
  if (cfg.pair_policy.pairs.empty()) {
    os << "pair_policy = all\n";
  } else {
    os << "pair_policy = ";
    for (std::size_t i = 0; i < cfg.pair_policy.pairs.size(); ++i)
      os << (i ? "," : "") << cfg.pair_policy.pairs[i].first << ">"
         << cfg.pair_policy.pairs[i].second;
    os << "\n";
  }
  os << "vanilla_symmetric_grad = " << (cfg.vanilla_symmetric_grad ? "true" : "false") << "\n";
  os << "\n[sinkhorn]\n";
  os << "max_iters = " << cfg.sinkhorn.max_iters << "\n";
  os << "tol = " << fmt_real(cfg.sinkhorn.tol) << "\n";
  os << "\n[optim]\n";
  os << "learning_rate_base = " << fmt_real(cfg.optim.learning_rate_base) << "\n";
  os << "warmup_steps = " << cfg.optim.warmup_steps << "\n";
  os << "total_steps = " << cfg.optim.total_steps << "\n";
  os << "momentum = " << fmt_real(cfg.optim.momentum) << "\n";
  os << "weight_decay = " << fmt_real(cfg.optim.weight_decay) << "\n";
  os << "grad_clip = " << fmt_real(cfg.optim.grad_clip) << "\n";
  os << "\n[teacher]\n";
  os << "momentum = " << fmt_real(cfg.teacher_momentum) << "\n";
  os << "\n[run]\n";
  os << "n = " << cfg.n << "\n";
  os << "k = " << cfg.k << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  os << "log_every = " << cfg.log_every << "\n";
  os << "checkpoint_every = " << cfg.checkpoint_every << "\n";
  return os.str();
}

}  // namespace bam
