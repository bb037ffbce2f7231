#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bam/datagen.hpp"
#include "bam/loss.hpp"
#include "bam/mlp.hpp"

namespace bam {

enum class LossMode { Vanilla, Bam, BamTeacher, Contrastive };

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& s);

struct DataConfig {
  enum class Kind { GaussianMixture, TwoRings, Csv };
  Kind kind = Kind::GaussianMixture;
  // gaussian_mixture
  int num_classes = 8;
  int per_class = 64;
  int d_in = 32;
  double center_sigma = 5.0;
  double cluster_sigma = 1.0;
  // two_rings
  int rings_per_class = 100;
  std::array<double, 2> radii{1.0, 3.0};
  double ring_noise = 0.05;
  // csv
  std::string csv_path;
  // Defaults to the run seed when unset.
  std::optional<std::uint64_t> seed;
};

struct OptimConfig {
  double learning_rate_base = 0.5;
  int warmup_steps = 100;
  int total_steps = 2000;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  double grad_clip = 1.0;  // <= 0 disables clipping
};

/// Every knob of a run. An empty config file materializes to these defaults.
struct RunConfig {
  DataConfig data;
  AugmentSpec augment{/*noise_sigma=*/0.5, /*scale_lo=*/0.9, /*scale_hi=*/1.1,
                      /*dropout_prob=*/0.0, /*rotate_angle_max=*/0.0};
  int n = 64;  // images per batch
  int k = 2;   // views per image
  std::vector<int> encoder_dims;    // empty: [d_in, 128, 64]
  std::vector<int> projector_dims;  // empty: [enc_out, 256, 256, 64]
  bool batchnorm = false;           // hidden layers of both nets
  LossMode loss_mode = LossMode::Bam;
  double tau = 0.1;
  double tau_b = 0.05;
  bool mask_positives = true;
  MaskMode mask_mode = MaskMode::Zero;
  bool global_norm = true;
  PairPolicy pair_policy;  // empty: all ordered pairs
  bool vanilla_symmetric_grad = false;
  SinkhornSettings sinkhorn = SinkhornSettings::training();
  OptimConfig optim;
  double teacher_momentum = 0.99;
  std::uint64_t seed = 7;
  std::string out_dir = "runs/default";
  int log_every = 10;
  int checkpoint_every = 500;

  AttentionOptions attention_options() const;
  PairPolicy effective_policy() const;
  MlpSpec encoder_spec(int d_in) const;
  MlpSpec projector_spec() const;

  /// Throws ConfigError naming the offending key and constraint.
  void validate() const;
};

struct ParsedConfig {
  RunConfig config;
  std::vector<std::string> warnings;  // never fatal, never change exit codes
  std::string verbatim;               // raw input text
};

/// Flat `key = value` lines under one-level `[section]` headers; '#' starts a
/// comment. Unknown keys and malformed values are errors naming the key.
ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::string& path);

/// Fully-resolved config, parseable by parse_config_text.
std::string render_config(const RunConfig& cfg);

/// Materializes the dataset a config describes.
Dataset build_dataset(const DataConfig& data, std::uint64_t run_seed);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace bam
