#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bam/config.hpp"

using namespace bam;

TEST_CASE("empty config materializes every default") {
  ParsedConfig parsed = parse_config_text("");
  const RunConfig& cfg = parsed.config;
  CHECK(cfg.tau == doctest::Approx(0.1));
  CHECK(cfg.tau_b == doctest::Approx(0.05));
  CHECK(cfg.mask_positives);
  CHECK(cfg.mask_mode == MaskMode::Zero);
  CHECK(cfg.global_norm);
  CHECK(cfg.loss_mode == LossMode::Bam);
  CHECK(cfg.n == 64);
  CHECK(cfg.k == 2);
  CHECK(cfg.sinkhorn.max_iters == 5);
  CHECK(cfg.sinkhorn.tol == doctest::Approx(1e-3));
  CHECK(parsed.warnings.empty());
  CHECK(cfg.effective_policy().count() == 2);
}

TEST_CASE("zero target temperature is rejected with the constraint") {
  CHECK_THROWS_WITH_AS(parse_config_text("[loss]\ntarget_temperature = 0\n"),
                       doctest::Contains("target_temperature must be positive"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("[loss]\ntau = -0.1\n"),
                       doctest::Contains("tau"), ConfigError);
}

TEST_CASE("target temperature at tau parses with a collapse warning") {
  ParsedConfig parsed = parse_config_text("[loss]\ntarget_temperature = 0.1\n");
  CHECK(parsed.config.tau_b == doctest::Approx(0.1));
  REQUIRE(parsed.warnings.size() == 1);
  CHECK(parsed.warnings[0].find("collapse") != std::string::npos);
}

TEST_CASE("unknown keys and malformed values name the problem") {
  CHECK_THROWS_WITH_AS(parse_config_text("[loss]\ntemperature = 0.1\n"),
                       doctest::Contains("loss.temperature"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("[optim]\ntotal_steps = soon\n"),
                       doctest::Contains("optim.total_steps"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("[loss]\nmask_mode = blank\n"),
                       doctest::Contains("zero or neg_inf"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("loose_key = 1\n"),
                       doctest::Contains("loose_key"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[loss\nmode = bam\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[loss]\njust a line\n"), ConfigError);
}

TEST_CASE("comments, spacing, and sections parse") {
  const std::string text =
      "# run settings\n"
      "[loss]\n"
      "mode = bam_teacher   # with a shadow copy\n"
      "tau = 0.2\n"
      "\n"
      "[run]\n"
      "seed = 123\n"
      "n = 32\n";
  ParsedConfig parsed = parse_config_text(text);
  CHECK(parsed.config.loss_mode == LossMode::BamTeacher);
  CHECK(parsed.config.tau == doctest::Approx(0.2));
  CHECK(parsed.config.seed == 123);
  CHECK(parsed.config.n == 32);
  CHECK(parsed.verbatim == text);
}

TEST_CASE("pair policy strings") {
  ParsedConfig parsed = parse_config_text("[loss]\npair_policy = 0>1,1>0\n");
  REQUIRE(parsed.config.pair_policy.count() == 2);
  CHECK(parsed.config.pair_policy.pairs[0] == std::pair<int, int>{0, 1});
  CHECK_THROWS_AS(parse_config_text("[loss]\npair_policy = 0:1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[loss]\npair_policy = 0>0\n[run]\nk = 2\n"),
                  ConfigError);
}

TEST_CASE("rendered config round-trips") {
  ParsedConfig parsed = parse_config_text(
      "[loss]\nmode = contrastive\ntau = 0.07\n[run]\nseed = 99\nout_dir = runs/x\n"
      "[model]\nencoder_dims = 16,32,8\n");
  const std::string rendered = render_config(parsed.config);
  ParsedConfig again = parse_config_text(rendered);
  CHECK(again.config.loss_mode == LossMode::Contrastive);
  CHECK(again.config.tau == doctest::Approx(0.07));
  CHECK(again.config.seed == 99);
  CHECK(again.config.out_dir == "runs/x");
  CHECK(again.config.encoder_dims == std::vector<int>{16, 32, 8});
  CHECK(render_config(again.config) == rendered);
}

TEST_CASE("validation invariants") {
  RunConfig cfg;
  cfg.k = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.loss_mode = LossMode::BamTeacher;
  cfg.teacher_momentum = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.optim.warmup_steps = 5000;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.data.kind = DataConfig::Kind::Csv;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config file loading") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "bam_cfg_test";
  fs::create_directories(dir);
  const std::string path = (dir / "run.cfg").string();
  {
    std::ofstream out(path);
    out << "[run]\nseed = 5\n";
  }
  CHECK(parse_config_file(path).config.seed == 5);
  CHECK_THROWS_AS(parse_config_file((dir / "missing.cfg").string()), IoError);
}

TEST_CASE("build_dataset honours the data section and run-seed default") {
  RunConfig cfg;
  cfg.data.num_classes = 3;
  cfg.data.per_class = 4;
  cfg.data.d_in = 5;
  Dataset a = build_dataset(cfg.data, 17);
  Dataset b = build_dataset(cfg.data, 17);
  CHECK(a.points == b.points);
  cfg.data.seed = 99;
  Dataset c = build_dataset(cfg.data, 17);
  CHECK(a.points != c.points);
  CHECK(a.num_classes == 3);
  CHECK(a.size() == 12);

  cfg.data.kind = DataConfig::Kind::TwoRings;
  cfg.data.rings_per_class = 6;
  Dataset rings = build_dataset(cfg.data, 1);
  CHECK(rings.size() == 12);
  CHECK(rings.dim() == 2);
}

TEST_CASE("fnv1a64 is stable") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("abc") != fnv1a64("abd"));
}
