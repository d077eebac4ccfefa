#include "helpers.hpp"

#include "varmaformer/checkpoint.hpp"
#include "varmaformer/config.hpp"
#include "varmaformer/experiment.hpp"
#include "varmaformer/model.hpp"

#include <doctest.h>

using namespace testing;

namespace {

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
}

}  // namespace

TEST_CASE("config text is parsed with comments and whitespace") {
  ExperimentConfig c;
  apply_config_text(c, "# header\n  lookback = 48 \nhorizon=24   # trailing\n\nalpha = 0.75\nve_atten = false\n"
                       "horizons = 24, 48\nseed = 9\n");
  CHECK(c.model.lookback == 48);
  CHECK(c.model.horizon == 24);
  CHECK(c.model.alpha == 0.75);
  CHECK_FALSE(c.model.ve_atten);
  CHECK(c.horizons == std::vector<std::size_t>{24, 48});
  CHECK(c.seed == 9);
  CHECK(c.train.seed == 9);
}

TEST_CASE("bad config input is rejected with the key in the message") {
  ExperimentConfig c;
  const auto message = [&](const std::string& text) {
    try {
      apply_config_text(c, text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("learning_rat = 0.1") == "unknown config key 'learning_rat'");
  CHECK(message("lookback = -3").find("'lookback'") != std::string::npos);
  CHECK(message("alpha = big").find("expected a number") != std::string::npos);
  CHECK(message("ve_atten = maybe").find("true/false") != std::string::npos);
  CHECK(message("split = weekly").find("weekly") != std::string::npos);
  CHECK(message("just words").find("line 1") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/varmaformer.cfg"), ConfigError);
}

TEST_CASE("validation reports model constraints as config errors") {
  ExperimentConfig c;
  CHECK_NOTHROW(validate(c));
  c.model.horizon = 100;
  CHECK_THROWS_WITH_AS(validate(c), "horizon 100 is not divisible by patch_length 24", ConfigError);
  c = ExperimentConfig{};
  c.seeds = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("every key is documented and round-trips through text") {
  ExperimentConfig c;
  apply_config_text(c, "dataset = a b.csv\nsplit = ratio\nhorizons = 24,48\np = 3\nq = 0\nbeta = 0.125\n"
                       "alpha_trainable = true\nlearning_rate = 0.0003\ntrain_stride = 4\nout = x/y\n");
  for (const ConfigKey& key : config_keys()) {
    CHECK_FALSE(key.description.empty());
    CHECK_NOTHROW(get_setting(c, key.name));
  }
  ExperimentConfig back;
  apply_config_text(back, to_config_text(c));
  CHECK(to_config_text(back) == to_config_text(c));
  CHECK(back.dataset == "a b.csv");
  CHECK(back.model.beta == 0.125);
  CHECK(back.train.learning_rate == 0.0003);
  CHECK(back.train_stride == 4);
}

TEST_CASE("property: random real settings survive the text round trip bit for bit") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    ExperimentConfig c;
    c.model.alpha = rng.uniform();
    c.model.beta = rng.uniform();
    c.train.learning_rate = std::exp(rng.uniform(-12.0, 0.0));
    ExperimentConfig back;
    apply_config_text(back, to_config_text(c));
    CHECK(back.model.alpha == c.model.alpha);
    CHECK(back.model.beta == c.model.beta);
    CHECK(back.train.learning_rate == c.train.learning_rate);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  const auto dir = scratch_dir("checkpoint");
  ModelConfig m;
  m.lookback = 8;
  m.horizon = 4;
  m.patch_length = 2;
  m.d_model = 8;
  m.n_layers = 1;
  m.n_heads = 2;
  m.ffn_width = 4;
  m.alpha_trainable = true;
  VarmaFormer model(m, 77);
  Checkpoint cp{"lookback = 8\n", model.parameters().snapshot()};
  write_checkpoint(dir / "m.vmf", cp);
  const Checkpoint back = read_checkpoint(dir / "m.vmf");
  CHECK(back.config_text == cp.config_text);
  REQUIRE(back.parameters.size() == cp.parameters.size());
  for (std::size_t i = 0; i < cp.parameters.size(); ++i) {
    CHECK(back.parameters[i].name == cp.parameters[i].name);
    CHECK(back.parameters[i].shape == cp.parameters[i].shape);
    CHECK(back.parameters[i].values == cp.parameters[i].values);
  }
  CHECK(read_bytes(dir / "m.vmf").substr(0, 4) == "VMF1");
}

TEST_CASE("damaged checkpoints are refused") {
  const auto dir = scratch_dir("checkpoint_bad");
  ParameterRegistry r;
  r.add("w", Tensor::from({2, 2}, {1, 2, 3, 4}));
  write_checkpoint(dir / "ok.vmf", {"", r.snapshot()});
  const std::string bytes = read_bytes(dir / "ok.vmf");

  CHECK_THROWS_AS(read_checkpoint(dir / "missing.vmf"), CheckpointError);
  for (std::size_t cut : {std::size_t{2}, std::size_t{6}, bytes.size() / 2, bytes.size() - 1}) {
    write_bytes(dir / "cut.vmf", bytes.substr(0, cut));
    CHECK_THROWS_AS(read_checkpoint(dir / "cut.vmf"), CheckpointError);
  }
  std::string magic = bytes;
  magic[3] = '2';
  write_bytes(dir / "magic.vmf", magic);
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "magic.vmf"), doctest::Contains("not a VMF1"), CheckpointError);
  write_bytes(dir / "tail.vmf", bytes + "x");
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "tail.vmf"), doctest::Contains("trailing"), CheckpointError);
}

TEST_CASE("a loaded model forecasts identically to the saved one") {
  const auto dir = scratch_dir("load_model");
  ExperimentConfig c;
  apply_config_text(c, "lookback = 12\nhorizon = 6\npatch_len = 3\nd_model = 8\nn_layers = 2\nn_heads = 2\n"
                       "ffn_width = 8\np = 1\nq = 2\nbeta = 0.4\n");
  VarmaFormer model(c.model, 5);
  write_checkpoint(dir / "m.vmf", {to_config_text(c), model.parameters().snapshot()});
  ExperimentConfig loaded;
  const auto back = load_model(dir / "m.vmf", loaded);
  CHECK(to_config_text(loaded) == to_config_text(c));
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    const Matrix lb = random_matrix(3, 12, rng, 2.0, -1.0);
    CHECK(back->forecast(lb).values == model.forecast(lb).values);
  }
  CHECK(back->parameters().fingerprint() == model.parameters().fingerprint());
}

TEST_CASE("a checkpoint whose shapes disagree with its config is refused") {
  const auto dir = scratch_dir("load_mismatch");
  ExperimentConfig c;
  apply_config_text(c, "lookback = 8\nhorizon = 4\npatch_len = 2\nd_model = 4\nn_layers = 1\nn_heads = 1\n");
  VarmaFormer model(c.model, 1);
  apply_setting(c, "d_model", "8");
  write_checkpoint(dir / "m.vmf", {to_config_text(c), model.parameters().snapshot()});
  ExperimentConfig loaded;
  CHECK_THROWS_AS(load_model(dir / "m.vmf", loaded), CheckpointError);
}
