#include "helpers.hpp"

#include "varmaformer/model.hpp"
#include "varmaformer/oracle.hpp"
#include "varmaformer/verify.hpp"

#include <doctest.h>

#include <numeric>

using namespace testing;

namespace {

std::vector<double> column(const Dataset& ds, std::size_t c) {
  std::vector<double> out(ds.length());
  for (std::size_t t = 0; t < ds.length(); ++t) out[t] = ds.values(t, c);
  return out;
}

ModelConfig small_config() {
  ModelConfig c;
  c.lookback = 6;
  c.horizon = 4;
  c.patch_length = 2;
  c.d_model = 4;
  c.n_layers = 2;
  c.n_heads = 2;
  c.ffn_width = 8;
  c.p = 2;
  c.q = 1;
  return c;
}

void set_all(ParameterRegistry& r, const std::string& name, double value) {
  for (double& v : r.at(name).mutable_data()) v = value;
}

}  // namespace

TEST_CASE("noiseless AR(1) decays geometrically") {
  oracle::SyntheticSpec spec;
  spec.ar = {0.9};
  spec.noise_std = 0.0;
  spec.burn_in = 0;
  spec.initial = 1.0;
  spec.length = 30;
  const Dataset ds = oracle::generate(spec);
  REQUIRE(ds.length() == 30);
  for (std::size_t k = 0; k < 30; ++k) CHECK(ds.values(k, 0) == doctest::Approx(std::pow(0.9, k + 1)).epsilon(1e-12));
  CHECK(ds.timestamps[1] - ds.timestamps[0] == 3600);
  CHECK(format_timestamp(ds.timestamps[0]) == "2016-07-01 00:00:00");
}

TEST_CASE("AR(2) sample moments match the stationary closed form") {
  oracle::SyntheticSpec spec;
  spec.ar = {0.5, 0.3};
  spec.noise_std = 0.1;
  spec.length = 100000;
  spec.seed = 17;
  const std::vector<double> x = column(oracle::generate(spec), 0);
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0, lag1 = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    var += (x[t] - m) * (x[t] - m);
    if (t > 0) lag1 += (x[t] - m) * (x[t - 1] - m);
  }
  var /= n;
  lag1 /= n;
  // gamma_0 = s^2 (1 - phi2) / ((1 + phi2) ((1 - phi2)^2 - phi1^2)), rho_1 = phi1 / (1 - phi2)
  const double expected_var = 0.01 * 0.7 / (1.3 * (0.49 - 0.25));
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(var / expected_var - 1.0) < 0.05);
  CHECK(std::abs(lag1 / var - 0.5 / 0.7) < 0.05);
}

TEST_CASE("noiseless sine is exact and channels are phase shifted") {
  oracle::SyntheticSpec spec;
  spec.kind = oracle::SyntheticKind::SinePlusNoise;
  spec.noise_std = 0.0;
  spec.channels = 2;
  spec.burn_in = 0;
  spec.length = 48;
  spec.amplitude = 2.0;
  const Dataset ds = oracle::generate(spec);
  for (std::size_t t = 0; t < 48; ++t) {
    CHECK(ds.values(t, 0) == doctest::Approx(2.0 * std::sin(2.0 * M_PI * t / 24.0)).epsilon(1e-12));
    CHECK(ds.values(t, 1) == doctest::Approx(2.0 * std::sin(2.0 * M_PI * t / 24.0 + M_PI)).epsilon(1e-12));
  }
}

TEST_CASE("MA terms enter with the previous innovations") {
  // x_t = e_t + 0.5 e_{t-1}: lag-1 autocorrelation 0.5 / 1.25, lag 2 zero
  oracle::SyntheticSpec spec;
  spec.kind = oracle::SyntheticKind::Varma;
  spec.ma = {0.5};
  spec.length = 100000;
  spec.seed = 3;
  const std::vector<double> x = column(oracle::generate(spec), 0);
  double v = 0.0, l1 = 0.0, l2 = 0.0;
  for (std::size_t t = 2; t < x.size(); ++t) {
    v += x[t] * x[t];
    l1 += x[t] * x[t - 1];
    l2 += x[t] * x[t - 2];
  }
  CHECK(std::abs(l1 / v - 0.4) < 0.02);
  CHECK(std::abs(l2 / v) < 0.02);
  CHECK(std::abs(v / static_cast<double>(x.size() - 2) / (0.01 * 1.25) - 1.0) < 0.05);
}

TEST_CASE("stationarity is enforced through the companion matrix") {
  CHECK(oracle::companion_spectral_radius({}) == 0.0);
  CHECK(oracle::companion_spectral_radius({0.5}) == doctest::Approx(0.5));
  // roots of z^2 - 0.5 z - 0.3
  CHECK(oracle::companion_spectral_radius({0.5, 0.3}) == doctest::Approx((0.5 + std::sqrt(1.45)) / 2.0).epsilon(1e-12));
  oracle::SyntheticSpec spec;
  spec.ar = {1.0};
  CHECK_THROWS_AS(oracle::generate(spec), std::invalid_argument);
  spec.ar = {0.6, 0.5};
  CHECK_THROWS_AS(oracle::generate(spec), std::invalid_argument);
  CHECK(oracle::parse_synthetic_kind("varma") == oracle::SyntheticKind::Varma);
  CHECK_THROWS_AS(oracle::parse_synthetic_kind("garch"), std::invalid_argument);
}

TEST_CASE("generation is a pure function of the seed") {
  oracle::SyntheticSpec spec;
  spec.ar = {0.4};
  spec.channels = 3;
  spec.length = 200;
  spec.seed = 99;
  const Dataset a = oracle::generate(spec);
  const Dataset b = oracle::generate(spec);
  CHECK(a.values.values == b.values.values);
  spec.seed = 100;
  CHECK(oracle::generate(spec).values.values != a.values.values);
}

TEST_CASE("reference forward refuses oversized problems") {
  ModelConfig c;
  c.lookback = 512;
  c.patch_length = 8;
  c.horizon = 8;
  c.d_model = 128;
  c.n_heads = 4;
  c.n_layers = 1;
  c.ffn_width = 8;
  VarmaFormer model(c, 1);
  Rng rng(1);
  const Matrix lb = random_matrix(1, 512, rng);
  CHECK_THROWS_AS(oracle::reference_forward(lb, c, model.parameters().snapshot()), std::invalid_argument);
}

TEST_CASE("head bias alone sets the forecast in both paths") {
  ModelConfig c = small_config();
  VarmaFormer model(c, 2);
  for (Parameter& p : model.parameters().all())
    for (double& v : p.tensor.mutable_data()) v = 0.0;
  set_all(model.parameters(), "head.bias", 0.5);
  Rng rng(5);
  const Matrix lb = random_matrix(2, 6, rng, 3.0, 1.0);
  const NormalizedWindow n = normalize_window(lb);
  const Matrix fast = model.forecast(lb);
  const Matrix slow = oracle::reference_forward(lb, c, model.parameters().snapshot());
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(fast(ch, t) == doctest::Approx(n.mu[ch] + 0.5 * n.sigma[ch]).epsilon(1e-14));
      CHECK(slow(ch, t) == doctest::Approx(n.mu[ch] + 0.5 * n.sigma[ch]).epsilon(1e-14));
    }
}

TEST_CASE("saturated gate: beta has no effect in either path") {
  Rng rng(8);
  const Matrix lb = random_matrix(1, 6, rng);
  std::vector<Matrix> fast, slow;
  for (double beta : {0.0, 1.0}) {
    ModelConfig c = small_config();
    c.beta = beta;
    VarmaFormer model(c, 4);
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      const std::string g = "decoder." + std::to_string(l) + ".gate_out.";
      set_all(model.parameters(), g + "weight", 0.0);
      set_all(model.parameters(), g + "bias", 1000.0);
    }
    fast.push_back(model.forecast(lb));
    slow.push_back(oracle::reference_forward(lb, c, model.parameters().snapshot()));
  }
  CHECK(fast[0].values == fast[1].values);
  CHECK(slow[0].values == slow[1].values);
  CHECK(max_abs_diff(fast[0].values, slow[0].values) <= 1e-8);
}

TEST_CASE("tensor forward agrees with the reference over random configurations") {
  VerifyOptions options;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    options.seed = seed;
    const SuiteResult suite = verify_oracle(options);
    INFO((suite.messages.empty() ? std::string() : suite.messages.front()));
    CHECK(suite.passed());
    CHECK(suite.checks >= 20);
    CHECK(suite.worst <= 1e-8);
  }
}
