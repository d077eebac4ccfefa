#include "helpers.hpp"

#include "varmaformer/parameter.hpp"
#include "varmaformer/verify.hpp"
#include "varmaformer/vfe.hpp"

#include <doctest.h>

using namespace testing;

namespace {

void set_values(Tensor t, const std::vector<double>& values) {
  auto dst = t.mutable_data();
  REQUIRE(dst.size() == values.size());
  std::copy(values.begin(), values.end(), dst.begin());
}

void set_identity(const Linear& l) {
  std::vector<double> w(l.weight.size(), 0.0);
  const std::size_t out = l.out_features();
  for (std::size_t i = 0; i < std::min(l.in_features(), out); ++i) w[i * out + i] = 1.0;
  set_values(l.weight, w);
  set_values(l.bias, std::vector<double>(out, 0.0));
}

// Row-major affine map y = x W + b on plain vectors.
std::vector<double> affine_ref(const std::vector<double>& x, const Linear& l) {
  const std::size_t in = l.in_features(), out = l.out_features();
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double s = l.bias.at(o);
    for (std::size_t i = 0; i < in; ++i) s += x[i] * l.weight.at(i * out + o);
    y[o] = s;
  }
  return y;
}

// Triple-loop reference of either branch. `ma` selects differenced lags.
std::vector<double> branch_ref(const Tensor& patches, const std::vector<Tensor>& coef, const Linear& proj, bool ma) {
  const std::size_t rows = patches.dim(0), count = patches.dim(1), plen = patches.dim(2);
  const auto x = [&](std::size_t r, std::size_t n, std::size_t j) { return patches.at((r * count + n) * plen + j); };
  std::vector<double> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t n = 0; n < count; ++n) {
      std::vector<double> lags(coef.size() * plen, 0.0);
      for (std::size_t k = 1; k <= coef.size(); ++k) {
        for (std::size_t j = 0; j < plen; ++j) {
          double v = 0.0;
          if (!ma && n >= k) v = x(r, n - k, j);
          if (ma && n >= k + 1) v = x(r, n - k, j) - x(r, n - k - 1, j);
          lags[(k - 1) * plen + j] = coef[k - 1].item() * v;
        }
      }
      const auto y = affine_ref(lags, proj);
      out.insert(out.end(), y.begin(), y.end());
    }
  }
  return out;
}

struct Extractor {
  ParameterRegistry registry;
  VfeParameters params;
  VfeConfig config;

  Extractor(std::size_t p, std::size_t q, std::size_t plen, std::size_t d, std::uint64_t seed = 1)
      : config{p, q, plen, d} {
    Rng rng(seed);
    params = make_vfe_parameters(registry, config, rng);
  }
};

}  // namespace

TEST_CASE("registry holds exactly the enabled branches") {
  Extractor both(2, 3, 4, 8);
  CHECK(both.registry.contains("vfe.phi.1"));
  CHECK(both.registry.contains("vfe.phi.2"));
  CHECK_FALSE(both.registry.contains("vfe.phi.3"));
  CHECK(both.registry.contains("vfe.theta.3"));
  CHECK(both.registry.at("vfe.phi.1").item() == 0.5);
  CHECK(both.registry.at("vfe.theta.2").item() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(both.registry.at("vfe.proj_ar.weight").shape() == Shape{8, 4});
  CHECK(both.registry.at("vfe.proj_ma.weight").shape() == Shape{12, 4});
  CHECK(both.registry.at("vfe.fuse.weight").shape() == Shape{8, 8});

  Extractor ar_only(2, 0, 4, 8);
  CHECK_FALSE(ar_only.registry.contains("vfe.theta.1"));
  CHECK_FALSE(ar_only.registry.contains("vfe.proj_ma.weight"));
  CHECK(ar_only.params.theta.empty());

  Extractor none(0, 0, 4, 8);
  CHECK(none.registry.size() == 0);
  CHECK_FALSE(none.config.enabled());

  CHECK_THROWS_AS(VfeConfig({1, 1, 4, 7}).validate(), std::invalid_argument);
}

TEST_CASE("lags and innovations on a ramp") {
  const Tensor x = Tensor::from({1, 4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor l1 = lagged_patches(x, 1);
  CHECK(std::vector<double>(l1.data().begin(), l1.data().end()) == std::vector<double>{0, 0, 1, 2, 3, 4, 5, 6});
  const Tensor l9 = lagged_patches(x, 9);
  for (double v : l9.data()) CHECK(v == 0.0);
  const Tensor e = innovation_proxy(x);
  CHECK(std::vector<double>(e.data().begin(), e.data().end()) == std::vector<double>{0, 0, 2, 2, 2, 2, 2, 2});
}

TEST_CASE("identity projections expose the raw lags") {
  Extractor ar(1, 0, 3, 6);
  set_identity(*ar.params.proj_ar);
  set_values(ar.params.phi[0], {1.0});
  const Tensor x = Tensor::from({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor z = ar_features(x, ar.params);
  CHECK(std::vector<double>(z.data().begin(), z.data().end()) == std::vector<double>{0, 0, 0, 1, 2, 3, 4, 5, 6});

  Extractor ma(0, 1, 3, 6);
  set_identity(*ma.params.proj_ma);
  set_values(ma.params.theta[0], {1.0});
  const Tensor ramp = Tensor::from({1, 4, 3}, {1, 2, 3, 3, 5, 7, 6, 9, 12, 10, 14, 18});
  const Tensor m = ma_features(ramp, ma.params);
  // output at t is x(t-1) - x(t-2)
  CHECK(std::vector<double>(m.data().begin(), m.data().end()) ==
        std::vector<double>{0, 0, 0, 0, 0, 0, 2, 3, 4, 3, 4, 5});
}

TEST_CASE("constant patches give bias-only MA features and zero patches give zero AR features") {
  Extractor ex(2, 2, 4, 8, 3);
  const Tensor constant = Tensor::full({2, 5, 4}, 3.5);
  const Tensor m = ma_features(constant, ex.params);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.at(i) == ex.params.proj_ma->bias.at(i % 4));
  set_values(ex.params.proj_ar->bias, std::vector<double>(4, 0.0));
  const Tensor z = ar_features(Tensor::zeros({2, 5, 4}), ex.params);
  for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("property: both branches match the triple-loop reference") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t p = 1 + rng.below(4), q = 1 + rng.below(4), plen = 1 + rng.below(5);
    const std::size_t d = 2 * (1 + rng.below(5));
    Extractor ex(p, q, plen, d, rng.next_u64());
    for (Tensor& c : ex.params.phi) set_values(c, {rng.normal()});
    for (Tensor& c : ex.params.theta) set_values(c, {rng.normal()});
    const Tensor x = random_tensor({1 + rng.below(3), 1 + rng.below(6), plen}, rng);
    CHECK(max_abs_diff(ar_features(x, ex.params).data(), branch_ref(x, ex.params.phi, *ex.params.proj_ar, false)) <=
          1e-10);
    CHECK(max_abs_diff(ma_features(x, ex.params).data(), branch_ref(x, ex.params.theta, *ex.params.proj_ma, true)) <=
          1e-10);
  }
}

TEST_CASE("fuse is a row-wise affine map of the concatenation") {
  Rng rng(22);
  Extractor ex(1, 1, 2, 6, 5);
  const Tensor a = random_tensor({2, 3, 3}, rng), b = random_tensor({2, 3, 3}, rng);
  const Tensor z = fuse(a, b, ex.params);
  std::vector<double> expected;
  for (std::size_t row = 0; row < 6; ++row) {
    std::vector<double> cat;
    for (std::size_t i = 0; i < 3; ++i) cat.push_back(a.at(row * 3 + i));
    for (std::size_t i = 0; i < 3; ++i) cat.push_back(b.at(row * 3 + i));
    const auto y = affine_ref(cat, *ex.params.fuse);
    expected.insert(expected.end(), y.begin(), y.end());
  }
  CHECK(max_abs_diff(z.data(), expected) <= 1e-10);

  const Tensor zeros = fuse(Tensor::zeros({1, 2, 3}), Tensor::zeros({1, 2, 3}), ex.params);
  for (std::size_t i = 0; i < zeros.size(); ++i) CHECK(zeros.at(i) == ex.params.fuse->bias.at(i % 6));

  set_identity(*ex.params.fuse);
  const Tensor raw = fuse(a, b, ex.params);
  CHECK(raw.at(0) == a.at(0));
  CHECK(raw.at(3) == b.at(0));
  CHECK_THROWS_AS(fuse(a, Tensor::zeros({2, 2, 3}), ex.params), ShapeError);
}

TEST_CASE("a disabled branch contributes a zero half") {
  Rng rng(23);
  Extractor ex(2, 0, 3, 8, 7);
  const Tensor x = random_tensor({2, 4, 3}, rng);
  const Tensor z = varma_features(x, ex.params, ex.config);
  const Tensor manual = fuse(ar_features(x, ex.params), Tensor::zeros({2, 4, 4}), ex.params);
  CHECK(max_abs_diff(z.data(), manual.data()) == 0.0);
  Extractor none(0, 0, 3, 8);
  CHECK_THROWS(varma_features(x, none.params, none.config));
}

TEST_CASE("property: features at patch t ignore patches t and later") {
  Rng rng(24);
  for (int trial = 0; trial < 25; ++trial) {
    Extractor ex(rng.below(4), 1 + rng.below(3), 1 + rng.below(4), 4, rng.next_u64());
    const std::size_t rows = 1 + rng.below(3), count = 1 + rng.below(6), plen = ex.config.patch_length;
    const Tensor x = random_tensor({rows, count, plen}, rng);
    const Tensor z = varma_features(x, ex.params, ex.config);
    const std::size_t s = rng.below(count);
    std::vector<double> moved(x.data().begin(), x.data().end());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = s; k < count; ++k) {
        for (std::size_t j = 0; j < plen; ++j) moved[(r * count + k) * plen + j] += rng.normal() * 10.0;
      }
    }
    const Tensor z2 = varma_features(Tensor::from(x.shape(), moved), ex.params, ex.config);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t <= s; ++t) {
        const std::size_t at = (r * count + t) * 4;
        CHECK(max_abs_diff(z.data().subspan(at, 4), z2.data().subspan(at, 4)) == 0.0);
      }
    }
  }
}

TEST_CASE("property: branches are linear once biases are zeroed") {
  Rng rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    Extractor ex(1 + rng.below(3), 1 + rng.below(3), 2, 6, rng.next_u64());
    for (const Linear* l : {&*ex.params.proj_ar, &*ex.params.proj_ma, &*ex.params.fuse}) {
      set_values(l->bias, std::vector<double>(l->bias.size(), 0.0));
    }
    const Tensor x = random_tensor({2, 4, 2}, rng), y = random_tensor({2, 4, 2}, rng);
    const double a = rng.normal(), b = rng.normal();
    const Tensor combo = add(scale(x, a), scale(y, b));
    const Tensor lhs = varma_features(combo, ex.params, ex.config);
    const Tensor rhs =
        add(scale(varma_features(x, ex.params, ex.config), a), scale(varma_features(y, ex.params, ex.config), b));
    CHECK(max_abs_diff(lhs.data(), rhs.data()) <= 1e-12);
  }
}

TEST_CASE("extractor gradients pass the finite-difference check") {
  Rng rng(26);
  Extractor ex(2, 2, 3, 6, 9);
  const Tensor x = random_tensor({2, 4, 3}, rng);
  const Tensor w = random_tensor({2, 4, 6}, rng);
  std::vector<Tensor> leaves;
  for (const Parameter& p : ex.registry.all()) leaves.push_back(p.tensor);
  const auto loss = [&] { return sum_all(mul(varma_features(x, ex.params, ex.config), w)); };
  CHECK(check_gradients(loss, leaves, 1e-5).worst_relative < kGradientTolerance);
}
