#include "varmaformer/verify.hpp"

#include "varmaformer/data.hpp"
#include "varmaformer/model.hpp"
#include "varmaformer/oracle.hpp"
#include "varmaformer/rng.hpp"
#include "varmaformer/vfe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace varmaformer {

namespace {

constexpr std::size_t kMaxMessages = 8;

Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad, double scale = 1.0) {
  std::vector<double> values(element_count(shape));
  for (double& v : values) v = scale * rng.normal();
  return Tensor::from(shape, std::move(values), requires_grad);
}

Shape random_shape(Rng& rng, std::size_t rank) {
  Shape s(rank);
  for (auto& d : s) d = 1 + rng.below(4);
  return s;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale, double offset) {
  Matrix m(rows, cols);
  for (double& v : m.values) v = offset + scale * rng.normal();
  return m;
}

SeriesWindow window_from(Matrix lookback, Matrix target) {
  SeriesWindow w;
  NormalizedWindow stats = normalize_window(lookback);
  w.lookback = std::move(lookback);
  w.target = std::move(target);
  w.mu = std::move(stats.mu);
  w.sigma = std::move(stats.sigma);
  return w;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::string describe(const ModelConfig& c) {
  std::ostringstream os;
  os << "L=" << c.lookback << " T=" << c.horizon << " P=" << c.patch_length << " D=" << c.d_model
     << " layers=" << c.n_layers << " heads=" << c.n_heads << " p=" << c.p << " q=" << c.q
     << " ve_atten=" << c.ve_atten << " alpha_trainable=" << c.alpha_trainable;
  return os.str();
}

ModelConfig tiny_gradient_config() {
  ModelConfig c;
  c.lookback = 8;
  c.horizon = 4;
  c.patch_length = 2;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 1;
  c.ffn_width = 16;
  return c;
}

ModelConfig random_tiny_config(Rng& rng) {
  ModelConfig c;
  c.patch_length = 1 + rng.below(4);
  c.lookback = std::max<std::size_t>(2, c.patch_length + rng.below(3 * c.patch_length + 1));
  c.horizon = c.patch_length * (1 + rng.below(3));
  c.n_heads = 1 + rng.below(2);
  c.d_model = 2 * c.n_heads * (1 + rng.below(3));
  c.n_layers = 1 + rng.below(2);
  c.ffn_width = 1 + rng.below(12);
  c.p = rng.below(4);
  c.q = rng.below(4);
  c.alpha = rng.uniform();
  c.alpha_trainable = rng.below(2) == 1;
  c.beta = rng.uniform();
  c.ve_atten = rng.below(4) != 0;
  c.mask_rate = 0.5 * rng.uniform();
  return c;
}

void perturb_parameters(ParameterRegistry& registry, Rng& rng, double scale) {
  for (Parameter& p : registry.all()) {
    for (double& v : p.tensor.mutable_data()) v = scale * rng.normal();
  }
}

Tensor patches_of(const Matrix& lookback, std::size_t patch_length) {
  const NormalizedWindow n = normalize_window(lookback);
  PatchSequence ps = patchify(n.values, patch_length);
  return Tensor::from({ps.channels, ps.count, ps.patch_length}, std::move(ps.patches));
}

}  // namespace

void SuiteResult::record(bool ok, double error, const std::string& what) {
  ++checks;
  if (std::isnan(error)) error = INFINITY;
  worst = std::max(worst, error);
  if (!ok) {
    ++failures;
    if (messages.size() < kMaxMessages) messages.push_back(what);
  }
}

GradientCheck check_gradients(const std::function<Tensor()>& loss, const std::vector<Tensor>& leaves, double h,
                              bool corrupt) {
  for (Tensor leaf : leaves) leaf.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
  if (corrupt && !analytic.empty() && !analytic.front().empty()) {
    analytic.front().front() += 0.1 + std::abs(analytic.front().front());
  }

  NoGradGuard no_grad;
  GradientCheck result;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor leaf = leaves[k];
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss().item();
      values[i] = saved - h;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradientFloor});
      result.worst_relative = std::max(result.worst_relative, std::isnan(rel) ? INFINITY : rel);
      ++result.entries;
    }
  }
  return result;
}

SuiteResult verify_op_gradients(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "op-gradients";
  Rng rng(options.seed);
  const double h = 1e-5;

  struct OpCase {
    std::vector<Tensor> leaves;
    std::function<Tensor()> op;
  };
  using Builder = std::function<OpCase(Rng&)>;
  const std::vector<std::pair<std::string, Builder>> cases = {
      {"add-broadcast",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor({2, 3, 4}, r, true), b = random_tensor({3, 1}, r, true);
         return {{a, b}, [=] { return add(a, b); }};
       }},
      {"sub-broadcast",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor({3, 1, 2}, r, true), b = random_tensor({4, 2}, r, true);
         return {{a, b}, [=] { return sub(a, b); }};
       }},
      {"mul-broadcast",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor({2, 3, 4}, r, true), b = random_tensor({1, 3, 4}, r, true);
         return {{a, b}, [=] { return mul(a, b); }};
       }},
      {"scale",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor(random_shape(r, 2), r, true);
         return {{a}, [=] { return scale(a, -1.7); }};
       }},
      {"matmul",
       [](Rng& r) -> OpCase {
         const std::size_t k = 1 + r.below(4);
         Tensor a = random_tensor({2, 1 + r.below(3), k}, r, true), w = random_tensor({k, 1 + r.below(4)}, r, true);
         return {{a, w}, [=] { return matmul(a, w); }};
       }},
      {"bmm",
       [](Rng& r) -> OpCase {
         const Shape s = random_shape(r, 4);
         Tensor a = random_tensor({s[0], s[1], s[2]}, r, true), b = random_tensor({s[0], s[2], s[3]}, r, true);
         return {{a, b}, [=] { return bmm(a, b); }};
       }},
      {"bmm-transposed",
       [](Rng& r) -> OpCase {
         const Shape s = random_shape(r, 4);
         Tensor a = random_tensor({s[0], s[1], s[2]}, r, true), b = random_tensor({s[0], s[3], s[2]}, r, true);
         return {{a, b}, [=] { return bmm(a, b, true); }};
       }},
      {"concat",
       [](Rng& r) -> OpCase {
         const std::size_t axis = r.below(3);
         Shape sa = random_shape(r, 3);
         Shape sb = sa;
         sb[axis] = 1 + r.below(3);
         Tensor a = random_tensor(sa, r, true), b = random_tensor(sb, r, true);
         return {{a, b}, [=] { return concat({a, b}, axis); }};
       }},
      {"slice",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor({3, 5, 2}, r, true);
         return {{a}, [=] { return slice(a, 1, 1, 4); }};
       }},
      {"reshape-permute",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor({2, 3, 4}, r, true);
         return {{a}, [=] { return permute(reshape(a, {6, 2, 2}), {2, 0, 1}); }};
       }},
      {"mean",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor(random_shape(r, 3), r, true);
         const std::size_t axis = r.below(3);
         return {{a}, [=] { return mean(a, axis); }};
       }},
      {"sigmoid",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor(random_shape(r, 2), r, true, 2.0);
         return {{a}, [=] { return sigmoid(a); }};
       }},
      {"gelu",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor(random_shape(r, 2), r, true, 2.0);
         return {{a}, [=] { return gelu(a); }};
       }},
      {"softmax",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor(random_shape(r, 3), r, true, 2.0);
         return {{a}, [=] { return softmax(a); }};
       }},
      {"layer-norm",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor({2, 3, 2 + r.below(4)}, r, true);
         return {{a}, [=] { return layer_norm(a); }};
       }},
      {"mean-all",
       [](Rng& r) -> OpCase {
         Tensor a = random_tensor(random_shape(r, 3), r, true);
         return {{a}, [=] { return mean_all(mul(a, a)); }};
       }},
  };

  for (std::size_t trial = 0; trial < 4; ++trial) {
    for (const auto& [name, build] : cases) {
      const OpCase c = build(rng);
      Tensor weights;
      {
        NoGradGuard no_grad;
        weights = random_tensor(c.op().shape(), rng, false);
      }
      const auto loss = [&] { return sum_all(mul(c.op(), weights)); };
      const GradientCheck g = check_gradients(loss, c.leaves, h, options.corrupt_gradient);
      suite.record(g.worst_relative < kGradientTolerance, g.worst_relative,
                   name + ": relative error " + std::to_string(g.worst_relative));
    }
  }
  return suite;
}

SuiteResult verify_model_gradients(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "model-gradients";
  const ModelConfig base = tiny_gradient_config();
  for (std::size_t s = 0; s < options.gradient_seeds; ++s) {
    const std::uint64_t seed = options.seed + s;
    Rng rng(seed ^ 0x5eedULL);
    ModelConfig cfg = base;
    cfg.alpha_trainable = s % 2 == 1;
    VarmaFormer model(cfg, seed);
    std::vector<SeriesWindow> windows;
    for (std::size_t b = 0; b < 3; ++b) {
      windows.push_back(window_from(random_matrix(2, cfg.lookback, rng, 1.0 + rng.uniform(), rng.normal()),
                                    random_matrix(2, cfg.horizon, rng, 1.0, 0.0)));
    }
    std::vector<const SeriesWindow*> batch;
    for (const SeriesWindow& w : windows) batch.push_back(&w);
    const auto loss = [&] {
      Rng mask(seed + 7);  // same query mask on every evaluation
      const Tensor diff = sub(model.predict(batch, true, mask), stack_targets(batch));
      return mean_all(mul(diff, diff));
    };
    std::vector<Tensor> leaves;
    for (const Parameter& p : model.parameters().all()) leaves.push_back(p.tensor);
    const GradientCheck g = check_gradients(loss, leaves, 1e-5, options.corrupt_gradient);
    suite.record(g.worst_relative < kGradientTolerance, g.worst_relative,
                 "seed " + std::to_string(seed) + ": relative error " + std::to_string(g.worst_relative) + " over " +
                     std::to_string(g.entries) + " entries");
  }
  return suite;
}

SuiteResult verify_oracle(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "oracle";
  Rng rng(options.seed + 101);
  for (std::size_t i = 0; i < options.oracle_configs; ++i) {
    const ModelConfig cfg = random_tiny_config(rng);
    const std::size_t channels = 1 + rng.below(3);
    VarmaFormer model(cfg, rng.next_u64());
    perturb_parameters(model.parameters(), rng, 0.5);
    const Matrix lookback = random_matrix(channels, cfg.lookback, rng, 0.5 + 2.0 * rng.uniform(), 3.0 * rng.normal());
    const Matrix fast = model.forecast(lookback);
    const Matrix slow = oracle::reference_forward(lookback, cfg, model.parameters().snapshot());
    const double d = max_abs_diff(fast.values, slow.values);
    suite.record(d <= 1e-8, d, describe(cfg) + ": |d| = " + std::to_string(d));
  }

  // All-zero weights forecast the window mean in both paths.
  {
    ModelConfig cfg = random_tiny_config(rng);
    VarmaFormer model(cfg, 1);
    perturb_parameters(model.parameters(), rng, 0.0);
    const Matrix lookback = random_matrix(2, cfg.lookback, rng, 1.0, 5.0);
    const NormalizedWindow stats = normalize_window(lookback);
    Matrix expected(2, cfg.horizon);
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t t = 0; t < cfg.horizon; ++t) expected(c, t) = stats.mu[c];
    }
    const double d_fast = max_abs_diff(model.forecast(lookback).values, expected.values);
    const double d_slow =
        max_abs_diff(oracle::reference_forward(lookback, cfg, model.parameters().snapshot()).values, expected.values);
    suite.record(d_fast <= 1e-12, d_fast, "zero weights: tensor path misses the mean by " + std::to_string(d_fast));
    suite.record(d_slow <= 1e-12, d_slow, "zero weights: reference misses the mean by " + std::to_string(d_slow));
  }
  return suite;
}

SuiteResult verify_shapes(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "shapes";
  Rng rng(options.seed + 202);
  for (std::size_t lookback : {8, 13, 96}) {
    for (std::size_t plen : {1, 4, 8}) {
      for (std::size_t queries : {1, 3}) {
        ModelConfig cfg;
        cfg.lookback = lookback;
        cfg.patch_length = plen;
        cfg.horizon = plen * queries;
        cfg.d_model = 8;
        cfg.n_heads = 2;
        cfg.n_layers = 2;
        cfg.ffn_width = 8;
        VarmaFormer model(cfg, rng.next_u64());
        for (std::size_t channels : {1, 3}) {
          for (std::size_t batch_size : {1, 2}) {
            std::vector<SeriesWindow> windows;
            for (std::size_t b = 0; b < batch_size; ++b) {
              windows.push_back(window_from(random_matrix(channels, lookback, rng, 1.0, 0.0),
                                            random_matrix(channels, cfg.horizon, rng, 1.0, 0.0)));
            }
            std::vector<const SeriesWindow*> batch;
            for (const SeriesWindow& w : windows) batch.push_back(&w);
            const std::string where = describe(cfg) + " C=" + std::to_string(channels) +
                                      " B=" + std::to_string(batch_size);
            const std::size_t rows = channels * batch_size;
            const Tensor patches = batch_patches(batch, plen);
            const Shape expect_patches{rows, cfg.patch_count(), plen};
            suite.record(patches.shape() == expect_patches, 0.0, where + ": patches " + to_string(patches.shape()));
            Rng mask(1);
            const Tensor out = model.predict(batch, true, mask);
            const Shape expect_out{rows, cfg.horizon};
            suite.record(out.shape() == expect_out, 0.0, where + ": forecast " + to_string(out.shape()));
            const Tensor z = varma_features(patches, model.vfe_parameters(), cfg.vfe());
            const Shape expect_z{rows, cfg.patch_count(), cfg.d_model};
            suite.record(z.shape() == expect_z, 0.0, where + ": features " + to_string(z.shape()));
            const Matrix single = model.forecast(windows.front());
            suite.record(single.rows == channels && single.cols == cfg.horizon, 0.0, where + ": single forecast");
          }
        }
      }
    }
  }
  // Window counts on a synthetic dataset.
  for (std::size_t length : {50, 97, 200}) {
    Dataset ds;
    ds.values = random_matrix(length, 2, rng, 1.0, 0.0);
    for (std::size_t lookback : {8, 24}) {
      for (std::size_t horizon : {4, 24}) {
        if (length < lookback + horizon) continue;
        const auto windows = make_windows(ds, {0, length}, lookback, horizon);
        suite.record(windows.size() == length - lookback - horizon + 1, 0.0,
                     "window count for length " + std::to_string(length));
      }
    }
  }
  return suite;
}

SuiteResult verify_round_trips(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "round-trips";
  Rng rng(options.seed + 303);
  for (std::size_t trial = 0; trial < 200; ++trial) {
    const std::size_t channels = 1 + rng.below(4);
    const std::size_t length = 2 + rng.below(200);
    const double spread = std::pow(10.0, rng.uniform(-3.0, 3.0));
    Matrix raw = random_matrix(channels, length, rng, spread, rng.uniform(-100.0, 100.0));
    if (trial % 10 == 0) {
      for (std::size_t t = 0; t < length; ++t) raw(0, t) = 4.25;  // constant channel hits the sigma floor
    }
    const NormalizedWindow n = normalize_window(raw);
    const Matrix back = denormalize(n.values, n.mu, n.sigma);
    const double d = max_abs_diff(back.values, raw.values);
    suite.record(d <= 1e-6, d, "normalize round trip off by " + std::to_string(d));
  }
  for (std::size_t length = 1; length <= 256; ++length) {
    const Matrix series = random_matrix(1, length, rng, 1.0, 0.0);
    for (std::size_t plen = 1; plen <= length; ++plen) {
      const PatchSequence ps = patchify(series, plen);
      const std::size_t count = (length + plen - 1) / plen;
      bool ok = ps.count == count && ps.padded_tail == count * plen - length;
      for (std::size_t j = plen - ps.padded_tail; ok && j < plen; ++j) {
        ok = ps(0, count - 1, j) == series(0, length - 1);
      }
      const Matrix back = unpatchify(ps, length);
      ok = ok && back.values == series.values;
      suite.record(ok, ok ? 0.0 : 1.0,
                   "patchify round trip L=" + std::to_string(length) + " P=" + std::to_string(plen));
    }
  }
  return suite;
}

SuiteResult verify_reduction(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "reduction";
  Rng rng(options.seed + 606);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    ModelConfig cfg = random_tiny_config(rng);
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
    cfg.mask_rate = 0.0;
    cfg.p = 0;
    cfg.q = 0;
    cfg.alpha_trainable = false;
    VarmaFormer model(cfg, rng.next_u64());
    const Tensor patches = patches_of(random_matrix(2, cfg.lookback, rng, 1.0, 0.0), cfg.patch_length);
    NoGradGuard no_grad;
    const double d = max_abs_diff(model.forward(patches).data(), plain_cross_attention_forward(model, patches).data());
    suite.record(d == 0.0, d, "reduction to plain cross-attention: |d| = " + std::to_string(d));
  }
  return suite;
}

SuiteResult verify_identities(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "identities";
  Rng rng(options.seed + 404);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng.below(4), m = 1 + rng.below(4), d = 2 + rng.below(8);
    const Tensor q = random_tensor({rows, m, d}, rng, false, 3.0);
    Tensor gate = random_tensor({rows, d}, rng, false);
    const Tensor g = sigmoid(gate);
    const double d0 = max_abs_diff(gate_queries(q, g, 0.0).data(), q.data());
    suite.record(d0 == 0.0, d0, "beta = 0 changed the queries by " + std::to_string(d0));
    const double d1 = max_abs_diff(gate_queries(q, Tensor::full({rows, d}, 1.0), rng.uniform()).data(), q.data());
    suite.record(d1 == 0.0, d1, "G = 1 changed the queries by " + std::to_string(d1));
  }
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const ModelConfig cfg = random_tiny_config(rng);
    VarmaFormer model(cfg, rng.next_u64());
    perturb_parameters(model.parameters(), rng, 3.0);
    const Tensor patches = patches_of(random_matrix(2, cfg.lookback, rng, 1.0, 0.0), cfg.patch_length);
    const Tensor queries = random_tensor({2, cfg.query_count(), cfg.d_model}, rng, false, 5.0);
    const Tensor keys = random_tensor({2, cfg.patch_count(), cfg.d_model}, rng, false, 5.0);
    AttentionTrace trace;
    NoGradGuard no_grad;
    cross_attention(queries, keys, model.backbone_parameters().layers.front(), cfg.n_heads, &trace);
    const std::size_t n = trace.weights.dim(2);
    const auto w = trace.weights.data();
    double worst = 0.0;
    for (std::size_t row = 0; row < w.size() / n; ++row) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += w[row * n + j];
      worst = std::max(worst, std::abs(total - 1.0));
    }
    suite.record(worst <= 1e-12, worst, "attention rows sum to 1 within " + std::to_string(worst));
  }
  return suite;
}

SuiteResult verify_causality(const VerifyOptions& options) {
  SuiteResult suite;
  suite.name = "causality";
  Rng rng(options.seed + 505);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const ModelConfig cfg = random_tiny_config(rng);
    VarmaFormer model(cfg, rng.next_u64());
    perturb_parameters(model.parameters(), rng, 0.7);
    const std::size_t channels = 3;
    const Matrix lookback = random_matrix(channels, cfg.lookback, rng, 1.0, 0.0);

    // Horizon causality: the future segment never reaches the forecast.
    {
      const SeriesWindow a = window_from(lookback, random_matrix(channels, cfg.horizon, rng, 1.0, 0.0));
      const SeriesWindow b = window_from(lookback, random_matrix(channels, cfg.horizon, rng, 50.0, 9.0));
      const SeriesWindow* pa[] = {&a};
      const SeriesWindow* pb[] = {&b};
      NoGradGuard no_grad;
      Rng r1(3), r2(3);
      const double d = max_abs_diff(model.predict(pa, false, r1).data(), model.predict(pb, false, r2).data());
      suite.record(d == 0.0, d, "target values leaked into the forecast: |d| = " + std::to_string(d));
    }

    // Channel independence: perturbing one channel leaves the others untouched.
    {
      const Matrix base = model.forecast(lookback);
      const std::size_t victim = rng.below(channels);
      Matrix changed = lookback;
      for (std::size_t t = 0; t < cfg.lookback; ++t) changed(victim, t) += 10.0 * rng.normal();
      const Matrix after = model.forecast(changed);
      double d = 0.0;
      for (std::size_t c = 0; c < channels; ++c) {
        if (c == victim) continue;
        d = std::max(d, max_abs_diff(base.row(c), after.row(c)));
      }
      suite.record(d == 0.0, d, "channel " + std::to_string(victim) + " leaked: |d| = " + std::to_string(d));
    }

    // Extractor causality: Z at patch t ignores patches t, t+1, ...
    if (cfg.vfe().enabled()) {
      NoGradGuard no_grad;
      const Tensor patches = patches_of(lookback, cfg.patch_length);
      const Tensor z = varma_features(patches, model.vfe_parameters(), cfg.vfe());
      const std::size_t count = cfg.patch_count();
      const std::size_t width = cfg.d_model;
      for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> values(patches.data().begin(), patches.data().end());
        for (std::size_t r = 0; r < channels; ++r) {
          for (std::size_t j = 0; j < cfg.patch_length; ++j) values[(r * count + s) * cfg.patch_length + j] += 5.0;
        }
        const Tensor moved = varma_features(Tensor::from(patches.shape(), std::move(values)), model.vfe_parameters(),
                                            cfg.vfe());
        double d = 0.0;
        for (std::size_t r = 0; r < channels; ++r) {
          for (std::size_t t = 0; t <= s; ++t) {
            const std::size_t at = (r * count + t) * width;
            d = std::max(d, max_abs_diff(z.data().subspan(at, width), moved.data().subspan(at, width)));
          }
        }
        suite.record(d == 0.0, d, "patch " + std::to_string(s) + " reached earlier features: |d| = " +
                                      std::to_string(d));
      }
    }
  }
  return suite;
}

std::vector<SuiteResult> run_verify(const VerifyOptions& options) {
  return {verify_op_gradients(options), verify_model_gradients(options), verify_oracle(options),
          verify_shapes(options),       verify_round_trips(options),     verify_reduction(options), verify_identities(options),
          verify_causality(options)};
}

void write_verify_csv(const std::vector<SuiteResult>& suites, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kVerifySchemaLine << '\n' << "suite,checks,failures,worst,status\n";
  for (const SuiteResult& s : suites) {
    out << s.name << ',' << s.checks << ',' << s.failures << ',' << std::setprecision(6) << s.worst << ','
        << (s.passed() ? "pass" : "fail") << '\n';
  }
}

}  // namespace varmaformer
