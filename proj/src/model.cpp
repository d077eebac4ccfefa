#include "varmaformer/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace varmaformer {

namespace {

Tensor affine_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  return add(mul(layer_norm(x), gain), bias);
}

Tensor ones(std::size_t n) { return Tensor::full({n}, 1.0); }

// [R, S, D] -> [R * H, S, D / H]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t rows = x.dim(0);
  const std::size_t seq = x.dim(1);
  const std::size_t width = x.dim(2) / heads;
  if (heads == 1) return x;
  Tensor t = permute(reshape(x, {rows, seq, heads, width}), {0, 2, 1, 3});
  return reshape(t, {rows * heads, seq, width});
}

// [R * H, S, D / H] -> [R, S, D]
Tensor merge_heads(const Tensor& x, std::size_t heads) {
  if (heads == 1) return x;
  const std::size_t rows = x.dim(0) / heads;
  const std::size_t seq = x.dim(1);
  const std::size_t width = x.dim(2);
  Tensor t = permute(reshape(x, {rows, heads, seq, width}), {0, 2, 1, 3});
  return reshape(t, {rows, seq, heads * width});
}

Tensor broadcast_rows(const Tensor& x, std::size_t rows) {
  Shape lifted{1};
  lifted.insert(lifted.end(), x.shape().begin(), x.shape().end());
  Shape zero_shape(lifted.size(), 1);
  zero_shape[0] = rows;
  return add(Tensor::zeros(zero_shape), reshape(x, lifted));
}

DecoderLayerParameters make_layer(ParameterRegistry& registry, const ModelConfig& cfg, std::size_t index,
                                  Rng& rng) {
  const std::string prefix = "decoder." + std::to_string(index) + ".";
  const std::size_t d = cfg.d_model;
  DecoderLayerParameters layer;
  if (cfg.ve_atten) {
    layer.gate_in = make_linear(registry, prefix + "gate_in", d, d, rng);
    layer.gate_out = make_linear(registry, prefix + "gate_out", d, d, rng);
  }
  layer.query = make_linear(registry, prefix + "attn.query", d, d, rng);
  layer.key = make_linear(registry, prefix + "attn.key", d, d, rng);
  layer.value = make_linear(registry, prefix + "attn.value", d, d, rng);
  layer.output = make_linear(registry, prefix + "attn.output", d, d, rng);
  layer.norm1_gain = registry.add(prefix + "norm1.gain", ones(d));
  layer.norm1_bias = registry.add(prefix + "norm1.bias", Tensor::zeros({d}));
  layer.ffn_in = make_linear(registry, prefix + "ffn.in", d, cfg.ffn_width, rng);
  layer.ffn_out = make_linear(registry, prefix + "ffn.out", cfg.ffn_width, d, rng);
  layer.norm2_gain = registry.add(prefix + "norm2.gain", ones(d));
  layer.norm2_bias = registry.add(prefix + "norm2.bias", Tensor::zeros({d}));
  return layer;
}

Tensor initial_queries(const BackboneParameters& params, std::size_t rows) {
  return broadcast_rows(params.query_embed(params.query_dummy), rows);
}

Tensor project_head(const BackboneParameters& params, const Tensor& queries) {
  Tensor patches = params.head(queries);  // [R, M, P]
  return reshape(patches, {patches.dim(0), patches.dim(1) * patches.dim(2)});
}

void require_patch_input(const Tensor& patches, const ModelConfig& cfg) {
  if (patches.rank() != 3 || patches.dim(1) != cfg.patch_count() || patches.dim(2) != cfg.patch_length) {
    throw ShapeError("model expects patches [R, " + std::to_string(cfg.patch_count()) + ", " +
                     std::to_string(cfg.patch_length) + "], got " + to_string(patches.shape()));
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (lookback < 2) fail("lookback must be at least 2");
  if (patch_length == 0) fail("patch_length must be positive");
  if (patch_length > lookback) fail("patch_length " + std::to_string(patch_length) + " exceeds lookback " + std::to_string(lookback));
  if (horizon == 0 || horizon % patch_length != 0) {
    fail("horizon " + std::to_string(horizon) + " is not divisible by patch_length " + std::to_string(patch_length));
  }
  if (d_model == 0 || d_model % 2 != 0) fail("d_model must be even and positive, got " + std::to_string(d_model));
  if (n_heads == 0 || d_model % n_heads != 0) {
    fail("d_model " + std::to_string(d_model) + " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (n_layers == 0) fail("n_layers must be positive");
  if (ffn_width == 0) fail("ffn_width must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0, 1]");
  if (!(mask_rate >= 0.0 && mask_rate < 1.0)) fail("mask_rate must lie in [0, 1)");
}

Tensor embed(const Tensor& patches, const Tensor& z_varma, const BackboneParameters& params, double alpha) {
  Tensor e = params.patch_embed(patches);
  if (z_varma.defined()) {
    if (z_varma.shape() != e.shape()) {
      throw ShapeError("embed: Z_varma " + to_string(z_varma.shape()) + " vs embedding " + to_string(e.shape()));
    }
    e = add(e, scale(z_varma, alpha));
  }
  if (params.positional.dim(0) != e.dim(1)) {
    throw ShapeError("embed: " + std::to_string(e.dim(1)) + " patches but " +
                     std::to_string(params.positional.dim(0)) + " positional encodings");
  }
  return add(e, params.positional);
}

Tensor embed(const Tensor& patches, const Tensor& z_varma, const BackboneParameters& params, const Tensor& alpha) {
  Tensor e = params.patch_embed(patches);
  if (z_varma.defined()) {
    if (z_varma.shape() != e.shape()) {
      throw ShapeError("embed: Z_varma " + to_string(z_varma.shape()) + " vs embedding " + to_string(e.shape()));
    }
    e = add(e, mul(z_varma, alpha));
  }
  return add(e, params.positional);
}

Tensor temporal_gate(const Tensor& keys, const DecoderLayerParameters& layer) {
  if (keys.rank() != 3) throw ShapeError("temporal_gate: keys must be [R, N, D], got " + to_string(keys.shape()));
  if (!layer.gate_in || !layer.gate_out) throw std::logic_error("temporal_gate: layer has no gate network");
  Tensor context = mean(keys, 1);
  return sigmoid((*layer.gate_out)(gelu((*layer.gate_in)(context))));
}

Tensor gate_queries(const Tensor& queries, const Tensor& gate, double beta) {
  if (queries.rank() != 3 || gate.rank() != 2 || gate.dim(0) != queries.dim(0) || gate.dim(1) != queries.dim(2)) {
    throw ShapeError("gate_queries: queries " + to_string(queries.shape()) + " vs gate " + to_string(gate.shape()));
  }
  Tensor g = reshape(gate, {gate.dim(0), 1, gate.dim(1)});
  // Q + beta * (Q . G - Q): same value, and exactly Q when beta = 0 or G = 1.
  return add(queries, scale(sub(mul(queries, g), queries), beta));
}

Tensor cross_attention(const Tensor& queries, const Tensor& keys_values, const DecoderLayerParameters& layer,
                       std::size_t n_heads, AttentionTrace* trace) {
  if (queries.rank() != 3 || keys_values.rank() != 3 || queries.dim(0) != keys_values.dim(0) ||
      queries.dim(2) != keys_values.dim(2) || queries.dim(2) % n_heads != 0) {
    throw ShapeError("cross_attention: queries " + to_string(queries.shape()) + " vs keys " +
                     to_string(keys_values.shape()) + " with " + std::to_string(n_heads) + " heads");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(queries.dim(2) / n_heads));
  Tensor q = split_heads(layer.query(queries), n_heads);
  Tensor k = split_heads(layer.key(keys_values), n_heads);
  Tensor v = split_heads(layer.value(keys_values), n_heads);
  Tensor weights = softmax(scale(bmm(q, k, true), inv_sqrt));
  if (trace) trace->weights = weights;
  return layer.output(merge_heads(bmm(weights, v), n_heads));
}

Tensor mask_queries(const Tensor& attention_out, double rate, Rng& rng) {
  const std::size_t rows = attention_out.dim(0);
  const std::size_t queries = attention_out.dim(1);
  std::vector<double> keep(rows * queries);
  for (double& k : keep) k = rng.uniform() < rate ? 0.0 : 1.0;
  return mul(attention_out, Tensor::from({rows, queries, 1}, std::move(keep)));
}

Tensor feed_forward(const Tensor& x, const DecoderLayerParameters& layer) {
  return layer.ffn_out(gelu(layer.ffn_in(x)));
}

Tensor decoder_layer(const Tensor& queries, const Tensor& keys_values, const DecoderLayerParameters& layer,
                     const LayerOptions& options, AttentionTrace* trace) {
  const Tensor gated =
      options.ve_atten ? gate_queries(queries, temporal_gate(keys_values, layer), options.beta) : queries;
  Tensor attended = cross_attention(gated, keys_values, layer, options.n_heads, trace);
  if (options.training && options.mask_rate > 0.0) {
    if (!options.mask_rng) throw std::logic_error("decoder_layer: masking needs a random generator");
    attended = mask_queries(attended, options.mask_rate, *options.mask_rng);
  }
  Tensor x = affine_norm(add(gated, attended), layer.norm1_gain, layer.norm1_bias);
  return affine_norm(add(x, feed_forward(x, layer)), layer.norm2_gain, layer.norm2_bias);
}

VarmaFormer::VarmaFormer(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  vfe_ = make_vfe_parameters(registry_, config_.vfe(), rng);
  backbone_.patch_embed = make_linear(registry_, "embed.patch", config_.patch_length, d, rng);
  backbone_.positional = make_uniform(registry_, "embed.positional", {config_.patch_count(), d}, 0.02, rng);
  if (config_.alpha_trainable) backbone_.alpha = registry_.add("embed.alpha", Tensor::scalar(config_.alpha));
  backbone_.query_dummy = make_uniform(registry_, "query.dummy", {config_.query_count(), d}, 1.0, rng);
  backbone_.query_embed = make_linear(registry_, "query.embed", d, d, rng);
  for (std::size_t l = 0; l < config_.n_layers; ++l) backbone_.layers.push_back(make_layer(registry_, config_, l, rng));
  backbone_.head = make_linear(registry_, "head", d, config_.patch_length, rng);
}

Tensor VarmaFormer::forward(const Tensor& patches, const ForwardOptions& options) const {
  require_patch_input(patches, config_);
  Tensor z;
  if (config_.vfe().enabled()) z = varma_features(patches, vfe_, config_.vfe());
  const Tensor keys_values = config_.alpha_trainable ? embed(patches, z, backbone_, backbone_.alpha)
                                                     : embed(patches, z, backbone_, config_.alpha);
  LayerOptions layer_options{config_.n_heads, config_.beta, config_.ve_atten, config_.mask_rate, options.training,
                             options.mask_rng};
  Tensor queries = initial_queries(backbone_, patches.dim(0));
  for (const DecoderLayerParameters& layer : backbone_.layers) {
    queries = decoder_layer(queries, keys_values, layer, layer_options);
  }
  return project_head(backbone_, queries);
}

Matrix VarmaFormer::forecast(const Matrix& lookback) const {
  if (lookback.cols != config_.lookback) {
    throw std::invalid_argument("window has lookback " + std::to_string(lookback.cols) + ", model expects " +
                                std::to_string(config_.lookback));
  }
  NoGradGuard no_grad;
  const NormalizedWindow normalized = normalize_window(lookback);
  PatchSequence ps = patchify(normalized.values, config_.patch_length);
  Tensor patches = Tensor::from({ps.channels, ps.count, ps.patch_length}, std::move(ps.patches));
  const Tensor out = forward(patches);
  Matrix pred(lookback.rows, config_.horizon);
  std::copy(out.data().begin(), out.data().end(), pred.values.begin());
  return denormalize(pred, normalized.mu, normalized.sigma);
}

Matrix VarmaFormer::forecast(const SeriesWindow& window) const {
  if (window.horizon() != config_.horizon) {
    throw std::invalid_argument("window has horizon " + std::to_string(window.horizon()) + ", model expects " +
                                std::to_string(config_.horizon));
  }
  return forecast(window.lookback);
}

Tensor batch_patches(std::span<const SeriesWindow* const> batch, std::size_t patch_length) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t length = batch.front()->lookback_length();
  const std::size_t count = (length + patch_length - 1) / patch_length;
  std::size_t rows = 0;
  for (const SeriesWindow* w : batch) rows += w->channels();
  std::vector<double> values;
  values.reserve(rows * count * patch_length);
  for (const SeriesWindow* w : batch) {
    Matrix normalized(w->channels(), length);
    for (std::size_t c = 0; c < w->channels(); ++c) {
      for (std::size_t t = 0; t < length; ++t) normalized(c, t) = (w->lookback(c, t) - w->mu[c]) / w->sigma[c];
    }
    const PatchSequence ps = patchify(normalized, patch_length);
    values.insert(values.end(), ps.patches.begin(), ps.patches.end());
  }
  return Tensor::from({rows, count, patch_length}, std::move(values));
}

Tensor VarmaFormer::predict(std::span<const SeriesWindow* const> batch, bool training, Rng& rng) const {
  std::size_t rows = 0;
  for (const SeriesWindow* w : batch) rows += w->channels();
  std::vector<double> mu;
  std::vector<double> sigma;
  mu.reserve(rows);
  sigma.reserve(rows);
  for (const SeriesWindow* w : batch) {
    mu.insert(mu.end(), w->mu.begin(), w->mu.end());
    sigma.insert(sigma.end(), w->sigma.begin(), w->sigma.end());
  }
  const Tensor normalized = forward(batch_patches(batch, config_.patch_length), {training, &rng});
  return add(mul(normalized, Tensor::from({rows, 1}, std::move(sigma))), Tensor::from({rows, 1}, std::move(mu)));
}

Tensor stack_targets(std::span<const SeriesWindow* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t horizon = batch.front()->horizon();
  std::vector<double> values;
  std::size_t rows = 0;
  for (const SeriesWindow* w : batch) {
    values.insert(values.end(), w->target.values.begin(), w->target.values.end());
    rows += w->channels();
  }
  return Tensor::from({rows, horizon}, std::move(values));
}

Tensor plain_cross_attention_forward(const VarmaFormer& model, const Tensor& patches) {
  const ModelConfig& cfg = model.config();
  const BackboneParameters& params = model.backbone_parameters();
  require_patch_input(patches, cfg);
  const Tensor keys_values = add(params.patch_embed(patches), params.positional);
  Tensor queries = initial_queries(params, patches.dim(0));
  for (const DecoderLayerParameters& layer : params.layers) {
    Tensor attended = cross_attention(queries, keys_values, layer, cfg.n_heads);
    Tensor x = affine_norm(add(queries, attended), layer.norm1_gain, layer.norm1_bias);
    queries = affine_norm(add(x, feed_forward(x, layer)), layer.norm2_gain, layer.norm2_bias);
  }
  return project_head(params, queries);
}

}  // namespace varmaformer
