#pragma once

// Cross-attention-only forecaster with VARMA-style patch features and
// key-conditioned query gating.
//
// Per series row (one channel of one window):
//   E  = W_P(x_p) + alpha * Z_varma + PE          keys = values = E
//   Q  = Linear(Q_dummy)
//   per layer:  G = sigmoid(gate(mean_N(E)));  Q' = beta * (Q . G) + (1 - beta) * Q
//               A = MHA(Q', E, E), masked per query while training
//               X = LN(Q' + A);  Q = LN(X + FFN(X))
//   forecast = Flatten(head(Q)) de-normalized with the window statistics

#include "varmaformer/data.hpp"
#include "varmaformer/forecaster.hpp"
#include "varmaformer/parameter.hpp"
#include "varmaformer/vfe.hpp"

#include <optional>
#include <vector>

namespace varmaformer {

struct ModelConfig {
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  std::size_t patch_length = 24;
  std::size_t d_model = 128;
  std::size_t n_layers = 3;
  std::size_t n_heads = 4;
  std::size_t ffn_width = 256;
  std::size_t p = 2;
  std::size_t q = 2;
  double alpha = 0.3;
  bool alpha_trainable = false;
  double beta = 0.3;
  double mask_rate = 0.25;
  bool ve_atten = true;

  std::size_t patch_count() const { return (lookback + patch_length - 1) / patch_length; }
  std::size_t query_count() const { return horizon / patch_length; }
  VfeConfig vfe() const { return {p, q, patch_length, d_model}; }
  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

struct DecoderLayerParameters {
  std::optional<Linear> gate_in;   // D -> D, present when ve_atten
  std::optional<Linear> gate_out;  // D -> D
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  Tensor norm1_gain;
  Tensor norm1_bias;
  Linear ffn_in;
  Linear ffn_out;
  Tensor norm2_gain;
  Tensor norm2_bias;
};

struct BackboneParameters {
  Linear patch_embed;   // P -> D
  Tensor positional;    // [N, D]
  Tensor query_dummy;   // [M, D]
  Linear query_embed;   // D -> D
  Tensor alpha;         // [1], only when alpha is trainable
  std::vector<DecoderLayerParameters> layers;
  Linear head;          // D -> P
};

struct LayerOptions {
  std::size_t n_heads = 1;
  double beta = 0.0;
  bool ve_atten = true;
  double mask_rate = 0.0;
  bool training = false;
  Rng* mask_rng = nullptr;  // required when training with mask_rate > 0
};

// Attention probabilities of the last cross_attention call, [R * H, M, N].
struct AttentionTrace {
  Tensor weights;
};

// E = W_P(patches) + alpha * Z + PE; `z_varma` may be undefined (extractor off).
Tensor embed(const Tensor& patches, const Tensor& z_varma, const BackboneParameters& params, double alpha);
// Same, with a learnable [1] alpha tensor.
Tensor embed(const Tensor& patches, const Tensor& z_varma, const BackboneParameters& params, const Tensor& alpha);

// sigmoid(gate_out(gelu(gate_in(mean over N of keys)))): [R, N, D] -> [R, D]
Tensor temporal_gate(const Tensor& keys, const DecoderLayerParameters& layer);
// beta * (Q . G) + (1 - beta) * Q with G broadcast over the M queries.
Tensor gate_queries(const Tensor& queries, const Tensor& gate, double beta);

// Multi-head scaled dot-product attention of [R, M, D] queries over [R, N, D] keys/values.
Tensor cross_attention(const Tensor& queries, const Tensor& keys_values, const DecoderLayerParameters& layer,
                       std::size_t n_heads, AttentionTrace* trace = nullptr);
// Pre-residual output with whole query rows zeroed at probability `rate`.
Tensor mask_queries(const Tensor& attention_out, double rate, Rng& rng);
Tensor feed_forward(const Tensor& x, const DecoderLayerParameters& layer);
Tensor decoder_layer(const Tensor& queries, const Tensor& keys_values, const DecoderLayerParameters& layer,
                     const LayerOptions& options, AttentionTrace* trace = nullptr);

struct ForwardOptions {
  bool training = false;
  Rng* mask_rng = nullptr;
};

class VarmaFormer final : public Forecaster {
 public:
  VarmaFormer(ModelConfig config, std::uint64_t seed);
  VarmaFormer(const VarmaFormer&) = delete;
  VarmaFormer& operator=(const VarmaFormer&) = delete;

  const ModelConfig& config() const { return config_; }
  const VfeParameters& vfe_parameters() const { return vfe_; }
  const BackboneParameters& backbone_parameters() const { return backbone_; }

  // Normalized patches [R, N, P] -> normalized forecast [R, T].
  Tensor forward(const Tensor& patches, const ForwardOptions& options = {}) const;

  // Evaluation-mode forecast of one window, de-normalized: C x T.
  Matrix forecast(const SeriesWindow& window) const;
  Matrix forecast(const Matrix& lookback) const;

  std::size_t lookback() const override { return config_.lookback; }
  std::size_t horizon() const override { return config_.horizon; }
  Tensor predict(std::span<const SeriesWindow* const> batch, bool training, Rng& rng) const override;
  ParameterRegistry& parameters() override { return registry_; }
  const ParameterRegistry& parameters() const override { return registry_; }

 private:
  ModelConfig config_;
  ParameterRegistry registry_;
  VfeParameters vfe_;
  BackboneParameters backbone_;
};

// The gate-free, extractor-free cross-attention baseline evaluated with a
// model's own weights: E = W_P(x) + PE, plain decoder layers, same head.
Tensor plain_cross_attention_forward(const VarmaFormer& model, const Tensor& patches);

// Normalized lookbacks of a batch patched into one [sum of channels, N, P] tensor.
Tensor batch_patches(std::span<const SeriesWindow* const> batch, std::size_t patch_length);

}  // namespace varmaformer
