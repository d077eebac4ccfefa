#pragma once

// Patch-level autoregressive / moving-average feature extraction.
//
// Patches are laid out [R, N, P] where R is any number of independent series
// (batch x channel); parameters are shared across rows and positions.

#include "varmaformer/parameter.hpp"
#include "varmaformer/tensor.hpp"

#include <optional>
#include <vector>

namespace varmaformer {

struct VfeConfig {
  std::size_t p = 2;  // AR order, 0 disables the AR half
  std::size_t q = 2;  // MA order, 0 disables the MA half
  std::size_t patch_length = 24;
  std::size_t d_model = 128;

  bool enabled() const { return p > 0 || q > 0; }
  void validate() const;
};

struct VfeParameters {
  std::vector<Tensor> phi;    // p scalars, shape [1]
  std::vector<Tensor> theta;  // q scalars, shape [1]
  std::optional<Linear> proj_ar;  // p*P -> D/2
  std::optional<Linear> proj_ma;  // q*P -> D/2
  std::optional<Linear> fuse;     // D -> D
};

// Registers under "vfe.": phi.i = 1/p, theta.j = 1/q, fan-in uniform projections.
// Nothing is registered for a disabled branch; nothing at all when p = q = 0.
VfeParameters make_vfe_parameters(ParameterRegistry& registry, const VfeConfig& config, Rng& rng);

// Patch `lag` positions back; positions before the window start read zeros.
Tensor lagged_patches(const Tensor& patches, std::size_t lag);
// eps[t] = x[t] - x[t-1], with eps[0] = 0.
Tensor innovation_proxy(const Tensor& patches);

// [R, N, P] -> [R, N, D/2]
Tensor ar_features(const Tensor& patches, const VfeParameters& params);
Tensor ma_features(const Tensor& patches, const VfeParameters& params);
// Concat(z_ar, z_ma) W_fuse + b_fuse -> [R, N, D]
Tensor fuse(const Tensor& z_ar, const Tensor& z_ma, const VfeParameters& params);

// Full extractor; a disabled branch contributes a zero half. Requires config.enabled().
Tensor varma_features(const Tensor& patches, const VfeParameters& params, const VfeConfig& config);

}  // namespace varmaformer
