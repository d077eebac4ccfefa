#include "varmaformer/vfe.hpp"

#include <stdexcept>
#include <string>

namespace varmaformer {

namespace {

void require_patches(const Tensor& patches, const char* op) {
  if (patches.rank() != 3) {
    throw ShapeError(std::string(op) + ": patches must be [R, N, P], got " + to_string(patches.shape()));
  }
}

Tensor scaled_lags(const std::vector<Tensor>& weights, const Tensor& source) {
  std::vector<Tensor> parts;
  parts.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) parts.push_back(mul(lagged_patches(source, i + 1), weights[i]));
  return parts.size() == 1 ? parts.front() : concat(parts, 2);
}

}  // namespace

void VfeConfig::validate() const {
  if (d_model == 0 || d_model % 2 != 0) {
    throw std::invalid_argument("d_model must be even and positive, got " + std::to_string(d_model));
  }
  if (patch_length == 0) throw std::invalid_argument("patch length must be positive");
}

VfeParameters make_vfe_parameters(ParameterRegistry& registry, const VfeConfig& config, Rng& rng) {
  config.validate();
  VfeParameters params;
  if (!config.enabled()) return params;
  const std::size_t half = config.d_model / 2;
  for (std::size_t i = 1; i <= config.p; ++i) {
    params.phi.push_back(registry.add("vfe.phi." + std::to_string(i),
                                      Tensor::scalar(1.0 / static_cast<double>(config.p))));
  }
  for (std::size_t j = 1; j <= config.q; ++j) {
    params.theta.push_back(registry.add("vfe.theta." + std::to_string(j),
                                        Tensor::scalar(1.0 / static_cast<double>(config.q))));
  }
  if (config.p > 0) params.proj_ar = make_linear(registry, "vfe.proj_ar", config.p * config.patch_length, half, rng);
  if (config.q > 0) params.proj_ma = make_linear(registry, "vfe.proj_ma", config.q * config.patch_length, half, rng);
  params.fuse = make_linear(registry, "vfe.fuse", config.d_model, config.d_model, rng);
  return params;
}

Tensor lagged_patches(const Tensor& patches, std::size_t lag) {
  require_patches(patches, "lagged_patches");
  const std::size_t rows = patches.dim(0);
  const std::size_t count = patches.dim(1);
  const std::size_t width = patches.dim(2);
  if (lag == 0) return patches;
  if (lag >= count) return Tensor::zeros({rows, count, width});
  return concat({Tensor::zeros({rows, lag, width}), slice(patches, 1, 0, count - lag)}, 1);
}

Tensor innovation_proxy(const Tensor& patches) {
  require_patches(patches, "innovation_proxy");
  const std::size_t rows = patches.dim(0);
  const std::size_t count = patches.dim(1);
  const std::size_t width = patches.dim(2);
  if (count < 2) return Tensor::zeros({rows, count, width});
  Tensor diff = sub(slice(patches, 1, 1, count), slice(patches, 1, 0, count - 1));
  return concat({Tensor::zeros({rows, 1, width}), diff}, 1);
}

Tensor ar_features(const Tensor& patches, const VfeParameters& params) {
  require_patches(patches, "ar_features");
  if (params.phi.empty() || !params.proj_ar) throw std::logic_error("ar_features: AR branch is disabled");
  return (*params.proj_ar)(scaled_lags(params.phi, patches));
}

Tensor ma_features(const Tensor& patches, const VfeParameters& params) {
  require_patches(patches, "ma_features");
  if (params.theta.empty() || !params.proj_ma) throw std::logic_error("ma_features: MA branch is disabled");
  return (*params.proj_ma)(scaled_lags(params.theta, innovation_proxy(patches)));
}

Tensor fuse(const Tensor& z_ar, const Tensor& z_ma, const VfeParameters& params) {
  if (z_ar.rank() != 3 || z_ma.rank() != 3 || z_ar.dim(0) != z_ma.dim(0) || z_ar.dim(1) != z_ma.dim(1)) {
    throw ShapeError("fuse: mismatched halves " + to_string(z_ar.shape()) + " and " + to_string(z_ma.shape()));
  }
  if (!params.fuse) throw std::logic_error("fuse: extractor is disabled");
  return (*params.fuse)(concat({z_ar, z_ma}, 2));
}

Tensor varma_features(const Tensor& patches, const VfeParameters& params, const VfeConfig& config) {
  require_patches(patches, "varma_features");
  if (!config.enabled()) throw std::logic_error("varma_features: both branches are disabled");
  const Shape half{patches.dim(0), patches.dim(1), config.d_model / 2};
  Tensor z_ar = config.p > 0 ? ar_features(patches, params) : Tensor::zeros(half);
  Tensor z_ma = config.q > 0 ? ma_features(patches, params) : Tensor::zeros(half);
  return fuse(z_ar, z_ma, params);
}

}  // namespace varmaformer
