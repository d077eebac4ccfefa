#pragma once

#include "varmaformer/forecaster.hpp"

#include <vector>

namespace varmaformer::oracle {

// Repeats the last observed value of each channel across the horizon.
class PersistenceForecaster final : public Forecaster {
 public:
  PersistenceForecaster(std::size_t lookback, std::size_t horizon) : lookback_(lookback), horizon_(horizon) {}

  std::size_t lookback() const override { return lookback_; }
  std::size_t horizon() const override { return horizon_; }
  Tensor predict(std::span<const SeriesWindow* const> batch, bool training, Rng& rng) const override;
  ParameterRegistry& parameters() override { return registry_; }
  const ParameterRegistry& parameters() const override { return registry_; }

 private:
  std::size_t lookback_;
  std::size_t horizon_;
  ParameterRegistry registry_;
};

// Per-channel least-squares map from the raw lookback (plus intercept) to the
// horizon, fitted in closed form. Coefficients live in the registry as
// non-trainable "linear.channel.<c>" tensors of shape [L + 1, T].
class LinearForecaster final : public Forecaster {
 public:
  LinearForecaster(std::size_t lookback, std::size_t horizon) : lookback_(lookback), horizon_(horizon) {}

  void fit(std::span<const SeriesWindow> windows);

  std::size_t lookback() const override { return lookback_; }
  std::size_t horizon() const override { return horizon_; }
  Tensor predict(std::span<const SeriesWindow* const> batch, bool training, Rng& rng) const override;
  ParameterRegistry& parameters() override { return registry_; }
  const ParameterRegistry& parameters() const override { return registry_; }

 private:
  std::size_t lookback_;
  std::size_t horizon_;
  ParameterRegistry registry_;
  std::vector<Tensor> maps_;
};

}  // namespace varmaformer::oracle
