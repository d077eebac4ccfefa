#pragma once

#include "varmaformer/data.hpp"
#include "varmaformer/parameter.hpp"
#include "varmaformer/rng.hpp"
#include "varmaformer/tensor.hpp"

#include <span>

namespace varmaformer {

// Anything the trainer can fit and the evaluator can score.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  virtual std::size_t lookback() const = 0;
  virtual std::size_t horizon() const = 0;

  // Forecasts for a batch of windows, one row per (window, channel) in that
  // order, shape [sum of channels, T], on the windows' dataset scale. Builds a
  // graph when `training` is set and gradients are enabled.
  virtual Tensor predict(std::span<const SeriesWindow* const> batch, bool training, Rng& rng) const = 0;

  virtual ParameterRegistry& parameters() = 0;
  virtual const ParameterRegistry& parameters() const = 0;
};

// Row-stacked targets matching Forecaster::predict, shape [sum of channels, T].
Tensor stack_targets(std::span<const SeriesWindow* const> batch);

}  // namespace varmaformer
