#pragma once

#include "varmaformer/forecaster.hpp"

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace varmaformer {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;  // stop after this many epochs without a validation improvement
  double learning_rate = 1e-3;
  double lr_decay = 0.5;     // applied on every non-improving epoch
  double weight_decay = 0.0;
  std::uint64_t seed = 2024;

  void validate() const;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

class Adam {
 public:
  Adam(ParameterRegistry& registry, AdamOptions options);

  // One bias-corrected update of every trainable parameter from its current gradient.
  void step();
  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::size_t steps() const { return steps_; }

 private:
  ParameterRegistry& registry_;
  AdamOptions options_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double train_mae = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
  double learning_rate = 0.0;
  double wall_time_s = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
};

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n_samples = 0;  // windows
};

// Mini-batch Adam on MSE with validation-based early stopping; the best
// validation parameters are restored before returning.
TrainHistory train(Forecaster& model, std::span<const SeriesWindow> train_windows,
                   std::span<const SeriesWindow> val_windows, const TrainConfig& config,
                   std::ostream* log = nullptr);

// Mean squared / absolute error over windows, channels and steps. Never mutates the model.
Metrics evaluate(const Forecaster& model, std::span<const SeriesWindow> windows, std::size_t batch_size = 256);

}  // namespace varmaformer
