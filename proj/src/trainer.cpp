#include "varmaformer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace varmaformer {

namespace {

struct ErrorSums {
  double squared = 0.0;
  double absolute = 0.0;
  std::size_t count = 0;

  void add(std::span<const double> pred, std::span<const double> target) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - target[i];
      squared += d * d;
      absolute += std::abs(d);
    }
    count += pred.size();
  }
};

std::vector<const SeriesWindow*> gather(std::span<const SeriesWindow> windows, std::span<const std::size_t> order,
                                        std::size_t begin, std::size_t end) {
  std::vector<const SeriesWindow*> batch;
  batch.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) batch.push_back(&windows[order[i]]);
  return batch;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  if (max_epochs == 0) throw std::invalid_argument("max_epochs must be at least 1");
  if (patience > max_epochs) throw std::invalid_argument("patience must not exceed max_epochs");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr_decay must lie in (0, 1]");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
}

Adam::Adam(ParameterRegistry& registry, AdamOptions options) : registry_(registry), options_(options) {
  for (const Parameter& p : registry_.all()) {
    first_.emplace_back(p.tensor.size(), 0.0);
    second_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double correction1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  auto& params = registry_.all();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    if (!p.trainable) continue;
    auto values = p.tensor.mutable_data();
    const auto grad = p.tensor.grad();
    auto& m = first_[k];
    auto& v = second_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i] + options_.weight_decay * values[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

Metrics evaluate(const Forecaster& model, std::span<const SeriesWindow> windows, std::size_t batch_size) {
  if (windows.empty()) throw std::invalid_argument("evaluate: empty window set");
  if (batch_size == 0) batch_size = 1;
  NoGradGuard no_grad;
  Rng unused(0);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  ErrorSums sums;
  for (std::size_t begin = 0; begin < windows.size(); begin += batch_size) {
    const auto batch = gather(windows, order, begin, std::min(windows.size(), begin + batch_size));
    const Tensor pred = model.predict(batch, false, unused);
    const Tensor target = stack_targets(batch);
    if (pred.shape() != target.shape()) {
      throw ShapeError("evaluate: forecast " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
    }
    sums.add(pred.data(), target.data());
  }
  const double n = static_cast<double>(sums.count);
  return {sums.squared / n, sums.absolute / n, windows.size()};
}

TrainHistory train(Forecaster& model, std::span<const SeriesWindow> train_windows,
                   std::span<const SeriesWindow> val_windows, const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (train_windows.empty()) throw std::invalid_argument("train: empty training split");
  if (val_windows.empty()) throw std::invalid_argument("train: empty validation split");

  using Clock = std::chrono::steady_clock;
  Rng rng(config.seed);
  ParameterRegistry& registry = model.parameters();
  Adam optimizer(registry, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});

  TrainHistory history;
  history.best_val_mse = std::numeric_limits<double>::infinity();
  ParameterSnapshot best = registry.snapshot();
  std::size_t stale = 0;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = Clock::now();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    ErrorSums sums;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const auto batch = gather(train_windows, order, begin, std::min(order.size(), begin + config.batch_size));
      registry.zero_grad();
      const Tensor pred = model.predict(batch, true, rng);
      const Tensor target = stack_targets(batch);
      const Tensor diff = sub(pred, target);
      const Tensor loss = mean_all(mul(diff, diff));
      if (!std::isfinite(loss.item())) {
        throw TrainingDiverged(epoch, "training diverged: non-finite loss in epoch " + std::to_string(epoch));
      }
      if (loss.requires_grad()) {
        loss.backward();
        optimizer.step();
      }
      sums.add(pred.data(), target.data());
    }

    const Metrics val = evaluate(model, val_windows);
    if (!std::isfinite(val.mse)) {
      throw TrainingDiverged(epoch, "training diverged: non-finite validation loss in epoch " + std::to_string(epoch));
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_mse = sums.squared / static_cast<double>(sums.count);
    record.train_mae = sums.absolute / static_cast<double>(sums.count);
    record.val_mse = val.mse;
    record.val_mae = val.mae;
    record.learning_rate = optimizer.learning_rate();
    record.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    history.epochs.push_back(record);

    if (val.mse < history.best_val_mse) {
      history.best_val_mse = val.mse;
      history.best_epoch = epoch;
      best = registry.snapshot();
      stale = 0;
    } else {
      ++stale;
      optimizer.set_learning_rate(optimizer.learning_rate() * config.lr_decay);
    }
    if (log) {
      *log << "epoch " << epoch << "  train_mse " << std::setprecision(6) << record.train_mse << "  val_mse "
           << record.val_mse << "  lr " << record.learning_rate << "  (" << std::setprecision(3)
           << record.wall_time_s << "s)\n";
    }
    if (stale >= config.patience) break;
  }

  registry.load(best);
  return history;
}

}  // namespace varmaformer
