#include "varmaformer/baselines.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace varmaformer::oracle {

Tensor PersistenceForecaster::predict(std::span<const SeriesWindow* const> batch, bool, Rng&) const {
  if (batch.empty()) throw std::invalid_argument("persistence: empty batch");
  std::vector<double> values;
  std::size_t rows = 0;
  for (const SeriesWindow* w : batch) {
    for (std::size_t c = 0; c < w->channels(); ++c) values.insert(values.end(), horizon_, w->lookback(c, w->lookback_length() - 1));
    rows += w->channels();
  }
  return Tensor::from({rows, horizon_}, std::move(values));
}

void LinearForecaster::fit(std::span<const SeriesWindow> windows) {
  if (windows.empty()) throw std::invalid_argument("linear baseline: no training windows");
  if (!maps_.empty()) throw std::logic_error("linear baseline: already fitted");
  const std::size_t channels = windows.front().channels();
  const auto n = static_cast<Eigen::Index>(windows.size());
  const auto in = static_cast<Eigen::Index>(lookback_ + 1);
  const auto out = static_cast<Eigen::Index>(horizon_);
  for (std::size_t c = 0; c < channels; ++c) {
    Eigen::MatrixXd design(n, in);
    Eigen::MatrixXd target(n, out);
    for (Eigen::Index i = 0; i < n; ++i) {
      const SeriesWindow& w = windows[static_cast<std::size_t>(i)];
      if (w.lookback_length() != lookback_ || w.horizon() != horizon_ || w.channels() != channels) {
        throw std::invalid_argument("linear baseline: window shape mismatch");
      }
      for (Eigen::Index t = 0; t < in - 1; ++t) design(i, t) = w.lookback(c, static_cast<std::size_t>(t));
      design(i, in - 1) = 1.0;
      for (Eigen::Index t = 0; t < out; ++t) target(i, t) = w.target(c, static_cast<std::size_t>(t));
    }
    const Eigen::MatrixXd solution = design.completeOrthogonalDecomposition().solve(target);
    std::vector<double> coeffs(static_cast<std::size_t>(in * out));
    for (Eigen::Index r = 0; r < in; ++r) {
      for (Eigen::Index k = 0; k < out; ++k) coeffs[static_cast<std::size_t>(r * out + k)] = solution(r, k);
    }
    maps_.push_back(registry_.add("linear.channel." + std::to_string(c),
                                  Tensor::from({lookback_ + 1, horizon_}, std::move(coeffs)), false));
  }
}

Tensor LinearForecaster::predict(std::span<const SeriesWindow* const> batch, bool, Rng&) const {
  if (maps_.empty()) throw std::logic_error("linear baseline: predict before fit");
  if (batch.empty()) throw std::invalid_argument("linear baseline: empty batch");
  std::vector<double> values;
  std::size_t rows = 0;
  for (const SeriesWindow* w : batch) {
    if (w->channels() != maps_.size()) throw std::invalid_argument("linear baseline: channel count mismatch");
    for (std::size_t c = 0; c < w->channels(); ++c) {
      const auto coeffs = maps_[c].data();
      for (std::size_t k = 0; k < horizon_; ++k) {
        double s = coeffs[lookback_ * horizon_ + k];
        for (std::size_t t = 0; t < lookback_; ++t) s += w->lookback(c, t) * coeffs[t * horizon_ + k];
        values.push_back(s);
      }
    }
    rows += w->channels();
  }
  return Tensor::from({rows, horizon_}, std::move(values));
}

}  // namespace varmaformer::oracle
