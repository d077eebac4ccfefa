#pragma once

#include "varmaformer/data.hpp"
#include "varmaformer/rng.hpp"
#include "varmaformer/tensor.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

namespace testing {

using namespace varmaformer;

inline Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = false, double scale = 1.0) {
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = scale * rng.normal();
  return Tensor::from(shape, std::move(v), requires_grad);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0, double offset = 0.0) {
  Matrix m(rows, cols);
  for (double& x : m.values) x = offset + scale * rng.normal();
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline SeriesWindow window_from(Matrix lookback, Matrix target) {
  SeriesWindow w;
  NormalizedWindow stats = normalize_window(lookback);
  w.lookback = std::move(lookback);
  w.target = std::move(target);
  w.mu = std::move(stats.mu);
  w.sigma = std::move(stats.sigma);
  return w;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("varmaformer_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::trunc) << text;
}

}  // namespace testing
