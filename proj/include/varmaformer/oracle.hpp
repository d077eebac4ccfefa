#pragma once

// Independent references used to check the main build: synthetic process
// generators and a plain nested-loop re-implementation of the forecaster
// that shares no code with the tensor engine.

#include "varmaformer/data.hpp"
#include "varmaformer/model.hpp"
#include "varmaformer/parameter.hpp"

#include <string>
#include <vector>

namespace varmaformer::oracle {

enum class SyntheticKind { Ar, Varma, SinePlusNoise };

SyntheticKind parse_synthetic_kind(const std::string& text);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Ar;
  std::vector<double> ar;  // phi*_1..phi*_p
  std::vector<double> ma;  // theta*_1..theta*_q (Varma only)
  double noise_std = 0.1;
  std::size_t length = 10000;
  std::size_t channels = 1;
  std::uint64_t seed = 0;
  double initial = 0.0;  // value of every pre-sample lag
  double period = 24.0;  // SinePlusNoise
  double amplitude = 1.0;
  std::size_t burn_in = 200;
  std::string name = "synthetic";
};

// Largest |eigenvalue| of the AR companion matrix; 0 for an empty polynomial.
double companion_spectral_radius(const std::vector<double>& ar);

// Each channel is an independent realisation with the same coefficients and
// Gaussian(0, noise_std) innovations drawn from Rng(seed). The first `burn_in`
// steps are discarded; emitted row k is process step burn_in + k. Hourly
// timestamps from 2016-07-01 00:00:00. Throws std::invalid_argument when the
// AR part is not stationary (spectral radius >= 1).
//   Ar / Varma    : x_t = sum phi_i x_{t-i} + e_t + sum theta_j e_{t-j}
//   SinePlusNoise : x_t = amplitude * sin(2 pi t / period + 2 pi c / channels) + e_t
Dataset generate(const SyntheticSpec& spec);

inline constexpr std::size_t kReferenceCeiling = 4096;  // max C * N * D

// Evaluation-mode forecast (C x T, de-normalized) of `lookback` (C x L) using
// only nested scalar loops over the parameter snapshot.
Matrix reference_forward(const Matrix& lookback, const ModelConfig& config, const ParameterSnapshot& params);

}  // namespace varmaformer::oracle
