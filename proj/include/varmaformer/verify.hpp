#pragma once

// Self-check suites behind `varmaformer verify`: finite-difference gradient
// checks, agreement with the scalar-loop reference, shape and round-trip grids,
// and the exact algebraic / causality identities of the forecaster.

#include "varmaformer/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace varmaformer {

struct SuiteResult {
  std::string name;
  std::size_t checks = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest observed error measure of the suite
  std::vector<std::string> messages;  // first few failures

  bool passed() const { return failures == 0 && checks > 0; }
  void record(bool ok, double error, const std::string& what);
};

struct VerifyOptions {
  std::uint64_t seed = 2024;
  std::size_t gradient_seeds = 10;
  std::size_t oracle_configs = 24;
  // Negative control: perturbs one analytic gradient entry per check.
  bool corrupt_gradient = false;
};

struct GradientCheck {
  std::size_t entries = 0;
  double worst_relative = 0.0;  // |a - n| / max(|a|, |n|, kGradientFloor)
};

inline constexpr double kGradientTolerance = 1e-3;
inline constexpr double kGradientFloor = 1e-6;

// Compares the analytic gradient of `loss` with respect to every entry of
// `leaves` against central differences with step h. `loss` must be a pure
// function of the leaf values.
GradientCheck check_gradients(const std::function<Tensor()>& loss, const std::vector<Tensor>& leaves, double h,
                              bool corrupt = false);

SuiteResult verify_op_gradients(const VerifyOptions& options);
// End-to-end on C=2, L=8, T=4, P=2, D=8, one layer, masking on.
SuiteResult verify_model_gradients(const VerifyOptions& options);
// Tensor forecast vs oracle::reference_forward over random tiny configs, |d| <= 1e-8.
SuiteResult verify_oracle(const VerifyOptions& options);
SuiteResult verify_shapes(const VerifyOptions& options);
// denormalize(normalize) and unpatchify(patchify) for every 1 <= P <= L <= 256.
SuiteResult verify_round_trips(const VerifyOptions& options);
// alpha = beta = mask_rate = p = q = 0 reproduces plain cross-attention bit for bit.
SuiteResult verify_reduction(const VerifyOptions& options);
// Gate identities (beta = 0, G = 1) and attention rows summing to one.
SuiteResult verify_identities(const VerifyOptions& options);
// Horizon causality, extractor causality, channel independence.
SuiteResult verify_causality(const VerifyOptions& options);

std::vector<SuiteResult> run_verify(const VerifyOptions& options);

inline constexpr const char* kVerifySchemaLine = "# varmaformer-verify v1";
void write_verify_csv(const std::vector<SuiteResult>& suites, const std::filesystem::path& path);

}  // namespace varmaformer
