#pragma once

// Dataset ingestion, chronological splits, windowing, instance
// normalization and patching.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace varmaformer {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

struct Dataset {
  std::string name;
  Matrix values;  // time-major: length() x channels()
  std::vector<std::string> channel_names;
  std::vector<std::int64_t> timestamps;  // seconds since epoch, strictly increasing
  std::string frequency;                 // informational, e.g. "1h"

  std::size_t length() const { return values.rows; }
  std::size_t channels() const { return values.cols; }
};

// Parses "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" or the ISO-8601 'T' form.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t seconds);

// Header row required; first column is the timestamp. Rejects non-numeric or
// empty cells, duplicate / decreasing timestamps and irregular spacing (gaps).
// When `expected_channels` is non-empty the header must match it exactly.
Dataset ingest_csv(const std::filesystem::path& path,
                   std::span<const std::string> expected_channels = {},
                   std::ostream* log = nullptr);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

enum class SplitPolicy {
  Auto,       // EttHourly / EttMinute by dataset name, Ratio otherwise
  EttHourly,  // 12 / 4 / 4 months of 30 days, hourly rows
  EttMinute,  // same calendar at 15-minute rows
  Ratio,      // 0.7 / 0.1 / 0.2 chronological
};

SplitPolicy parse_split_policy(const std::string& text);
std::string to_string(SplitPolicy policy);

struct SplitRanges {
  IndexRange train;
  IndexRange validation;
  IndexRange test;
};

// Contiguous, non-overlapping ranges. Throws DataError when any split cannot
// host one (lookback, horizon) window (validation/test may borrow `lookback`
// rows of context from the preceding split, see with_context()).
SplitRanges split(const Dataset& dataset, SplitPolicy policy, std::size_t lookback,
                  std::size_t horizon);

// Extends a range backwards by `lookback` rows so its first target can start at range.begin.
IndexRange with_context(IndexRange range, std::size_t lookback);

// Per-channel z-scoring with statistics fitted on one range (the training split).
struct StandardScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static StandardScaler fit(const Dataset& dataset, IndexRange range);
  Dataset transform(const Dataset& dataset) const;
  double inverse(std::size_t channel, double value) const {
    return value * scale[channel] + mean[channel];
  }
};

inline constexpr double kSigmaFloor = 1e-5;

struct NormalizedWindow {
  Matrix values;  // C x L
  std::vector<double> mu;
  std::vector<double> sigma;
};

// Per channel: population mean / standard deviation, sigma floored at kSigmaFloor.
NormalizedWindow normalize_window(const Matrix& raw);
Matrix denormalize(const Matrix& pred, std::span<const double> mu, std::span<const double> sigma);

struct SeriesWindow {
  Matrix lookback;  // C x L, dataset scale
  Matrix target;    // C x T, dataset scale
  std::vector<double> mu;
  std::vector<double> sigma;
  std::size_t origin = 0;  // dataset row of lookback(:, 0)

  std::size_t channels() const { return lookback.rows; }
  std::size_t lookback_length() const { return lookback.cols; }
  std::size_t horizon() const { return target.cols; }
};

// Stride-1 windows fully inside `range`: range.size() - L - T + 1 of them.
std::vector<SeriesWindow> make_windows(const Dataset& dataset, IndexRange range, std::size_t lookback,
                                       std::size_t horizon);

struct PatchSequence {
  std::vector<double> patches;  // C x N x P, row-major
  std::size_t channels = 0;
  std::size_t count = 0;         // N
  std::size_t patch_length = 0;  // P
  std::size_t padded_tail = 0;   // replicated values appended to the last patch

  double operator()(std::size_t c, std::size_t n, std::size_t j) const {
    return patches[(c * count + n) * patch_length + j];
  }
};

// N = ceil(L / P) non-overlapping patches; the tail is filled with the last value.
PatchSequence patchify(const Matrix& normalized, std::size_t patch_length);
Matrix unpatchify(const PatchSequence& patches, std::size_t length);

}  // namespace varmaformer
