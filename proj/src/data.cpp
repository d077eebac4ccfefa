#include "varmaformer/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace varmaformer {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

std::string describe_frequency(std::int64_t step) {
  if (step % 86400 == 0) return std::to_string(step / 86400) + "d";
  if (step % 3600 == 0) return std::to_string(step / 3600) + "h";
  if (step % 60 == 0) return std::to_string(step / 60) + "min";
  return std::to_string(step) + "s";
}

bool starts_with_ci(const std::string& s, const std::string& prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = ' ';
  int consumed = 0;
  const int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &s, &consumed);
  bool ok = false;
  if (n >= 3) {
    if (n == 3) {
      ok = text.size() == 10;
    } else if (n >= 6 && (sep == ' ' || sep == 'T')) {
      if (n == 6) s = 0;
      ok = true;
    }
  }
  using namespace std::chrono;
  const year_month_day date{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ok || !date.ok() || h > 23 || mi > 59 || s > 60) {
    throw DataError("unparseable timestamp '" + text + "'");
  }
  const auto days = sys_days{date}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t seconds) {
  using namespace std::chrono;
  const auto day_count = static_cast<int>(std::floor(static_cast<double>(seconds) / 86400.0));
  const year_month_day date{sys_days{days{day_count}}};
  const std::int64_t rest = seconds - static_cast<std::int64_t>(day_count) * 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(rest / 3600), static_cast<int>(rest / 60 % 60), static_cast<int>(rest % 60));
  return buf;
}

Dataset ingest_csv(const std::filesystem::path& path, std::span<const std::string> expected_channels,
                   std::ostream* log) {
  std::ifstream in(path);
  if (!in) throw DataError("dataset not found: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file, header row required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  std::vector<std::string> header = split_fields(line);
  if (header.size() < 2) throw DataError(path.string() + ": need a timestamp column and at least one channel");

  Dataset ds;
  ds.name = path.stem().string();
  for (std::size_t c = 1; c < header.size(); ++c) ds.channel_names.push_back(trim(header[c]));
  if (!expected_channels.empty() &&
      !std::equal(ds.channel_names.begin(), ds.channel_names.end(), expected_channels.begin(),
                  expected_channels.end())) {
    throw DataError(path.string() + ": header does not match the expected channel schema");
  }
  const std::size_t channels = ds.channel_names.size();

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != channels + 1) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(channels + 1) + " columns, got " + std::to_string(fields.size()));
    }
    const std::int64_t ts = parse_timestamp(trim(fields[0]));
    if (!ds.timestamps.empty() && ts <= ds.timestamps.back()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate or non-monotone timestamp '" +
                      trim(fields[0]) + "'");
    }
    ds.timestamps.push_back(ts);
    for (std::size_t c = 1; c <= channels; ++c) {
      const std::string cell = trim(fields[c]);
      double v = 0.0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value '" + cell +
                        "' in column '" + header[c] + "'");
      }
      values.push_back(v);
    }
  }
  if (ds.timestamps.empty()) throw DataError(path.string() + ": no data rows");

  if (ds.timestamps.size() >= 2) {
    const std::int64_t step = ds.timestamps[1] - ds.timestamps[0];
    for (std::size_t i = 2; i < ds.timestamps.size(); ++i) {
      if (ds.timestamps[i] - ds.timestamps[i - 1] != step) {
        throw DataError(path.string() + ": gap in timestamps at data row " + std::to_string(i + 1) + " (" +
                        format_timestamp(ds.timestamps[i - 1]) + " -> " + format_timestamp(ds.timestamps[i]) + ")");
      }
    }
    ds.frequency = describe_frequency(step);
  }

  ds.values.rows = ds.timestamps.size();
  ds.values.cols = channels;
  ds.values.values = std::move(values);
  if (log) *log << "ingested " << ds.name << ": " << ds.length() << " rows x " << channels << " channels\n";
  return ds;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "date";
  for (const std::string& name : dataset.channel_names) out << ',' << name;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t t = 0; t < dataset.length(); ++t) {
    out << format_timestamp(dataset.timestamps.at(t));
    for (double v : dataset.values.row(t)) out << ',' << v;
    out << '\n';
  }
}

SplitPolicy parse_split_policy(const std::string& text) {
  if (text == "auto") return SplitPolicy::Auto;
  if (text == "ett-hourly") return SplitPolicy::EttHourly;
  if (text == "ett-minute") return SplitPolicy::EttMinute;
  if (text == "ratio") return SplitPolicy::Ratio;
  throw std::invalid_argument("unknown split policy '" + text + "' (auto|ett-hourly|ett-minute|ratio)");
}

std::string to_string(SplitPolicy policy) {
  switch (policy) {
    case SplitPolicy::Auto: return "auto";
    case SplitPolicy::EttHourly: return "ett-hourly";
    case SplitPolicy::EttMinute: return "ett-minute";
    case SplitPolicy::Ratio: return "ratio";
  }
  return "?";
}

IndexRange with_context(IndexRange range, std::size_t lookback) {
  return {range.begin >= lookback ? range.begin - lookback : 0, range.end};
}

SplitRanges split(const Dataset& dataset, SplitPolicy policy, std::size_t lookback, std::size_t horizon) {
  if (policy == SplitPolicy::Auto) {
    if (starts_with_ci(dataset.name, "ETTh")) {
      policy = SplitPolicy::EttHourly;
    } else if (starts_with_ci(dataset.name, "ETTm")) {
      policy = SplitPolicy::EttMinute;
    } else {
      policy = SplitPolicy::Ratio;
    }
  }
  const std::size_t n = dataset.length();
  SplitRanges r;
  if (policy == SplitPolicy::Ratio) {
    const auto train = static_cast<std::size_t>(static_cast<double>(n) * 0.7);
    const auto test = static_cast<std::size_t>(static_cast<double>(n) * 0.2);
    r.train = {0, train};
    r.validation = {train, n - test};
    r.test = {n - test, n};
  } else {
    const std::size_t month = 30 * 24 * (policy == SplitPolicy::EttMinute ? 4 : 1);
    if (n < 20 * month) {
      throw DataError("dataset too short for the " + to_string(policy) + " split: " + std::to_string(n) +
                      " rows, need " + std::to_string(20 * month));
    }
    r.train = {0, 12 * month};
    r.validation = {12 * month, 16 * month};
    r.test = {16 * month, 20 * month};
  }
  const std::size_t window = lookback + horizon;
  if (r.train.size() < window || with_context(r.validation, lookback).size() < window ||
      with_context(r.test, lookback).size() < window) {
    throw DataError("dataset too short: " + std::to_string(n) + " rows cannot host a " + std::to_string(lookback) +
                    "+" + std::to_string(horizon) + " window in every split");
  }
  return r;
}

StandardScaler StandardScaler::fit(const Dataset& dataset, IndexRange range) {
  if (range.size() == 0 || range.end > dataset.length()) throw DataError("scaler: invalid fit range");
  StandardScaler s;
  const std::size_t channels = dataset.channels();
  s.mean.assign(channels, 0.0);
  s.scale.assign(channels, 0.0);
  const double n = static_cast<double>(range.size());
  for (std::size_t t = range.begin; t < range.end; ++t) {
    for (std::size_t c = 0; c < channels; ++c) s.mean[c] += dataset.values(t, c);
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t t = range.begin; t < range.end; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = dataset.values(t, c) - s.mean[c];
      s.scale[c] += d * d;
    }
  }
  for (double& v : s.scale) v = std::max(std::sqrt(v / n), kSigmaFloor);
  return s;
}

Dataset StandardScaler::transform(const Dataset& dataset) const {
  Dataset out = dataset;
  for (std::size_t t = 0; t < out.length(); ++t) {
    for (std::size_t c = 0; c < out.channels(); ++c) {
      out.values(t, c) = (out.values(t, c) - mean[c]) / scale[c];
    }
  }
  return out;
}

NormalizedWindow normalize_window(const Matrix& raw) {
  if (raw.cols < 2) throw DataError("normalize_window: need at least 2 time steps, got " + std::to_string(raw.cols));
  NormalizedWindow w{Matrix(raw.rows, raw.cols), std::vector<double>(raw.rows), std::vector<double>(raw.rows)};
  const double n = static_cast<double>(raw.cols);
  for (std::size_t c = 0; c < raw.rows; ++c) {
    const auto row = raw.row(c);
    double m = 0.0;
    for (double v : row) m += v;
    m /= n;
    double var = 0.0;
    for (double v : row) var += (v - m) * (v - m);
    const double sigma = std::max(std::sqrt(var / n), kSigmaFloor);
    w.mu[c] = m;
    w.sigma[c] = sigma;
    auto dst = w.values.row(c);
    for (std::size_t t = 0; t < raw.cols; ++t) dst[t] = (row[t] - m) / sigma;
  }
  return w;
}

Matrix denormalize(const Matrix& pred, std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != pred.rows || sigma.size() != pred.rows) {
    throw DataError("denormalize: " + std::to_string(pred.rows) + " channels but " + std::to_string(mu.size()) +
                    " means and " + std::to_string(sigma.size()) + " scales");
  }
  Matrix out(pred.rows, pred.cols);
  for (std::size_t c = 0; c < pred.rows; ++c) {
    for (std::size_t t = 0; t < pred.cols; ++t) out(c, t) = pred(c, t) * sigma[c] + mu[c];
  }
  return out;
}

std::vector<SeriesWindow> make_windows(const Dataset& dataset, IndexRange range, std::size_t lookback,
                                       std::size_t horizon) {
  if (range.end > dataset.length() || range.size() < lookback + horizon) {
    throw DataError("make_windows: range [" + std::to_string(range.begin) + "," + std::to_string(range.end) +
                    ") cannot host a " + std::to_string(lookback) + "+" + std::to_string(horizon) + " window");
  }
  const std::size_t channels = dataset.channels();
  const std::size_t count = range.size() - lookback - horizon + 1;
  std::vector<SeriesWindow> windows;
  windows.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t origin = range.begin + k;
    SeriesWindow w;
    w.origin = origin;
    w.lookback = Matrix(channels, lookback);
    w.target = Matrix(channels, horizon);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = 0; t < lookback; ++t) w.lookback(c, t) = dataset.values(origin + t, c);
      for (std::size_t t = 0; t < horizon; ++t) w.target(c, t) = dataset.values(origin + lookback + t, c);
    }
    NormalizedWindow stats = normalize_window(w.lookback);
    w.mu = std::move(stats.mu);
    w.sigma = std::move(stats.sigma);
    windows.push_back(std::move(w));
  }
  return windows;
}

PatchSequence patchify(const Matrix& normalized, std::size_t patch_length) {
  if (patch_length == 0) throw DataError("patchify: patch length must be positive");
  if (normalized.cols == 0) throw DataError("patchify: empty series");
  PatchSequence ps;
  ps.channels = normalized.rows;
  ps.patch_length = patch_length;
  ps.count = (normalized.cols + patch_length - 1) / patch_length;
  ps.padded_tail = ps.count * patch_length - normalized.cols;
  ps.patches.resize(ps.channels * ps.count * patch_length);
  for (std::size_t c = 0; c < ps.channels; ++c) {
    const auto row = normalized.row(c);
    double* dst = ps.patches.data() + c * ps.count * patch_length;
    std::copy(row.begin(), row.end(), dst);
    std::fill(dst + row.size(), dst + ps.count * patch_length, row.back());
  }
  return ps;
}

Matrix unpatchify(const PatchSequence& ps, std::size_t length) {
  if (length > ps.count * ps.patch_length) throw DataError("unpatchify: length exceeds patch coverage");
  Matrix out(ps.channels, length);
  for (std::size_t c = 0; c < ps.channels; ++c) {
    const double* src = ps.patches.data() + c * ps.count * ps.patch_length;
    std::copy(src, src + length, out.row(c).begin());
  }
  return out;
}

}  // namespace varmaformer
