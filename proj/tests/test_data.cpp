#include "helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace testing;

namespace {

std::string hourly_csv(std::size_t rows, std::size_t channels) {
  std::ostringstream os;
  os << "date";
  for (std::size_t c = 0; c < channels; ++c) os << ",c" << c;
  os << "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    os << format_timestamp(1467331200 + static_cast<std::int64_t>(r) * 3600);
    for (std::size_t c = 0; c < channels; ++c) os << "," << static_cast<double>(r * 10 + c);
    os << "\n";
  }
  return os.str();
}

Dataset ramp_dataset(std::size_t rows, std::size_t channels, const std::string& name = "ramp") {
  Dataset ds;
  ds.name = name;
  ds.values = Matrix(rows, channels);
  for (std::size_t r = 0; r < rows; ++r) {
    ds.timestamps.push_back(static_cast<std::int64_t>(r) * 3600);
    for (std::size_t c = 0; c < channels; ++c) ds.values(r, c) = static_cast<double>(r) + 1000.0 * c;
  }
  for (std::size_t c = 0; c < channels; ++c) ds.channel_names.push_back("c" + std::to_string(c));
  return ds;
}

std::string error_of(const std::filesystem::path& path) {
  try {
    ingest_csv(path);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("timestamps round trip") {
  for (const char* text : {"2016-07-01 00:00:00", "2018-06-26 19:45:00", "2000-02-29 23:59:59"}) {
    CHECK(format_timestamp(parse_timestamp(text)) == text);
  }
  CHECK(parse_timestamp("2016-07-01 00:00:00") == 1467331200);
  CHECK(parse_timestamp("2016-07-01") == 1467331200);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), DataError);
}

TEST_CASE("ingest reads an ETT-style header") {
  const auto dir = scratch_dir("ingest");
  const auto path = dir / "ETTh1.csv";
  std::ostringstream os;
  os << "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";
  for (int r = 0; r < 4; ++r) {
    os << format_timestamp(1467331200 + r * 3600) << ",5.827,2.009,1.599,0.462,4.203,1.340,30.531\n";
  }
  write_text(path, os.str());
  const std::vector<std::string> schema = {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"};
  std::ostringstream log;
  const Dataset ds = ingest_csv(path, schema, &log);
  CHECK(ds.channels() == 7);
  CHECK(ds.length() == 4);
  CHECK(ds.name == "ETTh1");
  CHECK(ds.values(3, 6) == 30.531);
  CHECK(log.str().find("4 rows") != std::string::npos);
  const std::vector<std::string> wrong = {"a", "b"};
  CHECK_THROWS_AS(ingest_csv(path, wrong), DataError);
}

TEST_CASE("ingest of a zero channel") {
  const auto dir = scratch_dir("zeros");
  write_text(dir / "z.csv", "date,x\n2020-01-01 00:00:00,0\n2020-01-01 01:00:00,0.0\n2020-01-01 02:00:00,-0\n");
  const Dataset ds = ingest_csv(dir / "z.csv");
  CHECK(ds.length() == 3);
  for (double v : ds.values.values) CHECK(v == 0.0);
}

TEST_CASE("ingest rejects malformed files") {
  const auto dir = scratch_dir("bad");
  CHECK(error_of(dir / "missing.csv").find("dataset not found") != std::string::npos);

  write_text(dir / "gap.csv", "date,x\n2020-01-01 00:00:00,1\n2020-01-01 01:00:00,2\n2020-01-01 03:00:00,3\n");
  CHECK(error_of(dir / "gap.csv").find("gap") != std::string::npos);

  write_text(dir / "dup.csv", "date,x\n2020-01-01 00:00:00,1\n2020-01-01 00:00:00,2\n");
  CHECK(error_of(dir / "dup.csv").find("duplicate or non-monotone") != std::string::npos);

  write_text(dir / "back.csv", "date,x\n2020-01-01 02:00:00,1\n2020-01-01 01:00:00,2\n");
  CHECK(error_of(dir / "back.csv").find("non-monotone") != std::string::npos);

  write_text(dir / "text.csv", "date,x,y\n2020-01-01 00:00:00,1,2\n2020-01-01 01:00:00,3,abc\n");
  const std::string msg = error_of(dir / "text.csv");
  CHECK(msg.find(":3:") != std::string::npos);  // line of the bad row
  CHECK(msg.find("'abc'") != std::string::npos);
  CHECK(msg.find("column 'y'") != std::string::npos);

  write_text(dir / "cols.csv", "date,x\n2020-01-01 00:00:00,1,2\n");
  CHECK(error_of(dir / "cols.csv").find("columns") != std::string::npos);

  write_text(dir / "nan.csv", "date,x\n2020-01-01 00:00:00,nan\n");
  CHECK(error_of(dir / "nan.csv").find("non-numeric") != std::string::npos);
}

TEST_CASE("write_csv and ingest_csv round trip exactly") {
  const auto dir = scratch_dir("roundtrip");
  Rng rng(5);
  Dataset ds = ramp_dataset(20, 3, "rt");
  for (double& v : ds.values.values) v = rng.normal() * 1e3;
  write_csv(ds, dir / "rt.csv");
  const Dataset back = ingest_csv(dir / "rt.csv");
  CHECK(back.values.values == ds.values.values);
  CHECK(back.timestamps == ds.timestamps);
  CHECK(back.channel_names == ds.channel_names);
  write_text(dir / "h.csv", hourly_csv(5, 2));
  CHECK(ingest_csv(dir / "h.csv").frequency == "1h");
}

TEST_CASE("ETT hourly split is 12/4/4 months") {
  const Dataset ds = ramp_dataset(17420, 1, "ETTh1");
  const SplitRanges r = split(ds, SplitPolicy::Auto, 96, 96);
  CHECK(r.train == IndexRange{0, 8640});
  CHECK(r.validation == IndexRange{8640, 11520});
  CHECK(r.test == IndexRange{11520, 14400});
  const Dataset minute = ramp_dataset(69680, 1, "ETTm2");
  const SplitRanges m = split(minute, SplitPolicy::Auto, 96, 96);
  CHECK(m.train.size() == 34560);
  CHECK(m.test.end == 57600);
  CHECK_THROWS_AS(split(ramp_dataset(1000, 1), SplitPolicy::EttHourly, 96, 96), DataError);
}

TEST_CASE("ratio split is 0.7/0.1/0.2") {
  const SplitRanges r = split(ramp_dataset(1000, 1), SplitPolicy::Ratio, 96, 96);
  CHECK(r.train.size() == 700);
  CHECK(r.validation.size() == 100);
  CHECK(r.test.size() == 200);
  CHECK(r.train.end == r.validation.begin);
  CHECK(r.validation.end == r.test.begin);
  CHECK_THROWS_AS(split(ramp_dataset(10, 1), SplitPolicy::Ratio, 96, 96), DataError);
  CHECK(parse_split_policy("ett-hourly") == SplitPolicy::EttHourly);
  CHECK_THROWS_AS(parse_split_policy("random"), std::invalid_argument);
}

TEST_CASE("property: window counts and stride-1 shifts") {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t lookback = 2 + rng.below(20), horizon = 1 + rng.below(20);
    const std::size_t length = lookback + horizon + rng.below(60);
    const Dataset ds = ramp_dataset(length + 10, 2);
    const IndexRange range{5, 5 + length};
    const auto windows = make_windows(ds, range, lookback, horizon);
    REQUIRE(windows.size() == length - lookback - horizon + 1);
    for (std::size_t k = 0; k < windows.size(); ++k) {
      CHECK(windows[k].origin == 5 + k);
      CHECK(windows[k].lookback(1, 0) == ds.values(5 + k, 1));
      CHECK(windows[k].target(0, horizon - 1) == ds.values(5 + k + lookback + horizon - 1, 0));
    }
  }
  CHECK_THROWS_AS(make_windows(ramp_dataset(10, 1), {0, 10}, 8, 4), DataError);
  CHECK(with_context({100, 200}, 96) == IndexRange{4, 200});
  CHECK(with_context({50, 200}, 96) == IndexRange{0, 200});
}

TEST_CASE("window statistics ignore the target") {
  Rng rng(7);
  Dataset ds = ramp_dataset(60, 2);
  for (double& v : ds.values.values) v = rng.normal();
  const auto before = make_windows(ds, {0, 60}, 16, 8);
  for (std::size_t t = 16; t < 24; ++t) ds.values(t, 0) += 100.0;
  const auto after = make_windows(ds, {0, 60}, 16, 8);
  CHECK(after[0].mu == before[0].mu);
  CHECK(after[0].sigma == before[0].sigma);
  CHECK(after[0].target.values != before[0].target.values);
}

TEST_CASE("normalize_window uses the population deviation") {
  Matrix raw(2, 3);
  raw.values = {1, 2, 3, 5, 5, 5};
  const NormalizedWindow n = normalize_window(raw);
  const double sigma = std::sqrt(2.0 / 3.0);
  CHECK(n.mu[0] == 2.0);
  CHECK(n.sigma[0] == doctest::Approx(sigma).epsilon(1e-15));
  CHECK(n.values(0, 0) == doctest::Approx(-1.0 / sigma).epsilon(1e-14));
  CHECK(n.values(0, 1) == 0.0);
  CHECK(n.values(0, 2) == doctest::Approx(1.2247448713915890).epsilon(1e-14));
  CHECK(n.sigma[1] == kSigmaFloor);
  for (std::size_t t = 0; t < 3; ++t) CHECK(n.values(1, t) == 0.0);
  Matrix one(1, 1);
  CHECK_THROWS_AS(normalize_window(one), DataError);
}

TEST_CASE("denormalize against a scalar loop") {
  Rng rng(8);
  const Matrix pred = random_matrix(3, 7, rng);
  const std::vector<double> mu = {3.0, -1.5, 20.0};
  const std::vector<double> sigma = {2.0, 0.25, 7.5};
  const Matrix out = denormalize(pred, mu, sigma);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t t = 0; t < 7; ++t) CHECK(out(c, t) == pred(c, t) * sigma[c] + mu[c]);
  }
  const Matrix zeros(3, 4);
  const Matrix threes = denormalize(zeros, std::vector<double>{3, 3, 3}, std::vector<double>{2, 2, 2});
  for (double v : threes.values) CHECK(v == 3.0);
  CHECK_THROWS_AS(denormalize(pred, std::vector<double>{1.0}, std::vector<double>{1.0}), DataError);
}

TEST_CASE("property: normalize then denormalize is the identity") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const double spread = std::pow(10.0, rng.uniform(-4.0, 4.0));
    const Matrix raw = random_matrix(1 + rng.below(5), 2 + rng.below(100), rng, spread, rng.uniform(-1e3, 1e3));
    const NormalizedWindow n = normalize_window(raw);
    CHECK(max_abs_diff(denormalize(n.values, n.mu, n.sigma).values, raw.values) <= 1e-6);
    for (double s : n.sigma) CHECK(s > 0.0);
  }
}

TEST_CASE("patchify small cases") {
  Matrix five(1, 5);
  five.values = {1, 2, 3, 4, 5};
  const PatchSequence ps = patchify(five, 2);
  CHECK(ps.count == 3);
  CHECK(ps.padded_tail == 1);
  CHECK(ps.patches == std::vector<double>{1, 2, 3, 4, 5, 5});

  Matrix ramp(1, 96);
  for (std::size_t t = 0; t < 96; ++t) ramp(0, t) = static_cast<double>(t + 1);
  const PatchSequence even = patchify(ramp, 24);
  CHECK(even.count == 4);
  CHECK(even.padded_tail == 0);
  const PatchSequence odd = patchify(ramp, 36);
  CHECK(odd.count == 3);
  CHECK(odd.padded_tail == 12);
  for (std::size_t j = 24; j < 36; ++j) CHECK(odd(0, 2, j) == 96.0);
  CHECK(odd(0, 2, 23) == 96.0);
  CHECK(odd(0, 2, 22) == 95.0);
  CHECK_THROWS_AS(patchify(ramp, 0), DataError);
}

TEST_CASE("property: unpatchify inverts patchify for every 1 <= P <= L <= 256") {
  Rng rng(10);
  std::size_t pairs = 0;
  for (std::size_t length = 1; length <= 256; ++length) {
    const Matrix series = random_matrix(2, length, rng);
    for (std::size_t plen = 1; plen <= length; ++plen) {
      const PatchSequence ps = patchify(series, plen);
      REQUIRE(ps.count == (length + plen - 1) / plen);
      REQUIRE(unpatchify(ps, length).values == series.values);
      ++pairs;
    }
  }
  CHECK(pairs == 256 * 257 / 2);
}

TEST_CASE("dataset scaler fits on the training range only") {
  Dataset ds = ramp_dataset(10, 2);
  const StandardScaler s = StandardScaler::fit(ds, {0, 4});
  CHECK(s.mean[0] == 1.5);
  CHECK(s.scale[0] == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  const Dataset z = s.transform(ds);
  CHECK(z.values(0, 1) == doctest::Approx(-1.5 / std::sqrt(1.25)).epsilon(1e-14));
  for (std::size_t r = 0; r < 10; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(s.inverse(c, z.values(r, c)) == doctest::Approx(ds.values(r, c)));
  }
}
