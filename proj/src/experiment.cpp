#include "varmaformer/experiment.hpp"

#include "varmaformer/baselines.hpp"
#include "varmaformer/checkpoint.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace varmaformer {

namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const ExperimentConfig& config, const std::string& file) {
  fs::create_directories(config.out);
  const fs::path path = fs::path(config.out) / file;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

struct CsvRow {
  std::string dataset;
  std::size_t horizon = 0;
  std::string label;
  std::string seed;
  std::size_t epoch = 0;
  std::string split;
  double mse = 0.0;
  double mae = 0.0;
  double wall_time_s = 0.0;
};

void write_row(std::ostream& out, const CsvRow& r) {
  out << r.dataset << ',' << r.horizon << ',' << r.label << ',' << r.seed << ',' << r.epoch << ',' << r.split << ','
      << format_metric(r.mse) << ',' << format_metric(r.mae) << ',' << std::fixed << std::setprecision(3)
      << r.wall_time_s << std::defaultfloat << '\n';
}

void write_history(std::ostream& out, const std::string& dataset, const RunResult& run) {
  const std::string seed = std::to_string(run.seed);
  for (const EpochRecord& e : run.history.epochs) {
    write_row(out, {dataset, run.horizon, run.label, seed, e.epoch, "train", e.train_mse, e.train_mae, e.wall_time_s});
    write_row(out, {dataset, run.horizon, run.label, seed, e.epoch, "val", e.val_mse, e.val_mae, e.wall_time_s});
  }
}

CsvRow test_row(const std::string& dataset, const RunResult& run) {
  return {dataset, run.horizon, run.label, std::to_string(run.seed), run.history.best_epoch, "test",
          run.test.mse, run.test.mae, run.wall_time_s};
}

CsvRow mean_row(const std::string& dataset, const std::vector<RunResult>& runs) {
  CsvRow row{dataset, runs.front().horizon, runs.front().label, "mean", 0, "test", 0.0, 0.0, 0.0};
  for (const RunResult& r : runs) {
    row.mse += r.test.mse / static_cast<double>(runs.size());
    row.mae += r.test.mae / static_cast<double>(runs.size());
    row.wall_time_s += r.wall_time_s;
  }
  return row;
}

std::vector<std::size_t> grid_horizons(const ExperimentConfig& config) {
  return config.horizons.empty() ? std::vector<std::size_t>{config.model.horizon} : config.horizons;
}

}  // namespace

std::string format_metric(double value) {
  std::ostringstream os;
  os << std::setprecision(10) << value;
  return os.str();
}

Dataset load_dataset(const ExperimentConfig& config, std::ostream* log) {
  if (config.dataset.empty()) throw DataError("dataset not found: no dataset path configured");
  if (!fs::exists(config.dataset)) throw DataError("dataset not found: " + config.dataset);
  return ingest_csv(config.dataset, {}, log);
}

PreparedData prepare_data(Dataset raw, const ExperimentConfig& config, std::size_t horizon) {
  const std::size_t lookback = config.model.lookback;
  PreparedData data;
  data.ranges = split(raw, parse_split_policy(config.split), lookback, horizon);
  data.scaler = StandardScaler::fit(raw, data.ranges.train);
  data.scaled = data.scaler.transform(raw);
  data.raw = std::move(raw);
  std::vector<SeriesWindow> train = make_windows(data.scaled, data.ranges.train, lookback, horizon);
  if (config.train_stride > 1) {
    for (std::size_t i = 0; i < train.size(); i += config.train_stride) data.train.push_back(std::move(train[i]));
  } else {
    data.train = std::move(train);
  }
  data.validation = make_windows(data.scaled, with_context(data.ranges.validation, lookback), lookback, horizon);
  data.test = make_windows(data.scaled, with_context(data.ranges.test, lookback), lookback, horizon);
  return data;
}

const std::vector<Ablation>& ablation_grid() {
  static const std::vector<Ablation> grid = {
      {"none", false, false, false}, {"ar", true, false, false},       {"ma", false, true, false},
      {"ar+ma", true, true, false},  {"ve-atten", false, false, true}, {"all", true, true, true},
  };
  return grid;
}

ModelConfig apply_ablation(ModelConfig model, const Ablation& ablation) {
  if (!ablation.ar) model.p = 0;
  if (!ablation.ma) model.q = 0;
  model.ve_atten = model.ve_atten && ablation.ve_atten;
  return model;
}

RunResult run_once(const PreparedData& data, const ModelConfig& model_config, TrainConfig train_config,
                   std::uint64_t seed, const std::string& label, std::ostream* log,
                   std::unique_ptr<VarmaFormer>* trained) {
  const auto start = std::chrono::steady_clock::now();
  train_config.seed = seed;
  auto model = std::make_unique<VarmaFormer>(model_config, seed);
  if (log) {
    *log << "[" << label << " T=" << model_config.horizon << " seed=" << seed << "] "
         << model->parameters().scalar_count() << " parameters, " << data.train.size() << " training windows\n";
  }
  RunResult result;
  result.label = label;
  result.horizon = model_config.horizon;
  result.seed = seed;
  result.history = train(*model, data.train, data.validation, train_config, log);
  result.test = evaluate(*model, data.test);
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (log) *log << "  test mse " << format_metric(result.test.mse) << "  mae " << format_metric(result.test.mae) << "\n";
  if (trained) *trained = std::move(model);
  return result;
}

void command_train(const ExperimentConfig& config, std::ostream& log) {
  validate(config);
  PreparedData data = prepare_data(load_dataset(config, &log), config, config.model.horizon);
  std::unique_ptr<VarmaFormer> model;
  const RunResult run = run_once(data, config.model, config.train, config.seed, "all", &log, &model);

  fs::create_directories(config.out);
  write_checkpoint(fs::path(config.out) / "checkpoint.vmf", {to_config_text(config), model->parameters().snapshot()});

  const oracle::PersistenceForecaster persistence(config.model.lookback, config.model.horizon);
  const Metrics baseline = evaluate(persistence, data.test);

  std::ofstream csv = open_output(config, "metrics.csv");
  csv << kMetricsSchemaLine << '\n' << kMetricsHeader << '\n';
  write_history(csv, data.raw.name, run);
  write_row(csv, test_row(data.raw.name, run));
  write_row(csv, {data.raw.name, run.horizon, "persistence", std::to_string(config.seed), 0, "test", baseline.mse,
                  baseline.mae, 0.0});
  log << "wrote " << (fs::path(config.out) / "checkpoint.vmf").string() << " and metrics.csv\n";
}

std::unique_ptr<VarmaFormer> load_model(const fs::path& checkpoint, ExperimentConfig& config) {
  Checkpoint cp = read_checkpoint(checkpoint);
  ExperimentConfig stored;
  apply_config_text(stored, cp.config_text);
  validate(stored);
  auto model = std::make_unique<VarmaFormer>(stored.model, stored.seed);
  try {
    model->parameters().load(cp.parameters);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(checkpoint.string() + ": " + e.what());
  }
  config = stored;
  return model;
}

void command_evaluate(const ExperimentConfig& config, const fs::path& checkpoint, std::ostream& log) {
  ExperimentConfig stored;
  const auto model = load_model(checkpoint, stored);
  ExperimentConfig effective = config;
  effective.model = stored.model;
  PreparedData data = prepare_data(load_dataset(effective, &log), effective, effective.model.horizon);
  const Metrics m = evaluate(*model, data.test);
  std::ofstream csv = open_output(effective, "evaluate.csv");
  csv << kMetricsSchemaLine << '\n' << kMetricsHeader << '\n';
  write_row(csv, {data.raw.name, effective.model.horizon, "checkpoint", std::to_string(stored.seed), 0, "test", m.mse,
                  m.mae, 0.0});
  log << "test mse " << format_metric(m.mse) << "  mae " << format_metric(m.mae) << " over " << m.n_samples
      << " windows\n";
}

void command_forecast(const ExperimentConfig& config, const fs::path& checkpoint, std::size_t window_index,
                      std::ostream& log) {
  ExperimentConfig stored;
  const auto model = load_model(checkpoint, stored);
  ExperimentConfig effective = config;
  effective.model = stored.model;
  PreparedData data = prepare_data(load_dataset(effective, &log), effective, effective.model.horizon);
  if (window_index >= data.test.size()) {
    throw std::invalid_argument("window index " + std::to_string(window_index) + " out of range (" +
                                std::to_string(data.test.size()) + " test windows)");
  }
  const SeriesWindow& w = data.test[window_index];
  const Matrix pred = model->forecast(w);

  std::ofstream csv = open_output(effective, "forecast.csv");
  csv << "# varmaformer-forecast v1\n" << "channel,step,timestamp,segment,value\n" << std::setprecision(10);
  const std::size_t lookback = w.lookback_length();
  for (std::size_t c = 0; c < w.channels(); ++c) {
    const std::string& name = data.raw.channel_names[c];
    auto emit = [&](std::size_t step, const char* segment, double scaled) {
      const std::size_t row = w.origin + step;
      csv << name << ',' << step << ',' << format_timestamp(data.raw.timestamps[row]) << ',' << segment << ','
          << data.scaler.inverse(c, scaled) << '\n';
    };
    for (std::size_t t = 0; t < lookback; ++t) emit(t, "history", w.lookback(c, t));
    for (std::size_t t = 0; t < w.horizon(); ++t) emit(lookback + t, "actual", w.target(c, t));
    for (std::size_t t = 0; t < w.horizon(); ++t) emit(lookback + t, "forecast", pred(c, t));
  }
  log << "wrote forecast.csv for test window " << window_index << "\n";
}

void command_ablate(const ExperimentConfig& config, std::ostream& log) {
  validate(config);
  const Dataset raw = load_dataset(config, &log);
  std::ofstream csv = open_output(config, "ablation.csv");
  csv << kMetricsSchemaLine << '\n' << kMetricsHeader << '\n';
  for (std::size_t horizon : grid_horizons(config)) {
    ModelConfig base = config.model;
    base.horizon = horizon;
    const PreparedData data = prepare_data(raw, config, horizon);
    for (const Ablation& ablation : ablation_grid()) {
      std::vector<RunResult> runs;
      for (std::size_t s = 0; s < config.seeds; ++s) {
        runs.push_back(run_once(data, apply_ablation(base, ablation), config.train, config.seed + s, ablation.name, &log));
        write_row(csv, test_row(raw.name, runs.back()));
      }
      if (runs.size() > 1) write_row(csv, mean_row(raw.name, runs));
      csv.flush();
    }
  }
}

void command_sweep(const ExperimentConfig& config, const std::string& param, const std::vector<std::string>& values,
                   std::ostream& log) {
  validate(config);
  if (param != "p" && param != "q" && param != "alpha" && param != "beta" && param != "pq") {
    throw ConfigError("sweep parameter must be one of p, q, alpha, beta, pq; got '" + param + "'");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentConfig> cells;
  for (const std::string& value : values) {
    ExperimentConfig cell = config;
    if (param == "pq") {
      const auto colon = value.find(':');
      if (colon == std::string::npos) throw ConfigError("pq sweep values look like 'p:q', got '" + value + "'");
      apply_setting(cell, "p", value.substr(0, colon));
      apply_setting(cell, "q", value.substr(colon + 1));
    } else {
      apply_setting(cell, param, value);
    }
    validate(cell);
    cells.push_back(cell);
  }

  const Dataset raw = load_dataset(config, &log);
  std::ofstream csv = open_output(config, "sweep.csv");
  csv << kSweepSchemaLine << '\n' << kSweepHeader << '\n';
  for (std::size_t horizon : grid_horizons(config)) {
    const PreparedData data = prepare_data(raw, config, horizon);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      ModelConfig model = cells[i].model;
      model.horizon = horizon;
      std::vector<RunResult> runs;
      auto emit = [&](const CsvRow& r) {
        csv << r.dataset << ',' << r.horizon << ',' << param << ',' << values[i] << ',' << r.seed << ',' << r.epoch
            << ',' << r.split << ',' << format_metric(r.mse) << ',' << format_metric(r.mae) << ',' << std::fixed
            << std::setprecision(3) << r.wall_time_s << std::defaultfloat << '\n';
      };
      for (std::size_t s = 0; s < config.seeds; ++s) {
        runs.push_back(run_once(data, model, config.train, config.seed + s, param + "=" + values[i], &log));
        emit(test_row(raw.name, runs.back()));
      }
      if (runs.size() > 1) emit(mean_row(raw.name, runs));
      csv.flush();
    }
  }
}

}  // namespace varmaformer
