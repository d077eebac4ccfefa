#pragma once

// Experiment plumbing behind the command-line tool: data preparation,
// single training runs, the ablation toggle grid, sweeps and CSV output.

#include "varmaformer/config.hpp"
#include "varmaformer/data.hpp"
#include "varmaformer/model.hpp"
#include "varmaformer/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace varmaformer {

// Dataset z-scored with training-split statistics, then windowed. Validation
// and test windows borrow `lookback` rows of context from the preceding split;
// only every `train_stride`-th training window is kept.
struct PreparedData {
  Dataset raw;
  StandardScaler scaler;
  Dataset scaled;
  SplitRanges ranges;
  std::vector<SeriesWindow> train;
  std::vector<SeriesWindow> validation;
  std::vector<SeriesWindow> test;
};

// Throws DataError("dataset not found: ...") for an empty or missing path.
Dataset load_dataset(const ExperimentConfig& config, std::ostream* log = nullptr);
PreparedData prepare_data(Dataset raw, const ExperimentConfig& config, std::size_t horizon);

struct Ablation {
  std::string name;
  bool ar = false;
  bool ma = false;
  bool ve_atten = false;
};

// none, ar, ma, ar+ma, ve-atten, all
const std::vector<Ablation>& ablation_grid();
// Switched-off branches get order 0; ve-atten off removes the gate.
ModelConfig apply_ablation(ModelConfig model, const Ablation& ablation);

struct RunResult {
  std::string label;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  TrainHistory history;
  Metrics test;
  double wall_time_s = 0.0;
};

RunResult run_once(const PreparedData& data, const ModelConfig& model, TrainConfig train, std::uint64_t seed,
                   const std::string& label, std::ostream* log = nullptr,
                   std::unique_ptr<VarmaFormer>* trained = nullptr);

inline constexpr const char* kMetricsSchemaLine = "# varmaformer-metrics v1";
inline constexpr const char* kMetricsHeader = "dataset,horizon,ablation,seed,epoch,split,mse,mae,wall_time_s";
inline constexpr const char* kSweepSchemaLine = "# varmaformer-sweep v1";
inline constexpr const char* kSweepHeader = "dataset,horizon,param,value,seed,epoch,split,mse,mae,wall_time_s";

std::string format_metric(double value);

// Each command writes into config.out and throws on any error.
void command_train(const ExperimentConfig& config, std::ostream& log);
void command_evaluate(const ExperimentConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
void command_forecast(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                      std::size_t window_index, std::ostream& log);
void command_ablate(const ExperimentConfig& config, std::ostream& log);
// param: p | q | alpha | beta | pq (values "p:q").
void command_sweep(const ExperimentConfig& config, const std::string& param, const std::vector<std::string>& values,
                   std::ostream& log);

// Reads a model back from a checkpoint; `config` receives the stored settings.
std::unique_ptr<VarmaFormer> load_model(const std::filesystem::path& checkpoint, ExperimentConfig& config);

}  // namespace varmaformer
