// varmaformer: train, evaluate, forecast, ablate, sweep, verify, gen-synthetic.
//
// Exit codes: 0 success, 1 runtime failure (including failed verify suites),
// 2 bad configuration, arguments or input data.

#include "varmaformer/checkpoint.hpp"
#include "varmaformer/config.hpp"
#include "varmaformer/data.hpp"
#include "varmaformer/experiment.hpp"
#include "varmaformer/oracle.hpp"
#include "varmaformer/trainer.hpp"
#include "varmaformer/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace vf = varmaformer;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> horizon;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key = value settings file");
  cmd->add_option("--seed", o.seed, "seed (overrides the file)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--horizon", o.horizon, "forecast horizon");
  cmd->add_option("--override", o.overrides, "key=value, repeatable")->take_all();
}

// File first, then --override, then the dedicated flags.
vf::ExperimentConfig resolve(const CommonOptions& o) {
  vf::ExperimentConfig config = o.config.empty() ? vf::ExperimentConfig{} : vf::load_config(o.config);
  for (const std::string& item : o.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw vf::ConfigError("--override expects key=value, got '" + item + "'");
    vf::apply_setting(config, item.substr(0, eq), item.substr(eq + 1));
  }
  if (o.seed) vf::apply_setting(config, "seed", std::to_string(*o.seed));
  if (!o.out.empty()) config.out = o.out;
  if (o.horizon) config.model.horizon = *o.horizon;
  return config;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw vf::ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run_verify(const CommonOptions& common, bool inject_fault) {
  vf::ExperimentConfig config = resolve(common);
  vf::VerifyOptions options;
  options.seed = config.seed;
  options.corrupt_gradient = inject_fault;
  const auto suites = vf::run_verify(options);
  bool ok = true;
  for (const vf::SuiteResult& s : suites) {
    std::cout << (s.passed() ? "PASS " : "FAIL ") << s.name << "  checks=" << s.checks << " failures=" << s.failures
              << " worst=" << s.worst << "\n";
    for (const std::string& m : s.messages) std::cout << "    " << m << "\n";
    ok = ok && s.passed();
  }
  vf::write_verify_csv(suites, std::filesystem::path(config.out) / "verify.csv");
  std::cout << (ok ? "all suites passed" : "verification failed") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VARMA-feature cross-attention forecaster"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string checkpoint;
  std::size_t index = 0;
  std::string param;
  std::string values;
  bool inject_fault = false;

  auto* train = app.add_subcommand("train", "train one model, write checkpoint.vmf and metrics.csv");
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  auto* forecast = app.add_subcommand("forecast", "write forecast.csv for one test window");
  auto* ablate = app.add_subcommand("ablate", "run the six-row component toggle grid");
  auto* sweep = app.add_subcommand("sweep", "vary one hyper-parameter");
  auto* verify = app.add_subcommand("verify", "run the self-check suites");
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic AR/ARMA/sine dataset as CSV");
  for (auto* cmd : {train, evaluate, forecast, ablate, sweep, verify}) add_common(cmd, common);
  for (auto* cmd : {evaluate, forecast}) cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  forecast->add_option("--index", index, "test window index");
  sweep->add_option("--param", param, "p | q | alpha | beta | pq")->required();
  sweep->add_option("--values", values, "comma-separated values (pq: p:q pairs)")->required();
  verify->add_flag("--inject-fault", inject_fault, "corrupt one analytic gradient (negative control)");

  std::string kind = "ar";
  std::string ar = "0.5,0.3";
  std::string ma;
  double noise = 0.1;
  std::size_t length = 10000;
  std::size_t channels = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "synthetic.csv";
  gen->add_option("--kind", kind, "ar | varma | sine-plus-noise");
  gen->add_option("--ar", ar, "AR coefficients");
  gen->add_option("--ma", ma, "MA coefficients");
  gen->add_option("--noise", noise, "innovation standard deviation");
  gen->add_option("--length", length, "rows after burn-in");
  gen->add_option("--channels", channels, "independent channels");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*verify) return run_verify(common, inject_fault);
    if (*gen) {
      vf::oracle::SyntheticSpec spec;
      spec.kind = vf::oracle::parse_synthetic_kind(kind);
      spec.ar = parse_list(ar);
      spec.ma = parse_list(ma);
      spec.noise_std = noise;
      spec.length = length;
      spec.channels = channels;
      spec.seed = gen_seed;
      spec.name = std::filesystem::path(gen_out).stem().string();
      vf::write_csv(vf::oracle::generate(spec), gen_out);
      std::cout << "wrote " << gen_out << "\n";
      return 0;
    }
    const vf::ExperimentConfig config = resolve(common);
    if (*train) vf::command_train(config, std::cout);
    if (*evaluate) vf::command_evaluate(config, checkpoint, std::cout);
    if (*forecast) vf::command_forecast(config, checkpoint, index, std::cout);
    if (*ablate) vf::command_ablate(config, std::cout);
    if (*sweep) vf::command_sweep(config, param, split_values(values), std::cout);
    return 0;
  } catch (const vf::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vf::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
