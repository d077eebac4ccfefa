#include "varmaformer/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace varmaformer {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Entry {
  ConfigKey key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Entry size_entry(std::string name, std::string doc, Member member) {
  return {{name, std::move(doc)},
          [name, member](ExperimentConfig& c, const std::string& v) { member(c) = parse_size(name, v); },
          [member](const ExperimentConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Entry real_entry(std::string name, std::string doc, Member member) {
  return {{name, std::move(doc)},
          [name, member](ExperimentConfig& c, const std::string& v) { member(c) = parse_real(name, v); },
          [member](const ExperimentConfig& c) { return format_real(member(c)); }};
}

template <typename Member>
Entry bool_entry(std::string name, std::string doc, Member member) {
  return {{name, std::move(doc)},
          [name, member](ExperimentConfig& c, const std::string& v) { member(c) = parse_bool(name, v); },
          [member](const ExperimentConfig& c) { return member(c) ? "true" : "false"; }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"dataset", "CSV path (header row, timestamp first column)"},
       [](ExperimentConfig& c, const std::string& v) { c.dataset = v; },
       [](const ExperimentConfig& c) { return c.dataset; }},
      {{"split", "auto | ett-hourly | ett-minute | ratio"},
       [](ExperimentConfig& c, const std::string& v) {
         try {
           parse_split_policy(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
         c.split = v;
       },
       [](const ExperimentConfig& c) { return c.split; }},
      size_entry("lookback", "look-back length L", [](auto& c) -> auto& { return c.model.lookback; }),
      size_entry("horizon", "forecast horizon T (multiple of patch_len)",
                 [](auto& c) -> auto& { return c.model.horizon; }),
      {{"horizons", "comma-separated horizons for ablate/sweep (empty: horizon)"},
       [](ExperimentConfig& c, const std::string& v) {
         c.horizons.clear();
         std::istringstream is(v);
         std::string item;
         while (std::getline(is, item, ',')) {
           item = trim(item);
           if (!item.empty()) c.horizons.push_back(parse_size("horizons", item));
         }
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.horizons.size(); ++i) s += (i ? "," : "") + std::to_string(c.horizons[i]);
         return s;
       }},
      size_entry("patch_len", "patch length P", [](auto& c) -> auto& { return c.model.patch_length; }),
      size_entry("d_model", "model width D (even)", [](auto& c) -> auto& { return c.model.d_model; }),
      size_entry("n_layers", "decoder layers", [](auto& c) -> auto& { return c.model.n_layers; }),
      size_entry("n_heads", "attention heads (divides d_model)", [](auto& c) -> auto& { return c.model.n_heads; }),
      size_entry("ffn_width", "feed-forward hidden width", [](auto& c) -> auto& { return c.model.ffn_width; }),
      size_entry("p", "AR order (0 disables)", [](auto& c) -> auto& { return c.model.p; }),
      size_entry("q", "MA order (0 disables)", [](auto& c) -> auto& { return c.model.q; }),
      real_entry("alpha", "VARMA feature scale in [0, 1]", [](auto& c) -> auto& { return c.model.alpha; }),
      bool_entry("alpha_trainable", "learn alpha instead of fixing it",
                 [](auto& c) -> auto& { return c.model.alpha_trainable; }),
      real_entry("beta", "query gate blend in [0, 1]", [](auto& c) -> auto& { return c.model.beta; }),
      real_entry("mask_rate", "query masking probability in [0, 1)",
                 [](auto& c) -> auto& { return c.model.mask_rate; }),
      bool_entry("ve_atten", "enable the key-conditioned query gate",
                 [](auto& c) -> auto& { return c.model.ve_atten; }),
      size_entry("batch_size", "windows per optimizer step", [](auto& c) -> auto& { return c.train.batch_size; }),
      size_entry("max_epochs", "epoch cap", [](auto& c) -> auto& { return c.train.max_epochs; }),
      size_entry("patience", "early-stop patience in epochs", [](auto& c) -> auto& { return c.train.patience; }),
      real_entry("learning_rate", "Adam step size", [](auto& c) -> auto& { return c.train.learning_rate; }),
      real_entry("lr_decay", "learning-rate factor on a non-improving epoch",
                 [](auto& c) -> auto& { return c.train.lr_decay; }),
      real_entry("weight_decay", "L2 coefficient", [](auto& c) -> auto& { return c.train.weight_decay; }),
      {{"seed", "model init and training seed"},
       [](ExperimentConfig& c, const std::string& v) {
         c.seed = parse_size("seed", v);
         c.train.seed = c.seed;
       },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      size_entry("seeds", "consecutive seeds per grid cell", [](auto& c) -> auto& { return c.seeds; }),
      size_entry("train_stride", "keep every k-th training window", [](auto& c) -> auto& { return c.train_stride; }),
      {{"out", "output directory"},
       [](ExperimentConfig& c, const std::string& v) { c.out = v; },
       [](const ExperimentConfig& c) { return c.out; }},
  };
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Entry& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  find_entry(trim(key)).set(config, trim(value));
}

std::string get_setting(const ExperimentConfig& config, const std::string& key) {
  return find_entry(key).get(config);
}

void apply_config_text(ExperimentConfig& config, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig config;
  apply_config_text(config, buf.str());
  return config;
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string text;
  for (const Entry& e : entries()) text += e.key.name + " = " + e.get(config) + "\n";
  return text;
}

void validate(const ExperimentConfig& config) {
  try {
    config.model.validate();
    config.train.validate();
    for (std::size_t h : config.horizons) {
      ModelConfig m = config.model;
      m.horizon = h;
      m.validate();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (config.seeds == 0) throw ConfigError("seeds must be at least 1");
  if (config.train_stride == 0) throw ConfigError("train_stride must be at least 1");
}

}  // namespace varmaformer
