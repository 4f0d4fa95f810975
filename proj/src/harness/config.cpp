#include "eef/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

namespace eef::harness {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::eef: return "eef";
    case Method::rft: return "rft";
    case Method::sft_all: return "sft-all";
    case Method::sft_pos: return "sft-pos";
    case Method::nat: return "nat";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  if (s == "eef") return Method::eef;
  if (s == "rft") return Method::rft;
  if (s == "sft-all") return Method::sft_all;
  if (s == "sft-pos") return Method::sft_pos;
  if (s == "nat") return Method::nat;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected eef, rft, sft-all, sft-pos or nat)");
}

namespace {

ExpertSpec preset(const std::string& name) {
  ExpertSpec spec;
  if (name == "weak") {
    spec.profile = experts::weak_profile();
    spec.target = 0.232;
  } else {
    spec.profile = experts::strong_profile();
    spec.profile.label = name;
    spec.target = 0.356;
  }
  return spec;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt_real(double x) { return fmt::format("{}", x); }

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter uint_field(T ExperimentConfig::*group, std::size_t T::*field) {
  return [=](ExperimentConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = static_cast<std::size_t>(to_uint(k, v));
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"env",
       [](ExperimentConfig& c, const std::string&, const std::string& v) {
         try {
           c.env_kind = env::env_kind_from_string(v);
         } catch (const std::exception&) {
           throw ConfigError("env: expected minishop or chainworld, got '" + v + "'");
         }
       }},
      {"minishop.n_products", uint_field(&ExperimentConfig::minishop, &env::MiniShopConfig::n_products)},
      {"minishop.page_size", uint_field(&ExperimentConfig::minishop, &env::MiniShopConfig::page_size)},
      {"minishop.n_train", uint_field(&ExperimentConfig::minishop, &env::MiniShopConfig::n_tasks_train)},
      {"minishop.n_test", uint_field(&ExperimentConfig::minishop, &env::MiniShopConfig::n_tasks_test)},
      {"minishop.mix_easy",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.minishop.difficulty_mix.easy = to_real(k, v);
       }},
      {"minishop.mix_next",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.minishop.difficulty_mix.needs_next = to_real(k, v);
       }},
      {"minishop.mix_back",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.minishop.difficulty_mix.needs_back = to_real(k, v);
       }},
      {"minishop.seed",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.minishop.seed = to_uint(k, v); }},
      {"chainworld.n_stages", uint_field(&ExperimentConfig::chainworld, &env::ChainWorldConfig::n_stages)},
      {"chainworld.menu_size", uint_field(&ExperimentConfig::chainworld, &env::ChainWorldConfig::menu_size)},
      {"chainworld.recoverable_fraction",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.chainworld.recoverable_fraction = to_real(k, v);
       }},
      {"chainworld.n_train", uint_field(&ExperimentConfig::chainworld, &env::ChainWorldConfig::n_tasks_train)},
      {"chainworld.n_test", uint_field(&ExperimentConfig::chainworld, &env::ChainWorldConfig::n_tasks_test)},
      {"chainworld.seed",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.chainworld.seed = to_uint(k, v); }},
      {"calibration.tolerance",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.calibration_tolerance = to_real(k, v);
       }},
      {"method", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.method = method_from_string(v); }},
      {"eef.m", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.eef.M = to_uint(k, v); }},
      {"eef.iters", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.eef.I = to_uint(k, v); }},
      {"eef.k_initial",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.eef.k_initial = to_uint(k, v); }},
      {"eef.warm_start",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.eef.warm_start = to_bool(k, v); }},
      {"eef.temperatures",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.eef.temperatures.clear();
         for (const auto& t : split_list(v)) c.eef.temperatures.push_back(to_real(k, t));
       }},
      {"rft.n", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.rft_samples = to_uint(k, v); }},
      {"train.learning_rate",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = to_real(k, v); }},
      {"train.epochs",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_uint(k, v); }},
      {"train.batch_size",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_uint(k, v); }},
      {"validation_fraction",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.validation_fraction = to_real(k, v); }},
      {"n_seeds", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_seeds = to_uint(k, v); }},
      {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_uint(k, v); }},
      {"output_dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
  };
  return table;
}

bool set_expert_field(ExpertSpec& spec, const std::string& key, const std::string& field, const std::string& v) {
  auto& p = spec.profile;
  if (field == "p_overlook") p.p_overlook = to_real(key, v);
  else if (field == "p_recover") p.p_recover = to_real(key, v);
  else if (field == "p_attempt_next") p.p_attempt_next = to_real(key, v);
  else if (field == "search_quality") p.search_quality = to_real(key, v);
  else if (field == "navigation_fatigue") p.navigation_fatigue = to_real(key, v);
  else if (field == "calibrate") spec.calibrate = to_bool(key, v);
  else if (field == "target") spec.target = to_real(key, v);
  else return false;
  return true;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_seeds < 1) throw ConfigError("n_seeds must be at least 1");
  if (experts.empty()) throw ConfigError("experts: at least one expert profile is required");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in [0, 1)");
  if (!(calibration_tolerance > 0.0)) throw ConfigError("calibration.tolerance must be positive");
  if (rft_samples < 1) throw ConfigError("rft.n must be at least 1");
  for (const auto& e : experts) {
    if (!(e.target >= 0.0 && e.target <= 1.0)) throw ConfigError("expert " + e.profile.label + ": target outside [0, 1]");
    try {
      e.profile.validate();
    } catch (const std::exception& ex) {
      throw ConfigError(ex.what());
    }
  }
  try {
    eef.validate();
    train.validate();
    if (env_kind == env::EnvKind::minishop) minishop.validate();
    else chainworld.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
}

ExperimentConfig reference_config() {
  ExperimentConfig c;
  c.experts.push_back(preset("strong"));
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c = reference_config();
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", lineno));
    entries.emplace_back(std::move(key), std::move(value));
  }

  // The expert list decides which expert.<label>.* keys are meaningful.
  for (const auto& [k, v] : entries) {
    if (k != "experts") continue;
    c.experts.clear();
    for (const auto& name : split_list(v)) c.experts.push_back(preset(name));
  }
  for (const auto& [k, v] : entries) {
    if (k == "experts") continue;
    if (k.rfind("expert.", 0) == 0) {
      auto dot = k.find('.', 7);
      std::string label = dot == std::string::npos ? "" : k.substr(7, dot - 7);
      std::string field = dot == std::string::npos ? "" : k.substr(dot + 1);
      auto it = std::find_if(c.experts.begin(), c.experts.end(),
                             [&](const ExpertSpec& s) { return s.profile.label == label; });
      if (it == c.experts.end()) throw ConfigError("unknown key '" + k + "' (expert not listed in 'experts')");
      if (!set_expert_field(*it, k, field, v)) throw ConfigError("unknown key '" + k + "'");
      continue;
    }
    auto it = setters().find(k);
    if (it == setters().end()) throw ConfigError("unknown key '" + k + "'");
    it->second(c, k, v);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  auto add = [&](std::string k, std::string v) { out.emplace_back(std::move(k), std::move(v)); };
  add("env", std::string(env::to_string(c.env_kind)));
  if (c.env_kind == env::EnvKind::minishop) {
    add("minishop.n_products", std::to_string(c.minishop.n_products));
    add("minishop.page_size", std::to_string(c.minishop.page_size));
    add("minishop.n_train", std::to_string(c.minishop.n_tasks_train));
    add("minishop.n_test", std::to_string(c.minishop.n_tasks_test));
    add("minishop.mix_easy", fmt_real(c.minishop.difficulty_mix.easy));
    add("minishop.mix_next", fmt_real(c.minishop.difficulty_mix.needs_next));
    add("minishop.mix_back", fmt_real(c.minishop.difficulty_mix.needs_back));
    add("minishop.seed", std::to_string(c.minishop.seed));
  } else {
    add("chainworld.n_stages", std::to_string(c.chainworld.n_stages));
    add("chainworld.menu_size", std::to_string(c.chainworld.menu_size));
    add("chainworld.recoverable_fraction", fmt_real(c.chainworld.recoverable_fraction));
    add("chainworld.n_train", std::to_string(c.chainworld.n_tasks_train));
    add("chainworld.n_test", std::to_string(c.chainworld.n_tasks_test));
    add("chainworld.seed", std::to_string(c.chainworld.seed));
  }
  std::vector<std::string> labels;
  for (const auto& e : c.experts) labels.push_back(e.profile.label);
  add("experts", fmt::format("{}", fmt::join(labels, ",")));
  for (const auto& e : c.experts) {
    const std::string p = "expert." + e.profile.label + ".";
    add(p + "p_overlook", fmt_real(e.profile.p_overlook));
    add(p + "p_recover", fmt_real(e.profile.p_recover));
    add(p + "p_attempt_next", fmt_real(e.profile.p_attempt_next));
    add(p + "search_quality", fmt_real(e.profile.search_quality));
    add(p + "navigation_fatigue", fmt_real(e.profile.navigation_fatigue));
    add(p + "calibrate", e.calibrate ? "true" : "false");
    add(p + "target", fmt_real(e.target));
  }
  add("calibration.tolerance", fmt_real(c.calibration_tolerance));
  add("method", std::string(to_string(c.method)));
  add("eef.m", std::to_string(c.eef.M));
  add("eef.iters", std::to_string(c.eef.I));
  add("eef.k_initial", std::to_string(c.eef.k_initial));
  add("eef.warm_start", c.eef.warm_start ? "true" : "false");
  std::vector<std::string> temps;
  for (double t : c.eef.temperatures) temps.push_back(fmt_real(t));
  add("eef.temperatures", fmt::format("{}", fmt::join(temps, ",")));
  add("rft.n", std::to_string(c.rft_samples));
  add("train.learning_rate", fmt_real(c.train.learning_rate));
  add("train.epochs", std::to_string(c.train.epochs));
  add("train.batch_size", std::to_string(c.train.batch_size));
  add("validation_fraction", fmt_real(c.validation_fraction));
  add("n_seeds", std::to_string(c.n_seeds));
  add("seed", std::to_string(c.seed));
  add("output_dir", c.output_dir);
  return out;
}

std::string render_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

std::unique_ptr<env::Environment> make_environment(const ExperimentConfig& config) {
  if (config.env_kind == env::EnvKind::minishop)
    return std::make_unique<env::MiniShopEnv>(env::generate_minishop(config.minishop));
  return std::make_unique<env::ChainWorldEnv>(env::generate_chainworld(config.chainworld));
}

}  // namespace eef::harness
