#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "eef/core/eef.hpp"
#include "eef/env/chainworld.hpp"
#include "eef/env/minishop.hpp"
#include "eef/experts/expert.hpp"
#include "eef/policy/policy.hpp"

namespace eef::harness {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Method { eef, rft, sft_all, sft_pos, nat };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct ExpertSpec {
  experts::ExpertProfile profile;
  bool calibrate = true;
  double target = 0.356;
};

struct ExperimentConfig {
  env::EnvKind env_kind = env::EnvKind::minishop;
  env::MiniShopConfig minishop;
  env::ChainWorldConfig chainworld;
  std::vector<ExpertSpec> experts;  // datasets are unioned in this order
  double calibration_tolerance = 0.04;
  Method method = Method::eef;
  core::EEFConfig eef;
  std::size_t rft_samples = 6;
  policy::TrainConfig train;
  double validation_fraction = 0.1;
  std::size_t n_seeds = 5;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  void validate() const;
};

/// Reference MiniShop experiment: strong expert calibrated to 0.356, EEF with
/// M = 5, I = 4, five seeds.
ExperimentConfig reference_config();

/// Parses `key = value` lines ('#' starts a comment) on top of the reference
/// configuration. Unknown keys and malformed values are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// The documented keys, with their value in `config`.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);
std::string render_config(const ExperimentConfig& config);

std::unique_ptr<env::Environment> make_environment(const ExperimentConfig& config);

}  // namespace eef::harness
