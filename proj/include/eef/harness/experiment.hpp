#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eef/core/eef.hpp"
#include "eef/harness/config.hpp"
#include "eef/harness/evaluation.hpp"

namespace eef::harness {

struct ContextSplit {
  std::vector<env::ContextId> fit;         // explored and trained on
  std::vector<env::ContextId> validation;  // model selection only
};

/// Seeded carve-out of floor(fraction * |train|) validation contexts.
ContextSplit carve_validation(std::span<const env::ContextId> train, double fraction, std::uint64_t seed);

struct ExpertRecord {
  ExpertSpec spec;
  experts::ExpertProfile profile;  // after calibration
  double calibrated_rate = 0.0;    // win rate on the calibration contexts
  experts::DatasetStats stats;     // of the generated dataset
  std::uint64_t first_id = 0;
};

struct ExpertSetup {
  std::vector<ExpertRecord> records;
  std::vector<core::Trajectory> dataset;  // union in config order
};

/// Expert ids of the k-th profile start at k << kExpertIdShift.
inline constexpr std::uint64_t kExpertIdShift = 20;

/// Calibrates every profile on all training contexts and generates one
/// demonstration per fit context.
ExpertSetup prepare_experts(env::Environment& env, const ExperimentConfig& config,
                            std::span<const env::ContextId> fit, std::uint64_t seed);

struct MethodRun {
  Method method = Method::eef;
  policy::Featurizer featurizer;
  std::vector<policy::PolicyParams> policies;  // selection candidates, by iteration
  std::optional<core::RunResult> run;          // iterative methods only
  std::size_t total_rollouts = 0;
};

MethodRun train_method(env::Environment& env, const ExperimentConfig& config, Method method,
                       std::span<const env::ContextId> fit, std::span<const core::Trajectory> dataset,
                       std::uint64_t seed);

struct Selection {
  std::size_t index = 0;
  std::vector<double> validation_win_rates;
};

/// Best greedy validation win rate; ties go to the later iteration.
Selection select_model(env::Environment& env, const policy::Featurizer& featurizer,
                       std::span<const policy::PolicyParams> candidates,
                       std::span<const env::ContextId> validation);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<ExpertRecord> experts;
  std::size_t selected_iteration = 0;
  std::vector<double> validation_curve;
  std::vector<double> test_curve;
  double win_rate = 0.0;
  double avg_reward = 0.0;
  NavigationStats navigation;
  std::map<env::Difficulty, SolveCount> by_difficulty;  // MiniShop only
  std::size_t budget = 0;
};

struct SeedArtifacts {
  ContextSplit split;
  ExpertSetup experts;
  MethodRun trained;
  EvalResult test;
};

/// The seeds of a run: seed, seed + 1, ..., seed + n_seeds - 1.
std::vector<std::uint64_t> run_seeds(const ExperimentConfig& config);

SeedResult run_seed(env::Environment& env, const ExperimentConfig& config, Method method, std::uint64_t seed,
                    SeedArtifacts* artifacts = nullptr);

struct Stat {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
};

Stat aggregate(std::span<const double> values);

struct MethodReport {
  Method method = Method::eef;
  std::string label;
  std::vector<SeedResult> seeds;
  Stat win_rate;
  Stat avg_reward;
  Stat next_success_pct;
  Stat back_success_pct;
  Stat next_attempt_pct;
  Stat back_attempt_pct;
  Stat budget;
  std::map<env::Difficulty, Stat> by_difficulty;
};

std::string method_label(const ExperimentConfig& config, Method method);

MethodReport summarize(const ExperimentConfig& config, Method method, std::vector<SeedResult> seeds);

/// Every method over every seed; experts are prepared once per seed and shared.
std::vector<MethodReport> run_experiment(const ExperimentConfig& config, std::span<const Method> methods);

struct SweepEntry {
  Method method = Method::eef;  // eef (budget = M) or rft (budget = N)
  std::size_t budget = 1;
};

struct SweepRow {
  SweepEntry entry;
  std::vector<double> win_rates;      // per seed
  std::vector<std::size_t> rollouts;  // per seed
  Stat win_rate;
};

/// One fine-tuning iteration per entry, all starting from the same
/// behavior-cloned parameters of each seed.
std::vector<SweepRow> budget_sweep(const ExperimentConfig& config, std::span<const SweepEntry> entries);

std::vector<SweepEntry> default_sweep();

}  // namespace eef::harness
