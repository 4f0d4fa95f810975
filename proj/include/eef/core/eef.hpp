#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eef/common/random.hpp"
#include "eef/core/selection.hpp"
#include "eef/core/trajectory.hpp"
#include "eef/env/environment.hpp"
#include "eef/policy/policy.hpp"

namespace eef::core {

/// {0.2, 0.35, 0.5, 0.65, 0.8, 0.95}
std::vector<double> temperature_ladder();

struct EEFConfig {
  std::size_t M = 5;
  std::size_t I = 4;
  std::size_t k_initial = 1;
  std::vector<double> temperatures = temperature_ladder();
  std::uint64_t seed = 0;
  bool explore_expert_states = true;
  bool use_recovery = true;
  bool warm_start = false;

  void validate() const;
};

/// Exploration trajectory ids are (iteration << 40) + n; expert ids must stay below.
inline constexpr std::uint64_t kExplorationIdShift = 40;

/// Samples one episode. For an expert_state origin the expert's first
/// `state_index` steps are copied verbatim and the policy continues from the
/// restored snapshot; `expert` must then be the referenced trajectory.
Trajectory rollout(const policy::Policy& policy, env::Environment& env, const TrajectoryStart& start,
                   const Trajectory* expert, double temperature, Rng& rng, std::size_t max_steps, std::uint64_t id,
                   std::uint32_t iteration);

struct ExplorationResult {
  std::vector<Trajectory> trajectories;  // initial-state rollouts first, then expert states
  std::map<env::ContextId, bool> initial_success;
  std::map<std::uint64_t, SimulationOutcomes> expert_outcomes;  // by expert trajectory id, includes index 0
};

/// D_i for one iteration. Every rollout seeds its own stream from
/// (seed, iteration, origin), so the schedule does not affect the result.
ExplorationResult explore_iteration(const policy::Policy& policy, env::Environment& env,
                                    std::span<const env::ContextId> contexts, std::span<const Trajectory> experts,
                                    const EEFConfig& config, std::uint32_t iteration);

/// Rollouts per exploration iteration: |C| k + sum_e |select_expert_states(e, M)|.
std::size_t rollouts_per_iteration(std::size_t n_contexts, std::span<const Trajectory> experts,
                                   const EEFConfig& config);

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t rollouts = 0;
  std::size_t positives = 0;
  std::size_t added = 0;
  std::size_t repository_size = 0;
  std::size_t initial_solved = 0;  // contexts whose s0 has a solution
  std::vector<ImportantState> recovery_states;
  std::vector<TrainingExample> examples;
  bool trained = false;
};

struct RunResult {
  std::vector<policy::PolicyParams> policies;  // one per iteration, index 0 = behavior cloning
  std::vector<IterationRecord> iterations;
  std::vector<std::vector<Trajectory>> explorations;  // D_1 .. D_{I-1}
  TrajectoryRepository repository;
  std::vector<std::string> warnings;
  std::size_t total_rollouts = 0;
};

/// The full EEF loop. `contexts` are the training subtasks explored each iteration.
RunResult run_eef(env::Environment& env, std::span<const env::ContextId> contexts,
                  std::span<const Trajectory> experts, const policy::Policy& policy_init, const EEFConfig& config,
                  const policy::TrainConfig& train_config);

/// EEF without expert-state exploration or recovery states; N samples per subtask.
RunResult run_rft(env::Environment& env, std::span<const env::ContextId> contexts,
                  std::span<const Trajectory> experts, const policy::Policy& policy_init, std::size_t N, std::size_t I,
                  std::uint64_t seed, const policy::TrainConfig& train_config);

enum class OfflineVariant { sft_all, sft_pos, nat };

std::string_view to_string(OfflineVariant v);
OfflineVariant offline_variant_from_string(std::string_view s);

/// The featurizer each variant trains with (NAT adds the exemplar-negative block).
policy::Featurizer featurizer_for(OfflineVariant variant);

policy::Policy train_offline(const env::Environment& env, std::span<const Trajectory> experts,
                             OfflineVariant variant, const policy::PolicyParams& init,
                             const policy::TrainConfig& train_config);

/// Featurizes the examples against the trajectories they reference.
std::vector<policy::FeaturizedExample> featurize_examples(const env::Environment& env,
                                                          std::span<const TrainingExample> examples,
                                                          const TrajectoryRepository& repository,
                                                          const policy::Featurizer& featurizer);

}  // namespace eef::core
