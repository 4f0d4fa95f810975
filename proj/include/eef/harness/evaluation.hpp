#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "eef/core/trajectory.hpp"
#include "eef/env/minishop.hpp"
#include "eef/policy/policy.hpp"

namespace eef::harness {

struct EvalMode {
  enum class Kind : std::uint8_t { greedy, sampled } kind = Kind::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static EvalMode greedy() { return {}; }
  static EvalMode sampled(double temperature, std::uint64_t seed) { return {Kind::sampled, temperature, seed}; }
};

struct EvalResult {
  double win_rate = 0.0;
  double avg_reward = 0.0;  // equals win_rate under win/loss reward
  std::vector<core::Trajectory> trajectories;  // one per context, in order
};

/// Builds the action chooser for one episode, given its first step.
using AgentFactory = std::function<core::ActionChooser(env::ContextId, const env::StepResult&)>;

EvalResult evaluate_agent(env::Environment& env, std::span<const env::ContextId> contexts, const AgentFactory& agent);

EvalResult evaluate(const policy::Policy& policy, env::Environment& env, std::span<const env::ContextId> contexts,
                    const EvalMode& mode = {});

/// Plays the shortest solution found by exhaustive search.
AgentFactory oracle_agent(env::Environment& env);

struct NavigationStats {
  double next_success_pct = 0.0;
  double back_success_pct = 0.0;
  double next_attempt_pct = 0.0;
  double back_attempt_pct = 0.0;
};

bool uses_next(const core::Trajectory& trajectory);
/// Back to Search taken from a product page.
bool uses_back(const core::Trajectory& trajectory);

/// Percentages over the trajectories given, one per context.
NavigationStats navigation_stats(std::span<const core::Trajectory> trajectories);

struct SolveCount {
  std::size_t solved = 0;
  std::size_t total = 0;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(solved) / total; }
};

std::map<env::Difficulty, SolveCount> solve_by_difficulty(const env::MiniShopEnv& env,
                                                          std::span<const core::Trajectory> trajectories);

}  // namespace eef::harness
