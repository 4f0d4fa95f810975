#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eef/env/environment.hpp"

namespace eef::core {

struct Provenance {
  enum class Source : std::uint8_t { expert, policy };

  Source source = Source::policy;
  std::string expert_label;     // set for expert steps
  std::uint32_t iteration = 0;  // set for policy steps

  static Provenance expert(std::string label) { return {Source::expert, std::move(label), 0}; }
  static Provenance policy(std::uint32_t iteration) { return {Source::policy, {}, iteration}; }

  bool is_expert() const { return source == Source::expert; }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Origin {
  enum class Kind : std::uint8_t { initial, expert_state };

  Kind kind = Kind::initial;
  std::uint64_t expert_traj_id = 0;
  std::size_t state_index = 0;

  static Origin initial() { return {}; }
  static Origin expert_state(std::uint64_t traj, std::size_t index) { return {Kind::expert_state, traj, index}; }

  friend bool operator==(const Origin&, const Origin&) = default;
};

struct TrajectoryStart {
  env::ContextId context;
  Origin origin;

  friend bool operator==(const TrajectoryStart&, const TrajectoryStart&) = default;
};

struct TrajectoryStep {
  env::FingerprintId fingerprint = 0;
  env::StateSnapshot snapshot;  // empty after loading from disk until rehydrated
  std::string observation;
  std::vector<env::ActionToken> candidates;
  env::ActionToken action;
  Provenance provenance;
};

/// One episode: the states at which actions were taken (|tau| = steps.size())
/// plus the terminal reward. The terminal state itself is not a step.
struct Trajectory {
  std::uint64_t id = 0;
  std::vector<TrajectoryStep> steps;
  int terminal_reward = 0;
  TrajectoryStart start;

  std::size_t size() const { return steps.size(); }
  bool positive() const { return terminal_reward == 1; }
  /// Number of expert-provenance actions at step indices >= from.
  std::size_t expert_actions_from(std::size_t from) const;
};

using ActionChooser = std::function<env::ActionToken(const env::StepResult&)>;

/// Continues an episode from `current`, appending steps chosen by `choose`
/// until the episode ends or the trajectory holds `max_steps` steps. A
/// trajectory cut off by the horizon gets terminal reward 0.
void extend_episode(env::Environment& env, env::StepResult current, Trajectory& trajectory,
                    const ActionChooser& choose, const Provenance& provenance, std::size_t max_steps);

}  // namespace eef::core
