#include "eef/core/trajectory.hpp"

namespace eef::core {

std::size_t Trajectory::expert_actions_from(std::size_t from) const {
  std::size_t n = 0;
  for (std::size_t i = from; i < steps.size(); ++i)
    if (steps[i].provenance.is_expert()) ++n;
  return n;
}

void extend_episode(env::Environment& env, env::StepResult current, Trajectory& trajectory,
                    const ActionChooser& choose, const Provenance& provenance, std::size_t max_steps) {
  while (!current.done && trajectory.steps.size() < max_steps) {
    env::ActionToken action = choose(current);
    TrajectoryStep step;
    step.fingerprint = env::state_fingerprint(current.snapshot);
    step.observation = current.observation;
    step.candidates = current.candidates;
    step.action = action;
    step.provenance = provenance;
    env::StepResult next = env.step(action);
    step.snapshot = std::move(current.snapshot);
    trajectory.steps.push_back(std::move(step));
    current = std::move(next);
  }
  trajectory.terminal_reward = current.done && current.reward == 1.0 ? 1 : 0;
}

}  // namespace eef::core
