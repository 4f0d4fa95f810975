#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "eef/env/environment.hpp"

namespace eef::env {

/// Returns true for (state, action) pairs the search must not use.
using ActionFilter = std::function<bool(const StateSnapshot&, const ActionToken&)>;

/// Exhaustive breadth-first search over the action space from `start`,
/// deduplicating on internal state. Returns a shortest action sequence that
/// ends with reward 1 within `max_steps` total episode steps, or nullopt.
std::optional<std::vector<ActionToken>> oracle_solve(Environment& env, const StepResult& start,
                                                     std::size_t max_steps, const ActionFilter& exclude = {});

/// True when any action sequence from `start` reaches reward 1 in the horizon.
bool reward_reachable(Environment& env, const StepResult& start, std::size_t max_steps,
                      const ActionFilter& exclude = {});

}  // namespace eef::env
