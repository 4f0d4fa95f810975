#include "eef/env/oracle.hpp"

#include <deque>
#include <unordered_map>

namespace eef::env {

namespace {

struct Node {
  StateSnapshot snapshot;
  std::size_t parent = SIZE_MAX;
  ActionToken action;
};

}  // namespace

std::optional<std::vector<ActionToken>> oracle_solve(Environment& env, const StepResult& start,
                                                     std::size_t max_steps, const ActionFilter& exclude) {
  if (start.done) {
    if (start.reward == 1.0) return std::vector<ActionToken>{};
    return std::nullopt;
  }
  std::vector<Node> nodes;
  std::unordered_map<std::string, std::size_t> seen;
  std::deque<std::size_t> frontier;

  nodes.push_back({start.snapshot, SIZE_MAX, {}});
  seen.emplace(start.snapshot.internal_state, 0);
  frontier.push_back(0);

  auto unwind = [&](std::size_t leaf) {
    std::vector<ActionToken> path;
    for (std::size_t i = leaf; nodes[i].parent != SIZE_MAX; i = nodes[i].parent) path.push_back(nodes[i].action);
    return std::vector<ActionToken>(path.rbegin(), path.rend());
  };

  while (!frontier.empty()) {
    std::size_t cur = frontier.front();
    frontier.pop_front();
    if (nodes[cur].snapshot.step_index >= max_steps) continue;

    StateSnapshot here = nodes[cur].snapshot;
    StepResult at = env.restore(here);
    for (const auto& action : at.candidates) {
      if (exclude && exclude(here, action)) continue;
      env.restore(here);
      StepResult next = env.step(action);
      if (next.done) {
        if (next.reward == 1.0) {
          nodes.push_back({std::move(next.snapshot), cur, action});
          return unwind(nodes.size() - 1);
        }
        continue;
      }
      if (seen.contains(next.snapshot.internal_state)) continue;
      seen.emplace(next.snapshot.internal_state, nodes.size());
      nodes.push_back({std::move(next.snapshot), cur, action});
      frontier.push_back(nodes.size() - 1);
    }
  }
  return std::nullopt;
}

bool reward_reachable(Environment& env, const StepResult& start, std::size_t max_steps,
                      const ActionFilter& exclude) {
  return oracle_solve(env, start, max_steps, exclude).has_value();
}

}  // namespace eef::env
