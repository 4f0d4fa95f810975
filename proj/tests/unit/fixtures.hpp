#pragma once

#include <string>
#include <vector>

#include "eef/common/random.hpp"
#include "eef/core/trajectory.hpp"
#include "eef/env/chainworld.hpp"
#include "eef/env/minishop.hpp"

namespace fixtures {

// Generated once per test binary; copy before mutating episode state.
inline const eef::env::MiniShopEnv& reference_shop() {
  static const eef::env::MiniShopEnv env = eef::env::generate_minishop({});
  return env;
}

inline const eef::env::ChainWorldEnv& reference_chain() {
  static const eef::env::ChainWorldEnv env = eef::env::generate_chainworld({});
  return env;
}

/// Uniformly random candidates until done or the horizon.
inline eef::core::Trajectory random_episode(eef::env::Environment& env, eef::env::ContextId ctx, std::uint64_t seed,
                                            std::uint64_t id = 0) {
  eef::Rng rng(seed);
  eef::core::Trajectory t;
  t.id = id;
  t.start = {ctx, eef::core::Origin::initial()};
  eef::core::extend_episode(
      env, env.reset(ctx), t, [&](const eef::env::StepResult& s) { return s.candidates[rng.below(s.candidates.size())]; },
      eef::core::Provenance::policy(0), env.horizon());
  return t;
}

/// Steps carry only what the selection logic reads: fingerprint, action and provenance.
inline eef::core::Trajectory synthetic(std::uint64_t id, std::vector<eef::env::FingerprintId> fps,
                                       std::vector<bool> expert, int reward = 1) {
  eef::core::Trajectory t;
  t.id = id;
  t.terminal_reward = reward;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    eef::core::TrajectoryStep s;
    s.fingerprint = fps[i];
    s.action.text = "a" + std::to_string(id) + "_" + std::to_string(i);
    s.provenance = expert[i] ? eef::core::Provenance::expert("strong") : eef::core::Provenance::policy(1);
    t.steps.push_back(std::move(s));
  }
  return t;
}

inline std::vector<std::string> actions(const eef::core::Trajectory& t) {
  std::vector<std::string> out;
  for (const auto& s : t.steps) out.push_back(s.action.text);
  return out;
}

}  // namespace fixtures
