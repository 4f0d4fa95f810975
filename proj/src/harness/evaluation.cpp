#include "eef/harness/evaluation.hpp"

#include <memory>
#include <stdexcept>

#include "eef/env/oracle.hpp"

namespace eef::harness {

EvalResult evaluate_agent(env::Environment& env, std::span<const env::ContextId> contexts, const AgentFactory& agent) {
  if (contexts.empty()) throw std::invalid_argument("evaluate: no contexts");
  EvalResult out;
  std::size_t wins = 0;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    core::Trajectory t;
    t.id = i;
    t.start = {contexts[i], core::Origin::initial()};
    env::StepResult first = env.reset(contexts[i]);
    core::ActionChooser choose = agent(contexts[i], first);
    core::extend_episode(env, std::move(first), t, choose, core::Provenance::policy(0), env.horizon());
    wins += t.positive() ? 1 : 0;
    out.trajectories.push_back(std::move(t));
  }
  out.win_rate = static_cast<double>(wins) / contexts.size();
  out.avg_reward = out.win_rate;
  return out;
}

EvalResult evaluate(const policy::Policy& policy, env::Environment& env, std::span<const env::ContextId> contexts,
                    const EvalMode& mode) {
  return evaluate_agent(env, contexts, [&](env::ContextId ctx, const env::StepResult&) -> core::ActionChooser {
    auto constraints = env.constraints(ctx);
    if (mode.kind == EvalMode::Kind::greedy)
      return [&policy, constraints](const env::StepResult& s) {
        return policy.greedy_action(s.observation, s.candidates, constraints);
      };
    auto rng = std::make_shared<Rng>(derive_seed({mode.seed, 0x6576616cULL, ctx.id, static_cast<std::uint64_t>(ctx.split)}));
    return [&policy, constraints, rng, t = mode.temperature](const env::StepResult& s) {
      return policy.sample_action(s.observation, s.candidates, constraints, t, *rng);
    };
  });
}

AgentFactory oracle_agent(env::Environment& env) {
  return [&env](env::ContextId, const env::StepResult& first) -> core::ActionChooser {
    auto scratch = std::shared_ptr<env::Environment>(env.clone());
    auto plan = env::oracle_solve(*scratch, first, env.horizon());
    auto actions = std::make_shared<std::vector<env::ActionToken>>(plan ? std::move(*plan) : std::vector<env::ActionToken>{});
    auto next = std::make_shared<std::size_t>(0);
    return [actions, next](const env::StepResult& s) {
      if (*next < actions->size()) return (*actions)[(*next)++];
      return s.candidates.front();
    };
  };
}

bool uses_next(const core::Trajectory& t) {
  for (const auto& s : t.steps)
    if (s.action.text == env::kClickNext) return true;
  return false;
}

bool uses_back(const core::Trajectory& t) {
  for (const auto& s : t.steps) {
    if (s.action.text != env::kClickBack || !env::is_shop_observation(s.observation)) continue;
    if (env::parse_shop_page(s.observation).kind == env::ShopPage::Kind::product) return true;
  }
  return false;
}

NavigationStats navigation_stats(std::span<const core::Trajectory> trajectories) {
  NavigationStats out;
  if (trajectories.empty()) return out;
  std::size_t ns = 0, bs = 0, na = 0, ba = 0;
  for (const auto& t : trajectories) {
    const bool n = uses_next(t);
    const bool b = uses_back(t);
    na += n;
    ba += b;
    ns += n && t.positive();
    bs += b && t.positive();
  }
  const double scale = 100.0 / static_cast<double>(trajectories.size());
  out.next_success_pct = ns * scale;
  out.back_success_pct = bs * scale;
  out.next_attempt_pct = na * scale;
  out.back_attempt_pct = ba * scale;
  return out;
}

std::map<env::Difficulty, SolveCount> solve_by_difficulty(const env::MiniShopEnv& env,
                                                          std::span<const core::Trajectory> trajectories) {
  std::map<env::Difficulty, SolveCount> out;
  for (auto d : {env::Difficulty::easy, env::Difficulty::needs_next, env::Difficulty::needs_back}) out[d];
  for (const auto& t : trajectories) {
    auto& c = out[env.task(t.start.context).difficulty];
    ++c.total;
    c.solved += t.positive() ? 1 : 0;
  }
  return out;
}

}  // namespace eef::harness
