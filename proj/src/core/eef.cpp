#include "eef/core/eef.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace eef::core {

namespace {

constexpr std::uint64_t kInitialStream = 0x696e6974ULL;
constexpr std::uint64_t kExpertStream = 0x65787074ULL;
constexpr std::uint64_t kTrainStream = 0x7472616eULL;

std::string describe(const TrajectoryStart& start) {
  std::string ctx = fmt::format("context {}/{}", start.context.id, env::to_string(start.context.split));
  if (start.origin.kind == Origin::Kind::initial) return ctx + ", initial state";
  return fmt::format("{}, expert trajectory {} state {}", ctx, start.origin.expert_traj_id, start.origin.state_index);
}

policy::TrainConfig iteration_train_config(const policy::TrainConfig& base, std::size_t iteration) {
  policy::TrainConfig c = base;
  c.seed = derive_seed({base.seed, kTrainStream, iteration});
  return c;
}

}  // namespace

std::vector<double> temperature_ladder() { return {0.2, 0.35, 0.5, 0.65, 0.8, 0.95}; }

void EEFConfig::validate() const {
  if (M < 1) throw std::invalid_argument("EEFConfig: M must be at least 1");
  if (I < 1) throw std::invalid_argument("EEFConfig: I must be at least 1");
  if (k_initial < 1) throw std::invalid_argument("EEFConfig: k_initial must be at least 1");
  if (k_initial > temperatures.size())
    throw std::invalid_argument(fmt::format("EEFConfig: k_initial {} exceeds the {} configured temperatures",
                                            k_initial, temperatures.size()));
  for (double t : temperatures)
    if (!(t > 0.0)) throw std::invalid_argument("EEFConfig: temperatures must be positive");
}

Trajectory rollout(const policy::Policy& policy, env::Environment& env, const TrajectoryStart& start,
                   const Trajectory* expert, double temperature, Rng& rng, std::size_t max_steps, std::uint64_t id,
                   std::uint32_t iteration) {
  Trajectory traj;
  traj.id = id;
  traj.start = start;
  try {
    const env::TaskConstraints constraints = env.constraints(start.context);
    env::StepResult current;
    if (start.origin.kind == Origin::Kind::initial) {
      current = env.reset(start.context);
    } else {
      const std::size_t i = start.origin.state_index;
      if (expert == nullptr || expert->id != start.origin.expert_traj_id)
        throw std::invalid_argument("rollout: expert trajectory not supplied");
      if (i >= expert->size()) throw std::invalid_argument("rollout: expert state index out of range");
      if (expert->steps[i].snapshot.internal_state.empty())
        throw std::invalid_argument("rollout: expert trajectory has no snapshots (rehydrate it first)");
      traj.steps.assign(expert->steps.begin(), expert->steps.begin() + static_cast<std::ptrdiff_t>(i));
      current = env.restore(expert->steps[i].snapshot);
    }
    extend_episode(
        env, std::move(current), traj,
        [&](const env::StepResult& s) {
          return policy.sample_action(s.observation, s.candidates, constraints, temperature, rng);
        },
        Provenance::policy(iteration), max_steps);
  } catch (const env::EnvError& e) {
    throw env::EnvError(fmt::format("rollout {} ({}): {}", id, describe(start), e.what()));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(fmt::format("rollout {} ({}): {}", id, describe(start), e.what()));
  }
  return traj;
}

std::size_t rollouts_per_iteration(std::size_t n_contexts, std::span<const Trajectory> experts,
                                   const EEFConfig& config) {
  std::size_t n = n_contexts * config.k_initial;
  if (config.explore_expert_states)
    for (const auto& e : experts) n += select_expert_states(e, config.M).size();
  return n;
}

ExplorationResult explore_iteration(const policy::Policy& policy, env::Environment& env,
                                    std::span<const env::ContextId> contexts, std::span<const Trajectory> experts,
                                    const EEFConfig& config, std::uint32_t iteration) {
  config.validate();
  ExplorationResult out;
  const std::size_t horizon = env.horizon();
  std::uint64_t next_id = static_cast<std::uint64_t>(iteration) << kExplorationIdShift;

  for (const auto& ctx : contexts) {
    bool any = false;
    for (std::size_t k = 0; k < config.k_initial; ++k) {
      Rng rng(derive_seed({config.seed, iteration, kInitialStream, ctx.id, static_cast<std::uint64_t>(ctx.split), k}));
      auto t = rollout(policy, env, {ctx, Origin::initial()}, nullptr, config.temperatures[k], rng, horizon,
                       next_id++, iteration);
      any = any || t.positive();
      out.trajectories.push_back(std::move(t));
    }
    out.initial_success[ctx] = any;
  }

  for (const auto& e : experts) {
    auto& outcomes = out.expert_outcomes[e.id];
    if (auto it = out.initial_success.find(e.start.context); it != out.initial_success.end())
      outcomes[0] = it->second;
    if (!config.explore_expert_states) continue;
    for (std::size_t idx : select_expert_states(e, config.M)) {
      Rng rng(derive_seed({config.seed, iteration, kExpertStream, e.id, idx}));
      auto t = rollout(policy, env, {e.start.context, Origin::expert_state(e.id, idx)}, &e, config.temperatures[0],
                       rng, horizon, next_id++, iteration);
      outcomes[idx] = t.positive();
      out.trajectories.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<policy::FeaturizedExample> featurize_examples(const env::Environment& env,
                                                          std::span<const TrainingExample> examples,
                                                          const TrajectoryRepository& repository,
                                                          const policy::Featurizer& featurizer) {
  std::vector<policy::FeaturizedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const Trajectory& t = repository.get(ex.trajectory_id);
    out.push_back(policy::featurize_example(t, ex.mask_start, env.constraints(t.start.context), featurizer));
  }
  return out;
}

namespace {

RunResult run_loop(env::Environment& env, std::span<const env::ContextId> contexts,
                   std::span<const Trajectory> experts, const policy::Policy& policy_init, const EEFConfig& config,
                   const policy::TrainConfig& train_config) {
  config.validate();
  train_config.validate();
  if (experts.empty()) throw std::invalid_argument("run_eef: expert dataset is empty");
  for (const auto& e : experts)
    if (e.id >> kExplorationIdShift)
      throw std::invalid_argument(fmt::format("run_eef: expert trajectory id {} is too large", e.id));

  const policy::Featurizer& featurizer = policy_init.featurizer();
  RunResult run;

  // Iteration 0: behavior cloning on the positive expert trajectories.
  IterationRecord bc;
  for (const auto& e : experts) {
    if (!e.positive() || !run.repository.add(e)) continue;
    bc.examples.push_back({e.id, 0, e.steps.empty() ? 0 : e.steps[0].fingerprint, ImportantState::Kind::initial});
  }
  bc.repository_size = run.repository.size();
  bc.positives = bc.added = run.repository.size();
  policy::PolicyParams bc_params = policy_init.params();
  if (bc.examples.empty()) {
    run.warnings.push_back("no positive expert trajectories; skipping behavior cloning");
  } else {
    auto data = featurize_examples(env, bc.examples, run.repository, featurizer);
    bc_params = policy::sft_update(policy_init.params(), data, iteration_train_config(train_config, 0));
    bc.trained = true;
  }
  run.policies.push_back(bc_params);
  run.iterations.push_back(std::move(bc));

  std::vector<ImportantState> initial_states;
  for (const auto& ctx : contexts) {
    ImportantState s;
    s.kind = ImportantState::Kind::initial;
    s.context = ctx;
    s.fingerprint = env::state_fingerprint(env.reset(ctx).snapshot);
    initial_states.push_back(s);
  }

  for (std::size_t i = 1; i < config.I; ++i) {
    const auto iteration = static_cast<std::uint32_t>(i);
    IterationRecord rec;
    rec.iteration = i;
    try {
      policy::Policy current(run.policies.back(), featurizer);
      ExplorationResult explored = explore_iteration(current, env, contexts, experts, config, iteration);
      rec.rollouts = explored.trajectories.size();
      for (const auto& t : explored.trajectories) rec.positives += t.positive() ? 1 : 0;
      rec.added = update_repository(run.repository, explored.trajectories);
      rec.repository_size = run.repository.size();

      if (config.use_recovery) {
        for (const auto& e : experts) {
          const auto& outcomes = explored.expert_outcomes.at(e.id);
          if (auto idx = need_recover_states(e, config.M, outcomes)) {
            ImportantState s;
            s.kind = ImportantState::Kind::recovery;
            s.context = e.start.context;
            s.fingerprint = e.steps[*idx].fingerprint;
            s.expert_traj_id = e.id;
            s.state_index = *idx;
            rec.recovery_states.push_back(s);
          }
        }
      }

      rec.examples = build_training_set(initial_states, rec.recovery_states, run.repository);
      for (const auto& ex : rec.examples) rec.initial_solved += ex.kind == ImportantState::Kind::initial ? 1 : 0;

      const policy::PolicyParams& base = config.warm_start ? run.policies.back() : bc_params;
      policy::PolicyParams next = base;
      if (rec.examples.empty()) {
        run.warnings.push_back(fmt::format("iteration {}: no solutions found; keeping the starting parameters", i));
      } else {
        auto data = featurize_examples(env, rec.examples, run.repository, featurizer);
        next = policy::sft_update(base, data, iteration_train_config(train_config, i));
        rec.trained = true;
      }
      run.total_rollouts += rec.rollouts;
      run.policies.push_back(std::move(next));
      run.explorations.push_back(std::move(explored.trajectories));
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("iteration {}: {}", i, e.what()));
    }
    run.iterations.push_back(std::move(rec));
  }
  return run;
}

}  // namespace

RunResult run_eef(env::Environment& env, std::span<const env::ContextId> contexts,
                  std::span<const Trajectory> experts, const policy::Policy& policy_init, const EEFConfig& config,
                  const policy::TrainConfig& train_config) {
  return run_loop(env, contexts, experts, policy_init, config, train_config);
}

RunResult run_rft(env::Environment& env, std::span<const env::ContextId> contexts,
                  std::span<const Trajectory> experts, const policy::Policy& policy_init, std::size_t N, std::size_t I,
                  std::uint64_t seed, const policy::TrainConfig& train_config) {
  if (N < 1) throw std::invalid_argument("run_rft: N must be at least 1");
  EEFConfig config;
  config.M = 1;
  config.I = I;
  config.k_initial = N;
  config.seed = seed;
  config.explore_expert_states = false;
  config.use_recovery = false;
  return run_loop(env, contexts, experts, policy_init, config, train_config);
}

std::string_view to_string(OfflineVariant v) {
  switch (v) {
    case OfflineVariant::sft_all: return "sft-all";
    case OfflineVariant::sft_pos: return "sft-pos";
    case OfflineVariant::nat: return "nat";
  }
  return "?";
}

OfflineVariant offline_variant_from_string(std::string_view s) {
  if (s == "sft-all" || s == "sft_all") return OfflineVariant::sft_all;
  if (s == "sft-pos" || s == "sft_pos") return OfflineVariant::sft_pos;
  if (s == "nat") return OfflineVariant::nat;
  throw std::invalid_argument("unknown offline variant '" + std::string(s) + "'");
}

policy::Featurizer featurizer_for(OfflineVariant variant) { return policy::Featurizer(variant == OfflineVariant::nat); }

policy::Policy train_offline(const env::Environment& env, std::span<const Trajectory> experts,
                             OfflineVariant variant, const policy::PolicyParams& init,
                             const policy::TrainConfig& train_config) {
  if (experts.empty()) throw std::invalid_argument("train_offline: expert dataset is empty");
  const policy::Featurizer featurizer = featurizer_for(variant);
  featurizer.check_schema(init.schema_version, init.weights.size());
  std::vector<policy::FeaturizedExample> data;
  for (const auto& t : experts) {
    if (variant == OfflineVariant::sft_pos && !t.positive()) continue;
    const bool negative = variant == OfflineVariant::nat && !t.positive();
    data.push_back(policy::featurize_example(t, 0, env.constraints(t.start.context), featurizer, negative));
  }
  if (data.empty())
    throw policy::TrainingError(fmt::format("train_offline ({}): no training examples", to_string(variant)));
  return {policy::sft_update(init, data, iteration_train_config(train_config, 0)), featurizer};
}

}  // namespace eef::core
