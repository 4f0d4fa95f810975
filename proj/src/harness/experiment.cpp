#include "eef/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace eef::harness {

namespace {

constexpr std::uint64_t kValidationStream = 0x76616cULL;
constexpr std::uint64_t kCalibrationStream = 0x63616cULL;
constexpr std::uint64_t kExpertStream = 0x657870ULL;

core::OfflineVariant offline_variant(Method m) {
  switch (m) {
    case Method::sft_all: return core::OfflineVariant::sft_all;
    case Method::sft_pos: return core::OfflineVariant::sft_pos;
    case Method::nat: return core::OfflineVariant::nat;
    default: throw std::invalid_argument("not an offline method: " + std::string(to_string(m)));
  }
}

bool iterative(Method m) { return m == Method::eef || m == Method::rft; }

}  // namespace

ContextSplit carve_validation(std::span<const env::ContextId> train, double fraction, std::uint64_t seed) {
  std::vector<env::ContextId> order(train.begin(), train.end());
  Rng rng(derive_seed({seed, kValidationStream}));
  rng.shuffle(order.begin(), order.end());
  const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) throw std::invalid_argument("carve_validation: no contexts left to train on");
  ContextSplit out;
  out.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.fit.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.fit.begin(), out.fit.end());
  return out;
}

ExpertSetup prepare_experts(env::Environment& env, const ExperimentConfig& config,
                            std::span<const env::ContextId> fit, std::uint64_t seed) {
  ExpertSetup out;
  const auto& calibration = env.train_contexts();
  for (std::size_t k = 0; k < config.experts.size(); ++k) {
    const ExpertSpec& spec = config.experts[k];
    ExpertRecord rec;
    rec.spec = spec;
    rec.first_id = static_cast<std::uint64_t>(k) << kExpertIdShift;
    const std::uint64_t eval_seed = derive_seed({seed, kCalibrationStream, k});
    rec.profile = spec.calibrate
                      ? experts::calibrate_profile(env, calibration, spec.profile, spec.target,
                                                   config.calibration_tolerance, {eval_seed, 24})
                      : spec.profile;
    rec.calibrated_rate =
        experts::generate_expert_dataset(env, calibration, rec.profile, eval_seed).stats.positive_fraction();
    auto ds = experts::generate_expert_dataset(env, fit, rec.profile, derive_seed({seed, kExpertStream, k}),
                                               rec.first_id);
    rec.stats = ds.stats;
    out.dataset.insert(out.dataset.end(), std::make_move_iterator(ds.trajectories.begin()),
                       std::make_move_iterator(ds.trajectories.end()));
    out.records.push_back(std::move(rec));
  }
  return out;
}

MethodRun train_method(env::Environment& env, const ExperimentConfig& config, Method method,
                       std::span<const env::ContextId> fit, std::span<const core::Trajectory> dataset,
                       std::uint64_t seed) {
  MethodRun out;
  out.method = method;
  policy::TrainConfig train = config.train;
  train.seed = seed;
  if (iterative(method)) {
    policy::Policy init(policy::PolicyParams::zeros(out.featurizer), out.featurizer);
    core::RunResult run;
    if (method == Method::eef) {
      core::EEFConfig eef = config.eef;
      eef.seed = seed;
      run = core::run_eef(env, fit, dataset, init, eef, train);
    } else {
      run = core::run_rft(env, fit, dataset, init, config.rft_samples, config.eef.I, seed, train);
    }
    out.policies = run.policies;
    out.total_rollouts = run.total_rollouts;
    out.run = std::move(run);
  } else {
    const auto variant = offline_variant(method);
    out.featurizer = core::featurizer_for(variant);
    auto trained = core::train_offline(env, dataset, variant, policy::PolicyParams::zeros(out.featurizer), train);
    out.policies.push_back(trained.params());
  }
  return out;
}

Selection select_model(env::Environment& env, const policy::Featurizer& featurizer,
                       std::span<const policy::PolicyParams> candidates,
                       std::span<const env::ContextId> validation) {
  if (candidates.empty()) throw std::invalid_argument("select_model: no candidates");
  Selection out;
  out.index = candidates.size() - 1;
  if (validation.empty()) return out;
  double best = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double w = evaluate(policy::Policy(candidates[i], featurizer), env, validation).win_rate;
    out.validation_win_rates.push_back(w);
    if (w >= best) {
      best = w;
      out.index = i;
    }
  }
  return out;
}

std::vector<std::uint64_t> run_seeds(const ExperimentConfig& config) {
  std::vector<std::uint64_t> out;
  for (std::size_t j = 0; j < config.n_seeds; ++j) out.push_back(config.seed + j);
  return out;
}

namespace {

SeedResult finish_seed(env::Environment& env, std::uint64_t seed,
                       const ContextSplit& split, const ExpertSetup& experts, MethodRun trained,
                       SeedArtifacts* artifacts) {
  SeedResult r;
  r.seed = seed;
  r.experts = experts.records;
  r.budget = trained.total_rollouts;
  Selection sel = select_model(env, trained.featurizer, trained.policies, split.validation);
  r.selected_iteration = sel.index;
  r.validation_curve = sel.validation_win_rates;
  const auto& test = env.test_contexts();
  EvalResult chosen;
  for (std::size_t i = 0; i < trained.policies.size(); ++i) {
    EvalResult e = evaluate(policy::Policy(trained.policies[i], trained.featurizer), env, test);
    r.test_curve.push_back(e.win_rate);
    if (i == sel.index) chosen = std::move(e);
  }
  r.win_rate = chosen.win_rate;
  r.avg_reward = chosen.avg_reward;
  r.navigation = navigation_stats(chosen.trajectories);
  if (const auto* shop = dynamic_cast<const env::MiniShopEnv*>(&env))
    r.by_difficulty = solve_by_difficulty(*shop, chosen.trajectories);
  if (artifacts != nullptr) {
    artifacts->split = split;
    artifacts->experts = experts;
    artifacts->trained = std::move(trained);
    artifacts->test = std::move(chosen);
  }
  return r;
}

}  // namespace

SeedResult run_seed(env::Environment& env, const ExperimentConfig& config, Method method, std::uint64_t seed,
                    SeedArtifacts* artifacts) {
  ContextSplit split = carve_validation(env.train_contexts(), config.validation_fraction, seed);
  ExpertSetup experts = prepare_experts(env, config, split.fit, seed);
  MethodRun trained = train_method(env, config, method, split.fit, experts.dataset, seed);
  return finish_seed(env, seed, split, experts, std::move(trained), artifacts);
}

Stat aggregate(std::span<const double> values) {
  Stat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string method_label(const ExperimentConfig& config, Method method) {
  switch (method) {
    case Method::eef: return fmt::format("EEF M={} I={}", config.eef.M, config.eef.I);
    case Method::rft: return fmt::format("RFT x{} I={}", config.rft_samples, config.eef.I);
    case Method::sft_all: return "SFT-ALL";
    case Method::sft_pos: return "SFT-POS";
    case Method::nat: return "NAT";
  }
  return "?";
}

MethodReport summarize(const ExperimentConfig& config, Method method, std::vector<SeedResult> seeds) {
  MethodReport rep;
  rep.method = method;
  rep.label = method_label(config, method);
  auto stat = [&](auto get) {
    std::vector<double> v;
    for (const auto& s : seeds) v.push_back(get(s));
    return aggregate(v);
  };
  rep.win_rate = stat([](const SeedResult& s) { return s.win_rate; });
  rep.avg_reward = stat([](const SeedResult& s) { return s.avg_reward; });
  rep.next_success_pct = stat([](const SeedResult& s) { return s.navigation.next_success_pct; });
  rep.back_success_pct = stat([](const SeedResult& s) { return s.navigation.back_success_pct; });
  rep.next_attempt_pct = stat([](const SeedResult& s) { return s.navigation.next_attempt_pct; });
  rep.back_attempt_pct = stat([](const SeedResult& s) { return s.navigation.back_attempt_pct; });
  rep.budget = stat([](const SeedResult& s) { return static_cast<double>(s.budget); });
  if (!seeds.empty())
    for (const auto& [d, _] : seeds.front().by_difficulty)
      rep.by_difficulty[d] = stat([d](const SeedResult& s) { return s.by_difficulty.at(d).rate(); });
  rep.seeds = std::move(seeds);
  return rep;
}

std::vector<MethodReport> run_experiment(const ExperimentConfig& config, std::span<const Method> methods) {
  config.validate();
  auto env = make_environment(config);
  std::vector<std::vector<SeedResult>> per_method(methods.size());
  for (std::uint64_t seed : run_seeds(config)) {
    ContextSplit split = carve_validation(env->train_contexts(), config.validation_fraction, seed);
    ExpertSetup experts = prepare_experts(*env, config, split.fit, seed);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      MethodRun trained = train_method(*env, config, methods[m], split.fit, experts.dataset, seed);
      per_method[m].push_back(finish_seed(*env, seed, split, experts, std::move(trained), nullptr));
    }
  }
  std::vector<MethodReport> out;
  for (std::size_t m = 0; m < methods.size(); ++m)
    out.push_back(summarize(config, methods[m], std::move(per_method[m])));
  return out;
}

std::vector<SweepEntry> default_sweep() {
  std::vector<SweepEntry> out;
  for (std::size_t n = 1; n <= 6; ++n) out.push_back({Method::rft, n});
  for (std::size_t m : {1, 2, 5}) out.push_back({Method::eef, m});
  return out;
}

std::vector<SweepRow> budget_sweep(const ExperimentConfig& config, std::span<const SweepEntry> entries) {
  config.validate();
  std::vector<SweepRow> rows(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!iterative(entries[i].method))
      throw std::invalid_argument(fmt::format("budget_sweep: method {} has no budget", to_string(entries[i].method)));
    if (entries[i].budget < 1) throw std::invalid_argument("budget_sweep: budget must be at least 1");
    rows[i].entry = entries[i];
  }
  if (entries.empty()) return rows;

  auto env = make_environment(config);
  for (std::uint64_t seed : run_seeds(config)) {
    ContextSplit split = carve_validation(env->train_contexts(), config.validation_fraction, seed);
    ExpertSetup experts = prepare_experts(*env, config, split.fit, seed);
    policy::Featurizer featurizer;
    policy::Policy init(policy::PolicyParams::zeros(featurizer), featurizer);
    policy::TrainConfig train = config.train;
    train.seed = seed;
    std::optional<policy::PolicyParams> bc;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      core::RunResult run;
      if (entries[i].method == Method::eef) {
        core::EEFConfig eef = config.eef;
        eef.seed = seed;
        eef.M = entries[i].budget;
        eef.I = 2;
        run = core::run_eef(*env, split.fit, experts.dataset, init, eef, train);
      } else {
        run = core::run_rft(*env, split.fit, experts.dataset, init, entries[i].budget, 2, seed, train);
      }
      // Behavior cloning is deterministic, so every entry starts from the same parameters.
      if (!bc) bc = run.policies.front();
      else if (!(*bc == run.policies.front()))
        throw std::logic_error("budget_sweep: behavior-cloned starting points differ");
      rows[i].rollouts.push_back(run.total_rollouts);
      rows[i].win_rates.push_back(
          evaluate(policy::Policy(run.policies.back(), featurizer), *env, env->test_contexts()).win_rate);
    }
  }
  for (auto& row : rows) row.win_rate = aggregate(row.win_rates);
  return rows;
}

}  // namespace eef::harness
