#include <doctest.h>

#include <numeric>
#include <set>

#include "eef/core/eef.hpp"
#include "eef/experts/expert.hpp"
#include "fixtures.hpp"

using namespace eef;
using namespace eef::core;

namespace {

struct Setup {
  env::MiniShopEnv shop = fixtures::reference_shop();
  std::vector<env::ContextId> contexts;
  std::vector<Trajectory> experts;
  policy::Featurizer fz;
  policy::Policy init{policy::PolicyParams::zeros(fz), fz};
  policy::TrainConfig train{0.05, 6, 64, 1};

  explicit Setup(std::size_t n = 16) {
    contexts.assign(shop.train_contexts().begin(), shop.train_contexts().begin() + static_cast<std::ptrdiff_t>(n));
    experts = experts::generate_expert_dataset(shop, contexts, experts::strong_profile(), 1).trajectories;
  }
};

std::set<std::pair<std::string, std::vector<std::string>>> outcome_set(const std::vector<Trajectory>& ts) {
  std::set<std::pair<std::string, std::vector<std::string>>> out;
  for (const auto& t : ts)
    out.insert({std::to_string(t.start.context.id) + "/" + std::to_string(t.start.origin.expert_traj_id) + "/" +
                    std::to_string(t.start.origin.state_index),
                fixtures::actions(t)});
  return out;
}

}  // namespace

TEST_CASE("EEF config validation and the temperature ladder") {
  CHECK(temperature_ladder() == std::vector<double>{0.2, 0.35, 0.5, 0.65, 0.8, 0.95});
  EEFConfig c;
  CHECK(c.M == 5);
  CHECK(c.I == 4);
  CHECK_FALSE(c.warm_start);
  CHECK_NOTHROW(c.validate());
  c.k_initial = 7;
  CHECK_THROWS(c.validate());
  c = {};
  c.M = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.I = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("rollout") {
  Setup s(4);
  Rng rng(1);
  const Trajectory* longest = &s.experts[0];
  for (const auto& e : s.experts)
    if (e.size() > longest->size()) longest = &e;
  REQUIRE(longest->size() >= 3);

  SUBCASE("expert-state origin copies the prefix") {
    auto t = rollout(s.init, s.shop, {longest->start.context, Origin::expert_state(longest->id, 2)}, longest, 0.5,
                     rng, s.shop.horizon(), 77, 1);
    REQUIRE(t.size() >= 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(t.steps[i].action == longest->steps[i].action);
      CHECK(t.steps[i].fingerprint == longest->steps[i].fingerprint);
      CHECK(t.steps[i].provenance.is_expert());
    }
    for (std::size_t i = 2; i < t.size(); ++i) CHECK(t.steps[i].provenance == Provenance::policy(1));
    if (t.size() > 2) CHECK(t.steps[2].fingerprint == longest->steps[2].fingerprint);
  }
  SUBCASE("horizon cut gives reward 0") {
    auto t = rollout(s.init, s.shop, {s.contexts[0], Origin::initial()}, nullptr, 1.0, rng, 1, 5, 1);
    CHECK(t.size() == 1);
    CHECK(t.terminal_reward == 0);
  }
  SUBCASE("errors carry the trajectory context") {
    try {
      rollout(s.init, s.shop, {longest->start.context, Origin::expert_state(longest->id, 999)}, longest, 1.0, rng,
              15, 5, 1);
      FAIL("expected an error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("rollout 5") != std::string::npos);
    }
  }
}

TEST_CASE("explore_iteration") {
  Setup s;
  EEFConfig cfg;
  cfg.seed = 3;
  auto r = explore_iteration(s.init, s.shop, s.contexts, s.experts, cfg, 1);
  std::size_t expected = s.contexts.size();
  for (const auto& e : s.experts) expected += select_expert_states(e, cfg.M).size();
  CHECK(r.trajectories.size() == expected);
  CHECK(r.trajectories.size() == rollouts_per_iteration(s.contexts.size(), s.experts, cfg));
  CHECK(r.initial_success.size() == s.contexts.size());
  for (const auto& e : s.experts) {
    const auto& o = r.expert_outcomes.at(e.id);
    CHECK(o.count(0) == 1);
    for (auto i : select_expert_states(e, cfg.M)) CHECK(o.count(i) == 1);
  }
  for (const auto& t : r.trajectories) CHECK((t.id >> kExplorationIdShift) == 1);

  SUBCASE("k_initial rollouts per context") {
    EEFConfig six = cfg;
    six.k_initial = 6;
    six.explore_expert_states = false;
    auto r6 = explore_iteration(s.init, s.shop, s.contexts, s.experts, six, 1);
    CHECK(r6.trajectories.size() == 6 * s.contexts.size());
  }
  SUBCASE("schedule independence") {
    std::vector<env::ContextId> rev(s.contexts.rbegin(), s.contexts.rend());
    std::vector<Trajectory> erev(s.experts.rbegin(), s.experts.rend());
    auto r2 = explore_iteration(s.init, s.shop, rev, erev, cfg, 1);
    CHECK(outcome_set(r.trajectories) == outcome_set(r2.trajectories));
  }
}

TEST_CASE("run_eef") {
  Setup s;
  EEFConfig cfg;
  cfg.seed = 5;
  auto run = run_eef(s.shop, s.contexts, s.experts, s.init, cfg, s.train);
  REQUIRE(run.policies.size() == cfg.I);
  REQUIRE(run.iterations.size() == cfg.I);
  CHECK(run.explorations.size() == cfg.I - 1);

  SUBCASE("budget accounting") {
    CHECK(run.total_rollouts == (cfg.I - 1) * rollouts_per_iteration(s.contexts.size(), s.experts, cfg));
  }
  SUBCASE("repository purity and mask-start validity") {
    for (const auto& t : run.repository.entries()) CHECK(t.positive());
    for (const auto& rec : run.iterations)
      for (const auto& ex : rec.examples) {
        const auto& t = run.repository.get(ex.trajectory_id);
        REQUIRE(ex.mask_start < t.size());
        CHECK(t.steps[ex.mask_start].fingerprint == ex.fingerprint);
      }
    for (const auto& rec : run.iterations)
      for (const auto& st : rec.recovery_states) {
        bool found = false;
        for (const auto& e : s.experts)
          if (e.id == st.expert_traj_id) found = e.steps[st.state_index].fingerprint == st.fingerprint;
        CHECK(found);
      }
  }
  SUBCASE("deterministic") {
    auto again = run_eef(s.shop, s.contexts, s.experts, s.init, cfg, s.train);
    CHECK(again.policies == run.policies);
    CHECK(again.total_rollouts == run.total_rollouts);
  }
  SUBCASE("each iteration restarts from behavior cloning unless warm-started") {
    EEFConfig warm = cfg;
    warm.warm_start = true;
    auto w = run_eef(s.shop, s.contexts, s.experts, s.init, warm, s.train);
    CHECK(w.policies[0] == run.policies[0]);
    CHECK(w.policies[1] == run.policies[1]);
    CHECK_FALSE(w.policies.back() == run.policies.back());
  }
}

TEST_CASE("degenerate iteration counts reduce to SFT-POS") {
  Setup s;
  auto sft_pos = train_offline(s.shop, s.experts, OfflineVariant::sft_pos, s.init.params(), s.train);
  EEFConfig one;
  one.I = 1;
  one.seed = 9;
  auto eef = run_eef(s.shop, s.contexts, s.experts, s.init, one, s.train);
  REQUIRE(eef.policies.size() == 1);
  CHECK(eef.policies[0] == sft_pos.params());
  CHECK(eef.total_rollouts == 0);
  auto rft = run_rft(s.shop, s.contexts, s.experts, s.init, 1, 1, 9, s.train);
  CHECK(rft.policies[0] == sft_pos.params());
  CHECK_THROWS(run_rft(s.shop, s.contexts, s.experts, s.init, 0, 2, 9, s.train));
}

TEST_CASE("run_rft") {
  Setup s;
  auto rft = run_rft(s.shop, s.contexts, s.experts, s.init, 3, 3, 2, s.train);
  CHECK(rft.total_rollouts == 2 * s.contexts.size() * 3);
  for (const auto& rec : rft.iterations) {
    CHECK(rec.recovery_states.empty());
    for (const auto& ex : rec.examples) CHECK(ex.kind == ImportantState::Kind::initial);
  }
  for (const auto& d : rft.explorations)
    for (const auto& t : d) CHECK(t.start.origin.kind == Origin::Kind::initial);
}

TEST_CASE("no positive demonstrations") {
  Setup s;
  std::vector<Trajectory> negatives;
  for (const auto& e : s.experts)
    if (!e.positive()) negatives.push_back(e);
  REQUIRE_FALSE(negatives.empty());
  EEFConfig cfg;
  cfg.I = 2;
  auto run = run_eef(s.shop, s.contexts, negatives, s.init, cfg, s.train);
  CHECK(run.policies[0] == s.init.params());
  REQUIRE_FALSE(run.warnings.empty());
  CHECK(run.warnings[0].find("behavior cloning") != std::string::npos);
  CHECK_THROWS(train_offline(s.shop, negatives, OfflineVariant::sft_pos, s.init.params(), s.train));
  CHECK_THROWS(run_eef(s.shop, s.contexts, std::vector<Trajectory>{}, s.init, cfg, s.train));
}

TEST_CASE("offline variants") {
  Setup s;
  std::vector<Trajectory> positives;
  for (const auto& e : s.experts)
    if (e.positive()) positives.push_back(e);
  auto all = train_offline(s.shop, positives, OfflineVariant::sft_all, s.init.params(), s.train);
  auto pos = train_offline(s.shop, positives, OfflineVariant::sft_pos, s.init.params(), s.train);
  CHECK(all.params() == pos.params());

  auto fz = featurizer_for(OfflineVariant::nat);
  auto nat = train_offline(s.shop, s.experts, OfflineVariant::nat, policy::PolicyParams::zeros(fz), s.train);
  CHECK(nat.params().weights.size() == fz.dimension());
  CHECK_THROWS(train_offline(s.shop, s.experts, OfflineVariant::nat, s.init.params(), s.train));
  // Evaluation always sees the flag off.
  auto first = s.shop.reset(s.contexts[0]);
  auto probs = nat.action_distribution(first.observation, first.candidates, s.shop.constraints(s.contexts[0]), 1.0);
  CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0));

  for (auto v : {OfflineVariant::sft_all, OfflineVariant::sft_pos, OfflineVariant::nat})
    CHECK(offline_variant_from_string(to_string(v)) == v);
  CHECK_THROWS(offline_variant_from_string("dpo"));
}
