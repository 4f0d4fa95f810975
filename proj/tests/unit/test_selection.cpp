#include <doctest.h>

#include <tuple>

#include "eef/core/selection.hpp"
#include "fixtures.hpp"

using namespace eef;
using namespace eef::core;

namespace {

// Evenly spaced interior states, written out directly.
std::vector<std::size_t> brute_select(std::size_t n, std::size_t M) {
  std::vector<std::size_t> out;
  const std::size_t l = n / (M + 1);
  if (l >= 1) {
    for (std::size_t m = 1; m <= M; ++m) out.push_back(m * l);
  } else {
    for (std::size_t i = 1; i <= M && i < n; ++i) out.push_back(i);
  }
  return out;
}

// Scan every adjacent (previous, current) pair of simulated indices.
std::optional<std::size_t> brute_recover(const std::vector<std::size_t>& sel, const SimulationOutcomes& o) {
  std::vector<std::size_t> chain{0};
  chain.insert(chain.end(), sel.begin(), sel.end());
  std::optional<std::size_t> best;
  for (std::size_t a = 0; a + 1 < chain.size(); ++a)
    if (o.at(chain[a]) && !o.at(chain[a + 1]) && (!best || chain[a + 1] < *best)) best = chain[a + 1];
  return best;
}

std::optional<std::tuple<std::size_t, std::size_t, std::uint64_t>> brute_cost(env::FingerprintId fp,
                                                                              const std::vector<Trajectory>& repo) {
  std::optional<std::tuple<std::size_t, std::size_t, std::uint64_t>> best;
  for (const auto& t : repo)
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t.steps[i].fingerprint == fp) {
        std::tuple<std::size_t, std::size_t, std::uint64_t> key{t.expert_actions_from(i), t.size() - i, t.id};
        if (!best || key < *best) best = key;
      }
  return best;
}

}  // namespace

TEST_CASE("select_expert_states") {
  CHECK(select_expert_states(17, 5) == std::vector<std::size_t>{2, 4, 6, 8, 10});
  CHECK(select_expert_states(12, 5) == std::vector<std::size_t>{2, 4, 6, 8, 10});
  CHECK(select_expert_states(4, 5) == std::vector<std::size_t>{1, 2, 3});
  CHECK(select_expert_states(1, 5).empty());
  CHECK(select_expert_states(0, 3).empty());
  CHECK_THROWS(select_expert_states(10, 0));
  for (std::size_t n = 1; n <= 60; ++n)
    for (std::size_t M = 1; M <= 10; ++M) {
      auto got = select_expert_states(n, M);
      REQUIRE(got == brute_select(n, M));
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] < n);
        if (i > 0) CHECK(got[i] > got[i - 1]);
      }
      if (n / (M + 1) >= 1) CHECK(got.size() == M);
    }
}

TEST_CASE("need_recover_states") {
  std::vector<std::size_t> sel{3, 6, 9, 12};
  CHECK(need_recover_states(sel, {{0, false}, {3, true}, {6, false}, {9, true}, {12, false}}) == 6u);
  CHECK_FALSE(need_recover_states(sel, {{0, false}, {3, false}, {6, false}, {9, false}, {12, false}}));
  CHECK(need_recover_states(std::vector<std::size_t>{3, 6}, {{0, true}, {3, false}, {6, false}}) == 3u);
  CHECK_THROWS_AS(need_recover_states(sel, {{0, true}, {3, true}}), std::invalid_argument);
  CHECK_THROWS_AS(need_recover_states(sel, {{3, true}, {6, true}, {9, true}, {12, true}}), std::invalid_argument);

  Rng rng(3);
  for (int inst = 0; inst < 2000; ++inst) {
    const std::size_t n = 1 + rng.below(60), M = 1 + rng.below(10);
    auto s = brute_select(n, M);
    SimulationOutcomes o{{0, rng.bernoulli(0.5)}};
    for (auto i : s) o[i] = rng.bernoulli(0.5);
    REQUIRE(need_recover_states(s, o) == brute_recover(s, o));
  }
}

TEST_CASE("repository") {
  TrajectoryRepository repo;
  auto a = fixtures::synthetic(1, {10, 11, 12}, {true, false, false});
  CHECK(repo.add(a));
  CHECK(repo.size() == 1);
  CHECK(repo.lookup(11).size() == 1);
  CHECK(repo.lookup(99).empty());

  auto dup = a;
  dup.id = 2;
  CHECK_FALSE(repo.add(dup));
  CHECK(repo.size() == 1);
  CHECK_THROWS(repo.add(fixtures::synthetic(3, {1}, {false}, 0)));
  auto same_id = fixtures::synthetic(1, {5}, {false});
  CHECK_THROWS(repo.add(same_id));

  std::vector<Trajectory> batch{fixtures::synthetic(4, {20}, {false}, 0), fixtures::synthetic(5, {21}, {false}, 0)};
  CHECK(update_repository(repo, batch) == 0);
  batch.push_back(fixtures::synthetic(6, {22, 23}, {false, false}));
  CHECK(update_repository(repo, batch) == 1);
  CHECK(repo.lookup(23).size() == 1);
  for (const auto& t : repo.entries()) CHECK(t.positive());
}

TEST_CASE("get_traj prefers fewer expert actions") {
  // s0 appears in two trajectories resumed from expert states l and 3l.
  const std::size_t l = 2;
  std::vector<env::FingerprintId> fps_a, fps_b;
  std::vector<bool> exp_a, exp_b;
  for (std::size_t i = 0; i < 8; ++i) {
    fps_a.push_back(100 + i);
    exp_a.push_back(i < l);
    fps_b.push_back(i < 3 * l ? 100 + i : 200 + i);
    exp_b.push_back(i < 3 * l);
  }
  TrajectoryRepository repo;
  repo.add(fixtures::synthetic(7, fps_b, exp_b));
  repo.add(fixtures::synthetic(8, fps_a, exp_a));
  auto sol = get_traj(100, repo);
  REQUIRE(sol);
  CHECK(sol->trajectory_id == 8);
  CHECK(sol->step_index == 0);
  CHECK_FALSE(get_traj(999, repo));

  Rng rng(17);
  for (int inst = 0; inst < 1000; ++inst) {
    TrajectoryRepository r;
    std::vector<Trajectory> all;
    const std::size_t count = 1 + rng.below(50);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t n = 1 + rng.below(60);
      std::vector<env::FingerprintId> fps;
      std::vector<bool> ex;
      for (std::size_t i = 0; i < n; ++i) {
        fps.push_back(rng.below(40));
        ex.push_back(rng.bernoulli(0.4));
      }
      auto t = fixtures::synthetic(1000 - k, fps, ex);
      r.add(t);
      all.push_back(t);
    }
    const env::FingerprintId probe = rng.below(45);
    auto got = get_traj(probe, r);
    auto want = brute_cost(probe, all);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      const auto& t = r.get(got->trajectory_id);
      REQUIRE(t.steps[got->step_index].fingerprint == probe);
      REQUIRE(std::tuple{t.expert_actions_from(got->step_index), t.size() - got->step_index, t.id} == *want);
    }
  }
}

TEST_CASE("build_training_set") {
  SUBCASE("initial and recovery solutions with mask starts") {
    // tau_l solves s0 from index 0; tau_3l passes through s_2l and is the recovery solution.
    TrajectoryRepository repo;
    repo.add(fixtures::synthetic(1, {100, 101, 102, 103}, {true, true, false, false}));
    repo.add(fixtures::synthetic(2, {100, 101, 102, 103, 104, 105, 106}, {true, true, true, true, true, true, false}));
    std::vector<ImportantState> initial{{ImportantState::Kind::initial, 100, {}, 0, 0}};
    std::vector<ImportantState> recovery{{ImportantState::Kind::recovery, 104, {}, 9, 4}};
    auto ex = build_training_set(initial, recovery, repo);
    REQUIRE(ex.size() == 2);
    CHECK(ex[0] == TrainingExample{1, 0, 100, ImportantState::Kind::initial});
    CHECK(ex[1] == TrainingExample{2, 4, 104, ImportantState::Kind::recovery});
  }
  SUBCASE("empty repository") {
    TrajectoryRepository repo;
    std::vector<ImportantState> initial{{ImportantState::Kind::initial, 1, {}, 0, 0}};
    CHECK(build_training_set(initial, {}, repo).empty());
  }
  SUBCASE("one trajectory backs two important states") {
    TrajectoryRepository repo;
    repo.add(fixtures::synthetic(5, {50, 51, 52, 53}, {false, false, false, false}));
    std::vector<ImportantState> initial{{ImportantState::Kind::initial, 50, {}, 0, 0}};
    std::vector<ImportantState> recovery{{ImportantState::Kind::recovery, 52, {}, 3, 2}};
    auto ex = build_training_set(initial, recovery, repo);
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].trajectory_id == 5);
    CHECK(ex[1].trajectory_id == 5);
    CHECK(ex[0].mask_start == 0);
    CHECK(ex[1].mask_start == 2);
  }
  SUBCASE("a fingerprint is served once and mask starts point at their state") {
    TrajectoryRepository repo;
    repo.add(fixtures::synthetic(5, {50, 51, 52, 53}, {false, false, false, false}));
    std::vector<ImportantState> recovery{{ImportantState::Kind::recovery, 52, {}, 3, 2},
                                         {ImportantState::Kind::recovery, 52, {}, 4, 2}};
    auto ex = build_training_set({}, recovery, repo);
    REQUIRE(ex.size() == 1);
    for (const auto& e : ex) CHECK(repo.get(e.trajectory_id).steps[e.mask_start].fingerprint == e.fingerprint);
  }
}
