#include <doctest.h>

#include <cmath>

#include "eef/experts/expert.hpp"
#include "eef/env/oracle.hpp"
#include "fixtures.hpp"

using namespace eef;
using namespace eef::env;
using experts::ExpertProfile;

namespace {

ExpertProfile perfect() {
  ExpertProfile p;
  p.p_overlook = 0.0;
  p.p_recover = 1.0;
  p.p_attempt_next = 1.0;
  p.search_quality = 1.0;
  p.navigation_fatigue = 0.0;
  p.label = "perfect";
  return p;
}

const TaskSpec* first_task(const MiniShopEnv& shop, Difficulty d, ContextId* ctx) {
  for (const auto& c : shop.train_contexts())
    if (shop.task(c).difficulty == d) {
      *ctx = c;
      return &shop.task(c);
    }
  return nullptr;
}

bool has_back_from_product(const core::Trajectory& t) {
  for (const auto& s : t.steps)
    if (s.action.text == kClickBack && parse_shop_page(s.observation).kind == ShopPage::Kind::product) return true;
  return false;
}

}  // namespace

TEST_CASE("overlook rate follows the fatigue formula") {
  for (double p : {0.0, 0.1, 0.5, 1.0})
    for (double f : {0.0, 0.3, 0.6})
      for (std::size_t n = 0; n < 5; ++n) {
        ExpertProfile prof;
        prof.p_overlook = p;
        prof.navigation_fatigue = f;
        double keep = 1.0 - p;
        for (std::size_t i = 0; i < n; ++i) keep *= 1.0 - f;
        CHECK(experts::overlook_rate(prof, n) == doctest::Approx(1.0 - keep).epsilon(1e-12));
      }
}

TEST_CASE("profile validation") {
  ExpertProfile p;
  CHECK_NOTHROW(p.validate());
  p.p_recover = 1.5;
  CHECK_THROWS(p.validate());
  p = {};
  p.navigation_fatigue = -0.1;
  CHECK_THROWS(p.validate());
}

TEST_CASE("expert_act behaviors") {
  MiniShopEnv shop = fixtures::reference_shop();
  Rng rng(1);

  SUBCASE("picks the fully matching product when it never overlooks") {
    ContextId ctx;
    const TaskSpec* task = first_task(shop, Difficulty::easy, &ctx);
    REQUIRE(task);
    shop.reset(ctx);
    StepResult s = shop.step({"search[" + task->query_full + "]"});
    auto page = parse_shop_page(s.observation);
    std::string match;
    for (const auto& l : page.listed)
      if (match.empty() && visible_match(l, task->constraints).all()) match = l.pid;
    REQUIRE_FALSE(match.empty());
    for (int i = 0; i < 20; ++i)
      CHECK(experts::expert_act(perfect(), s.observation, s.candidates, task->constraints, s.snapshot.history, rng)
                .text == "click[" + match + "]");
  }
  SUBCASE("pages forward when nothing matches") {
    ContextId ctx;
    const TaskSpec* task = first_task(shop, Difficulty::needs_next, &ctx);
    REQUIRE(task);
    shop.reset(ctx);
    StepResult s = shop.step({"search[" + task->query_full + "]"});
    auto page = parse_shop_page(s.observation);
    bool any = false;
    for (const auto& l : page.listed) any = any || visible_match(l, task->constraints).all();
    if (!any) {
      for (int i = 0; i < 20; ++i)
        CHECK(experts::expert_act(perfect(), s.observation, s.candidates, task->constraints, s.snapshot.history, rng)
                  .text == kClickNext);
    }
  }
  SUBCASE("goes back from a product missing a required option") {
    ContextId ctx;
    const TaskSpec* task = first_task(shop, Difficulty::needs_back, &ctx);
    REQUIRE(task);
    StepResult s = shop.reset(ctx);
    s = shop.step({"search[" + task->query_partial + "]"});
    // Open the first listed product whose page lacks a required value.
    StepResult product;
    bool found = false;
    for (const auto& l : parse_shop_page(s.observation).listed) {
      StepResult p = shop.step({"click[" + l.pid + "]"});
      const Product& prod = shop.product(l.pid);
      bool missing = false;
      for (const auto& [g, v] : task->constraints.required_options) missing = missing || !prod.has_option(g, v);
      if (missing) {
        product = p;
        found = true;
        break;
      }
      shop.restore(s.snapshot);
    }
    REQUIRE(found);
    for (int i = 0; i < 20; ++i)
      CHECK(experts::expert_act(perfect(), product.observation, product.candidates, task->constraints,
                                product.snapshot.history, rng)
                .text == kClickBack);
  }
}

TEST_CASE("expert datasets") {
  MiniShopEnv shop = fixtures::reference_shop();
  const auto& ctxs = shop.train_contexts();
  auto a = experts::generate_expert_dataset(shop, ctxs, experts::strong_profile(), 11, 100);
  auto b = experts::generate_expert_dataset(shop, ctxs, experts::strong_profile(), 11, 100);
  REQUIRE(a.trajectories.size() == ctxs.size());
  CHECK(a.stats == b.stats);
  std::size_t pos = 0, len = 0;
  for (std::size_t i = 0; i < ctxs.size(); ++i) {
    const auto& t = a.trajectories[i];
    CHECK(t.id == 100 + i);
    CHECK(t.start.context == ctxs[i]);
    CHECK(fixtures::actions(t) == fixtures::actions(b.trajectories[i]));
    CHECK(t.size() <= kMiniShopHorizon);
    for (const auto& s : t.steps) CHECK(s.provenance == core::Provenance::expert("strong"));
    pos += t.positive();
    len += t.size();
  }
  CHECK(a.stats.total == ctxs.size());
  CHECK(a.stats.positive == pos);
  CHECK(a.stats.avg_len == doctest::Approx(static_cast<double>(len) / ctxs.size()));

  // Per-context streams: a subset of contexts reproduces the same episodes.
  std::vector<ContextId> tail(ctxs.begin() + 10, ctxs.end());
  auto c = experts::generate_expert_dataset(shop, tail, experts::strong_profile(), 11);
  for (std::size_t i = 0; i < tail.size(); ++i)
    CHECK(fixtures::actions(c.trajectories[i]) == fixtures::actions(a.trajectories[i + 10]));
}

TEST_CASE("a never-failing expert solves every easy task") {
  MiniShopConfig cfg;
  cfg.difficulty_mix = {1.0, 0.0, 0.0};
  MiniShopEnv easy = generate_minishop(cfg);
  auto ds = experts::generate_expert_dataset(easy, easy.train_contexts(), perfect(), 3);
  CHECK(ds.stats.positive_fraction() == 1.0);
}

TEST_CASE("calibration") {
  MiniShopEnv shop = fixtures::reference_shop();
  const auto& ctxs = shop.train_contexts();
  for (auto [base, target] : {std::pair{experts::strong_profile(), 0.356}, std::pair{experts::weak_profile(), 0.232}}) {
    auto prof = experts::calibrate_profile(shop, ctxs, base, target, 0.04, {5, 24});
    double rate = experts::generate_expert_dataset(shop, ctxs, prof, 5).stats.positive_fraction();
    CHECK(std::abs(rate - target) <= 0.04);
    CHECK(prof.p_recover == base.p_recover);
    CHECK(prof.label == base.label);
  }

  SUBCASE("zero target lands on the extreme or reports the floor") {
    try {
      auto prof = experts::calibrate_profile(shop, ctxs, experts::strong_profile(), 0.0, 0.01, {5, 24});
      CHECK(experts::generate_expert_dataset(shop, ctxs, prof, 5).stats.positive_fraction() <= 0.01);
    } catch (const experts::CalibrationError& e) {
      CHECK(std::string(e.what()).find("floor") != std::string::npos);
    }
  }
  SUBCASE("ceiling below target") {
    ExpertProfile p = experts::strong_profile();
    p.p_recover = 0.0;
    CHECK_THROWS_AS(experts::calibrate_profile(shop, ctxs, p, 1.0, 0.01, {5, 24}), experts::CalibrationError);
  }
}

TEST_CASE("expert failures contain navigation and recovery") {
  MiniShopEnv shop = fixtures::reference_shop();
  auto ds = experts::generate_expert_dataset(shop, shop.train_contexts(), experts::strong_profile(), 2);
  std::size_t next_failures = 0, next_with_next = 0, back_failures = 0;
  for (const auto& t : ds.trajectories) {
    if (t.positive()) continue;
    if (shop.task(t.start.context).difficulty == Difficulty::needs_next) {
      ++next_failures;
      for (const auto& s : t.steps)
        if (s.action.text == kClickNext) {
          ++next_with_next;
          break;
        }
    }
    back_failures += has_back_from_product(t);
  }
  REQUIRE(next_failures > 0);
  CHECK(next_with_next > 0);
  CHECK(back_failures > 0);
}
