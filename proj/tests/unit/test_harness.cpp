#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "eef/experts/expert.hpp"
#include "eef/harness/cli.hpp"
#include "eef/harness/config.hpp"
#include "eef/harness/evaluation.hpp"
#include "eef/harness/experiment.hpp"
#include "eef/harness/persistence.hpp"
#include "eef/harness/report.hpp"
#include "fixtures.hpp"

using namespace eef;
using namespace eef::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("eef_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

core::Trajectory nav_fixture(std::uint64_t id, bool next, bool win) {
  core::Trajectory t;
  t.id = id;
  t.terminal_reward = win ? 1 : 0;
  core::TrajectoryStep s;
  s.observation = "Instruction: x\n[Search]";
  s.action.text = "search[x]";
  t.steps.push_back(s);
  if (next) {
    s.observation = "Instruction: x\n[Results] page 1 of 2 | query: x";
    s.action.text = std::string(env::kClickNext);
    t.steps.push_back(s);
  }
  return t;
}

ExperimentConfig small_config() {
  ExperimentConfig c = reference_config();
  c.n_seeds = 2;
  c.eef.I = 2;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  ExperimentConfig ref = reference_config();
  CHECK(ref.n_seeds == 5);
  CHECK(ref.eef.M == 5);
  CHECK(ref.eef.I == 4);
  REQUIRE(ref.experts.size() == 1);
  CHECK(ref.experts[0].target == doctest::Approx(0.356));

  auto c = parse_config(
      "# comment\n"
      "env = minishop\n"
      "method = rft   # trailing\n"
      "eef.m = 2\n"
      "rft.n = 3\n"
      "experts = strong, weak\n"
      "expert.weak.target = 0.25\n"
      "train.learning_rate = 0.1\n"
      "n_seeds = 3\n");
  CHECK(c.method == Method::rft);
  CHECK(c.eef.M == 2);
  CHECK(c.rft_samples == 3);
  REQUIRE(c.experts.size() == 2);
  CHECK(c.experts[1].profile.label == "weak");
  CHECK(c.experts[1].target == 0.25);
  CHECK(c.experts[1].profile.p_recover == experts::weak_profile().p_recover);
  CHECK(c.train.learning_rate == 0.1);
  CHECK(c.n_seeds == 3);

  CHECK(config_entries(parse_config(render_config(c))) == config_entries(c));

  CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("eef.m = five\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("eef.m\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_seeds = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("method = dpo\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("expert.weak.target = 0.2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("env = webshop\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/ref.cfg"), ConfigError);
  for (auto m : {Method::eef, Method::rft, Method::sft_all, Method::sft_pos, Method::nat})
    CHECK(method_from_string(to_string(m)) == m);
}

TEST_CASE("dataset persistence") {
  env::MiniShopEnv shop = fixtures::reference_shop();

  SUBCASE("three-step trajectory") {
    core::Trajectory t;
    for (std::uint64_t seed = 0; t.size() != 3; ++seed) t = fixtures::random_episode(shop, shop.train_contexts()[0], seed);
    std::vector<core::Trajectory> v{t};
    const std::string text = serialize_dataset(v);
    auto back = parse_dataset(text);
    REQUIRE(back.size() == 1);
    CHECK(serialize_dataset(back) == text);
    CHECK(fixtures::actions(back[0]) == fixtures::actions(t));
  }
  SUBCASE("full expert dataset roundtrips and rehydrates") {
    auto ds = experts::generate_expert_dataset(shop, shop.train_contexts(), experts::strong_profile(), 3);
    std::vector<core::Trajectory> all = ds.trajectories;
    for (std::uint64_t i = 0; i < 200; ++i)
      all.push_back(fixtures::random_episode(shop, shop.train_contexts()[i % 40], i, 1000 + i));
    auto dir = scratch_dir("persist");
    auto path = (dir / "d.jsonl").string();
    persist_dataset(all, path);
    auto back = load_dataset(path);
    REQUIRE(back.size() == all.size());
    CHECK(serialize_dataset(back) == serialize_dataset(all));
    rehydrate(shop, back);
    for (std::size_t i = 0; i < all.size(); ++i) {
      REQUIRE(back[i].size() == all[i].size());
      for (std::size_t k = 0; k < all[i].size(); ++k) {
        CHECK(back[i].steps[k].fingerprint == all[i].steps[k].fingerprint);
        CHECK(back[i].steps[k].snapshot == all[i].steps[k].snapshot);
      }
    }
  }
  SUBCASE("version bump, truncation and corruption") {
    auto t = fixtures::random_episode(shop, shop.train_contexts()[1], 1);
    std::vector<core::Trajectory> v{t, t};
    v[1].id = 9;
    std::string text = serialize_dataset(v);

    std::string bumped = text;
    bumped.replace(bumped.find("\"version\":1"), 11, "\"version\":2");
    CHECK_THROWS_WITH_AS(parse_dataset(bumped), doctest::Contains("version"), PersistenceError);

    std::string truncated = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    CHECK_THROWS_WITH_AS(parse_dataset(truncated), doctest::Contains("line 3"), PersistenceError);
    std::string cut = text.substr(0, text.size() - 20);
    CHECK_THROWS_WITH_AS(parse_dataset(cut), doctest::Contains("line 3"), PersistenceError);
    CHECK_THROWS_AS(parse_dataset(""), PersistenceError);

    auto tampered = parse_dataset(text);
    tampered[0].steps[0].fingerprint ^= 1;
    CHECK_THROWS_AS(rehydrate(shop, tampered[0]), PersistenceError);
  }
}

TEST_CASE("evaluation") {
  env::MiniShopEnv shop = fixtures::reference_shop();
  env::ChainWorldEnv chain = fixtures::reference_chain();
  const auto& train = shop.train_contexts();

  CHECK(evaluate_agent(shop, train, oracle_agent(shop)).win_rate == 1.0);
  std::vector<env::ContextId> few(chain.train_contexts().begin(), chain.train_contexts().begin() + 5);
  CHECK(evaluate_agent(chain, few, oracle_agent(chain)).win_rate == 1.0);

  policy::Featurizer fz;
  policy::Policy zero(policy::PolicyParams::zeros(fz), fz);
  auto z = evaluate(zero, shop, shop.test_contexts());
  CHECK(z.win_rate < 0.15);
  CHECK(z.avg_reward == z.win_rate);
  auto z2 = evaluate(zero, shop, shop.test_contexts());
  CHECK(serialize_dataset(z.trajectories) == serialize_dataset(z2.trajectories));

  auto s1 = evaluate(zero, shop, train, EvalMode::sampled(1.0, 4));
  auto s2 = evaluate(zero, shop, train, EvalMode::sampled(1.0, 4));
  CHECK(serialize_dataset(s1.trajectories) == serialize_dataset(s2.trajectories));
  CHECK_THROWS(evaluate(zero, shop, std::vector<env::ContextId>{}));
}

TEST_CASE("navigation statistics") {
  std::vector<core::Trajectory> none{nav_fixture(0, false, true), nav_fixture(1, false, false)};
  auto z = navigation_stats(none);
  CHECK(z.next_success_pct == 0.0);
  CHECK(z.back_success_pct == 0.0);
  CHECK(z.next_attempt_pct == 0.0);
  CHECK(z.back_attempt_pct == 0.0);

  // 10 contexts: 3 solved with Next, 2 more attempted Next and failed.
  std::vector<core::Trajectory> v;
  for (int i = 0; i < 3; ++i) v.push_back(nav_fixture(i, true, true));
  for (int i = 3; i < 5; ++i) v.push_back(nav_fixture(i, true, false));
  for (int i = 5; i < 10; ++i) v.push_back(nav_fixture(i, false, i % 2 == 0));
  auto n = navigation_stats(v);
  CHECK(n.next_success_pct == doctest::Approx(30.0));
  CHECK(n.next_attempt_pct == doctest::Approx(50.0));

  // Back counts only when taken from a product page.
  core::Trajectory back = nav_fixture(20, false, true);
  core::TrajectoryStep s;
  s.observation = "Instruction: x\n[Results] page 1 of 2 | query: x";
  s.action.text = std::string(env::kClickBack);
  back.steps.push_back(s);
  CHECK_FALSE(uses_back(back));
  s.observation = "Instruction: x\n[Product] P0001 | A red jacket | $1.00\noptions: color = red, blue\nselected: none";
  back.steps.push_back(s);
  CHECK(uses_back(back));

  env::MiniShopEnv shop = fixtures::reference_shop();
  auto ds = experts::generate_expert_dataset(shop, shop.train_contexts(), experts::strong_profile(), 8);
  auto st = navigation_stats(ds.trajectories);
  CHECK(st.next_success_pct <= st.next_attempt_pct);
  CHECK(st.back_success_pct <= st.back_attempt_pct);
  for (double p : {st.next_success_pct, st.back_success_pct, st.next_attempt_pct, st.back_attempt_pct}) {
    CHECK(p >= 0.0);
    CHECK(p <= 100.0);
  }
}

TEST_CASE("aggregation") {
  std::vector<double> one{0.4};
  CHECK(aggregate(one).mean == 0.4);
  CHECK(aggregate(one).sd == 0.0);
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(aggregate(v).mean == 2.5);
  CHECK(aggregate(v).sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
}

TEST_CASE("validation carve-out") {
  const auto& train = fixtures::reference_shop().train_contexts();
  auto a = carve_validation(train, 0.1, 3);
  CHECK(a.validation.size() == 4);
  CHECK(a.fit.size() == 36);
  std::vector<env::ContextId> merged = a.fit;
  merged.insert(merged.end(), a.validation.begin(), a.validation.end());
  std::sort(merged.begin(), merged.end());
  CHECK(merged == train);
  auto b = carve_validation(train, 0.1, 3);
  CHECK(b.validation == a.validation);
  CHECK(carve_validation(train, 0.0, 3).validation.empty());
  CHECK_THROWS(carve_validation(train, 1.0, 3));
}

TEST_CASE("experiment reports") {
  auto cfg = small_config();
  std::vector<Method> methods{Method::eef, Method::sft_pos};
  auto reports = run_experiment(cfg, methods);
  REQUIRE(reports.size() == 2);
  for (const auto& r : reports) {
    REQUIRE(r.seeds.size() == 2);
    double sum = 0.0;
    for (const auto& s : r.seeds) sum += s.win_rate;
    CHECK(std::abs(r.win_rate.mean - sum / 2) <= 1e-12);
    CHECK(r.avg_reward.mean == r.win_rate.mean);
  }
  CHECK(reports[0].seeds[0].test_curve.size() == cfg.eef.I);
  CHECK(reports[1].seeds[0].budget == 0);

  const std::string table = render_report(reports);
  CHECK(table.find("EEF M=5 I=2") != std::string::npos);
  std::istringstream lines(report_records(reports));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 2 * 2 + 2);
}

TEST_CASE("budget sweep") {
  auto cfg = reference_config();
  cfg.n_seeds = 1;
  CHECK(budget_sweep(cfg, std::vector<SweepEntry>{}).empty());
  std::vector<SweepEntry> one{{Method::eef, 1}};
  auto rows = budget_sweep(cfg, one);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].win_rate.sd == 0.0);
  REQUIRE(rows[0].rollouts.size() == 1);

  // The recorded count equals the budget formula for the same seed's experts.
  auto env = make_environment(cfg);
  auto split = carve_validation(env->train_contexts(), cfg.validation_fraction, cfg.seed);
  auto experts = prepare_experts(*env, cfg, split.fit, cfg.seed);
  core::EEFConfig eef;
  eef.M = 1;
  CHECK(rows[0].rollouts[0] == core::rollouts_per_iteration(split.fit.size(), experts.dataset, eef));

  std::vector<SweepEntry> rft{{Method::rft, 4}};
  CHECK(budget_sweep(cfg, rft)[0].rollouts[0] == 4 * split.fit.size());
  std::vector<SweepEntry> bad{{Method::sft_pos, 1}};
  CHECK_THROWS(budget_sweep(cfg, bad));
  CHECK(render_sweep(rows).find("M=1") != std::string::npos);
}

TEST_CASE("render_table aligns columns") {
  auto t = render_table({"a", "bb"}, {{"xxx", "1"}, {"y", "22"}});
  CHECK(t == "a    bb\n-------\nxxx   1\ny    22\n");
}

TEST_CASE("cli usage errors") {
  std::ostringstream out, err;
  CHECK(run_cli({"train", "--method", "dpo"}, out, err) == 2);
  CHECK(err.str().find("dpo") != std::string::npos);
  CHECK(run_cli({"train", "--no-such-flag"}, out, err) == 2);
  CHECK(run_cli({"train", "--config", "/nonexistent/ref.cfg"}, out, err) == 2);
  CHECK(run_cli({}, out, err) == 2);
  CHECK(run_cli({"frobnicate"}, out, err) == 2);
  CHECK(run_cli({"--help"}, out, err) == 0);

  auto dir = scratch_dir("cli");
  std::ofstream(dir / "bad.cfg") << "no_such_key = 1\n";
  CHECK(run_cli({"train", "--config", (dir / "bad.cfg").string()}, out, err) == 2);
}

TEST_CASE("cli end to end") {
  auto dir = scratch_dir("cli_e2e");
  std::ofstream(dir / "small.cfg") << "eef.iters = 2\nn_seeds = 1\n";
  std::ostringstream out, err;
  const std::string cfg = (dir / "small.cfg").string();
  REQUIRE(run_cli({"gen-env", "--config", cfg, "--output-dir", (dir / "env").string()}, out, err) == 0);
  CHECK(fs::exists(dir / "env" / "env.jsonl"));
  REQUIRE(run_cli({"gen-experts", "--config", cfg, "--output-dir", (dir / "ex").string()}, out, err) == 0);
  CHECK(load_dataset((dir / "ex" / "experts.jsonl").string()).size() == 36);
  REQUIRE(run_cli({"train", "--method", "rft", "--config", cfg, "--seed", "2", "--output-dir", (dir / "tr").string()},
                  out, err) == 0);
  CHECK(fs::exists(dir / "tr" / "manifest.json"));
  CHECK(fs::exists(dir / "tr" / "checkpoint_iter1.ckpt"));
  CHECK(fs::exists(dir / "tr" / "exploration_iter1.jsonl"));
  REQUIRE(run_cli({"eval", "--config", cfg, "--checkpoint", (dir / "tr" / "selected.ckpt").string(), "--output-dir",
                   (dir / "ev").string()},
                  out, err) == 0);
  CHECK(fs::exists(dir / "ev" / "eval.json"));
  REQUIRE(run_cli({"nav-stats", "--dataset", (dir / "ev" / "eval.jsonl").string()}, out, err) == 0);
  CHECK(out.str().find("next_success_pct") != std::string::npos);
  CHECK(run_cli({"eval", "--config", cfg, "--checkpoint", (dir / "nope.ckpt").string()}, out, err) == 2);
}
