#include "eef/harness/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "eef/harness/config.hpp"
#include "eef/harness/experiment.hpp"
#include "eef/harness/persistence.hpp"
#include "eef/harness/report.hpp"

namespace eef::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  // train
  std::string method;
  std::optional<std::size_t> m, iters, k_initial;
  // eval
  std::string checkpoint;
  std::string split = "test";
  std::optional<double> temperature;
  // nav-stats
  std::string dataset;
  // report
  std::string methods = "eef,rft,sft-pos,sft-all,nat";
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig c;
  if (o.config_path.empty()) {
    c = reference_config();
  } else {
    if (!fs::exists(o.config_path)) throw UsageError("config file '" + o.config_path + "' does not exist");
    try {
      c = load_config(o.config_path);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (o.seed) c.seed = *o.seed;
  if (!o.method.empty()) c.method = method_from_string(o.method);
  if (o.m) c.eef.M = *o.m;
  if (o.iters) c.eef.I = *o.iters;
  if (o.k_initial) c.eef.k_initial = *o.k_initial;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  fs::create_directories(c.output_dir);
  return c;
}

json config_json(const ExperimentConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : config_entries(c))
    if (k != "output_dir") j[k] = v;
  return j;
}

json contexts_json(std::span<const env::ContextId> contexts) {
  json j = json::array();
  for (const auto& c : contexts) j.push_back(c.id);
  return j;
}

void print_lines(std::ostream& out, const std::vector<std::string>& paths) {
  for (const auto& p : paths) out << "wrote " << p << "\n";
}

int cmd_gen_env(const Options& o, std::ostream& out) {
  ExperimentConfig c = resolve_config(o);
  auto env = make_environment(c);
  std::string records;
  if (auto* shop = dynamic_cast<env::MiniShopEnv*>(env.get())) records = shop->export_records();
  else records = dynamic_cast<env::ChainWorldEnv&>(*env).export_records();
  const fs::path dir(c.output_dir);
  write_file(dir / "env.jsonl", records);
  write_file(dir / "config.cfg", render_config(c));
  print_lines(out, {(dir / "env.jsonl").string(), (dir / "config.cfg").string()});
  return 0;
}

int cmd_gen_experts(const Options& o, std::ostream& out) {
  ExperimentConfig c = resolve_config(o);
  auto env = make_environment(c);
  ContextSplit split = carve_validation(env->train_contexts(), c.validation_fraction, c.seed);
  ExpertSetup experts = prepare_experts(*env, c, split.fit, c.seed);
  const fs::path dir(c.output_dir);
  persist_dataset(experts.dataset, (dir / "experts.jsonl").string());
  json records = json::array();
  for (const auto& r : experts.records) records.push_back(to_json(r));
  json j = {{"schema", "eef-experts"},
            {"version", 1},
            {"seed", c.seed},
            {"dataset", "experts.jsonl"},
            {"experts", records},
            {"split", {{"fit", contexts_json(split.fit)}, {"validation", contexts_json(split.validation)}}}};
  write_file(dir / "experts.json", j.dump(2) + "\n");
  for (const auto& r : experts.records)
    out << fmt::format("{}: p_overlook={:.6f} win rate {:.3f} (target {:.3f}), {} demonstrations, {} positive\n",
                       r.profile.label, r.profile.p_overlook, r.calibrated_rate, r.spec.target, r.stats.total,
                       r.stats.positive);
  print_lines(out, {(dir / "experts.jsonl").string(), (dir / "experts.json").string()});
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  ExperimentConfig c = resolve_config(o);
  auto env = make_environment(c);
  SeedArtifacts art;
  SeedResult result = run_seed(*env, c, c.method, c.seed, &art);
  const fs::path dir(c.output_dir);

  persist_dataset(art.experts.dataset, (dir / "experts.jsonl").string());
  json iterations = json::array();
  const auto& policies = art.trained.policies;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const std::string ckpt = fmt::format("checkpoint_iter{}.ckpt", i);
    policy::save_checkpoint(policies[i], (dir / ckpt).string());
    json it = {{"iteration", i}, {"checkpoint", ckpt}, {"test_win_rate", result.test_curve[i]}};
    if (!result.validation_curve.empty()) it["validation_win_rate"] = result.validation_curve[i];
    if (art.trained.run) {
      const auto& run = *art.trained.run;
      const auto& rec = run.iterations[i];
      json recovery = json::array();
      for (const auto& s : rec.recovery_states)
        recovery.push_back({{"expert_traj_id", s.expert_traj_id},
                            {"state_index", s.state_index},
                            {"fp", fmt::format("{:016x}", s.fingerprint)}});
      json examples = json::array();
      for (const auto& e : rec.examples)
        examples.push_back({{"trajectory_id", e.trajectory_id},
                            {"mask_start", e.mask_start},
                            {"kind", e.kind == core::ImportantState::Kind::initial ? "initial" : "recovery"}});
      it["rollouts"] = rec.rollouts;
      it["positives"] = rec.positives;
      it["added"] = rec.added;
      it["repository_size"] = rec.repository_size;
      it["initial_solved"] = rec.initial_solved;
      it["recovery_states"] = recovery;
      it["examples"] = examples;
      it["trained"] = rec.trained;
      if (i > 0) {
        const std::string ds = fmt::format("exploration_iter{}.jsonl", i);
        persist_dataset(run.explorations[i - 1], (dir / ds).string());
        it["dataset"] = ds;
      }
    }
    iterations.push_back(std::move(it));
  }
  policy::save_checkpoint(policies[result.selected_iteration], (dir / "selected.ckpt").string());
  json datasets = {{"experts", "experts.jsonl"}};
  json warnings = json::array();
  if (art.trained.run) {
    persist_dataset(art.trained.run->repository.entries(), (dir / "repository.jsonl").string());
    datasets["repository"] = "repository.jsonl";
    for (const auto& w : art.trained.run->warnings) warnings.push_back(w);
  }
  persist_dataset(art.test.trajectories, (dir / "test_eval.jsonl").string());
  datasets["test_eval"] = "test_eval.jsonl";

  json experts = json::array();
  for (const auto& r : result.experts) experts.push_back(to_json(r));
  json manifest = {{"schema", kManifestSchema},
                   {"version", kManifestVersion},
                   {"command", "train"},
                   {"method", to_string(c.method)},
                   {"seed", c.seed},
                   {"config", config_json(c)},
                   {"split",
                    {{"fit", contexts_json(art.split.fit)}, {"validation", contexts_json(art.split.validation)}}},
                   {"experts", experts},
                   {"datasets", datasets},
                   {"iterations", iterations},
                   {"selected", {{"iteration", result.selected_iteration}, {"checkpoint", "selected.ckpt"}}},
                   {"total_rollouts", result.budget},
                   {"warnings", warnings},
                   {"test", to_json(result)}};
  manifest["test"].erase("experts");
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  out << fmt::format("{} seed {}: test win rate {:.3f} (iteration {} selected), {} rollouts\n",
                     method_label(c, c.method), c.seed, result.win_rate, result.selected_iteration, result.budget);
  print_lines(out, {(dir / "manifest.json").string()});
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  ExperimentConfig c = resolve_config(o);
  auto env = make_environment(c);
  policy::PolicyParams params = policy::load_checkpoint(o.checkpoint);
  policy::Featurizer featurizer(params.schema_version == policy::kNegativeAwareSchemaVersion);
  policy::Policy pol(params, featurizer);
  const auto split = env::split_from_string(o.split);
  const auto& contexts = split == env::Split::train ? env->train_contexts() : env->test_contexts();
  EvalMode mode = o.temperature ? EvalMode::sampled(*o.temperature, c.seed) : EvalMode::greedy();
  EvalResult r = evaluate(pol, *env, contexts, mode);
  const fs::path dir(c.output_dir);
  persist_dataset(r.trajectories, (dir / "eval.jsonl").string());
  json j = {{"checkpoint", fs::path(o.checkpoint).filename().string()},
            {"split", o.split},
            {"mode", o.temperature ? "sampled" : "greedy"},
            {"win_rate", r.win_rate},
            {"avg_reward", r.avg_reward},
            {"navigation", to_json(navigation_stats(r.trajectories))}};
  if (o.temperature) j["temperature"] = *o.temperature;
  write_file(dir / "eval.json", j.dump(2) + "\n");
  out << fmt::format("win rate {:.3f} on {} {} contexts\n", r.win_rate, contexts.size(), o.split);
  print_lines(out, {(dir / "eval.jsonl").string(), (dir / "eval.json").string()});
  return 0;
}

int cmd_nav_stats(const Options& o, std::ostream& out) {
  auto trajectories = load_dataset(o.dataset);
  NavigationStats nav = navigation_stats(trajectories);
  out << render_table({"stat", "pct"}, {{"next_success_pct", fmt::format("{:.1f}", nav.next_success_pct)},
                                        {"back_success_pct", fmt::format("{:.1f}", nav.back_success_pct)},
                                        {"next_attempt_pct", fmt::format("{:.1f}", nav.next_attempt_pct)},
                                        {"back_attempt_pct", fmt::format("{:.1f}", nav.back_attempt_pct)}});
  if (!o.output_dir.empty()) {
    fs::create_directories(o.output_dir);
    const fs::path path = fs::path(o.output_dir) / "nav_stats.json";
    write_file(path, to_json(nav).dump(2) + "\n");
    print_lines(out, {path.string()});
  }
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  ExperimentConfig c = resolve_config(o);
  auto entries = default_sweep();
  auto rows = budget_sweep(c, entries);
  const fs::path dir(c.output_dir);
  const std::string table = render_sweep(rows);
  write_file(dir / "sweep.txt", table);
  write_file(dir / "sweep.jsonl", sweep_records(rows));
  out << table;
  print_lines(out, {(dir / "sweep.txt").string(), (dir / "sweep.jsonl").string()});
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  ExperimentConfig c = resolve_config(o);
  std::vector<Method> methods;
  std::stringstream in(o.methods);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      methods.push_back(method_from_string(item));
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  if (methods.empty()) throw UsageError("--methods: no methods given");
  auto reports = run_experiment(c, methods);
  const fs::path dir(c.output_dir);
  const std::string table = render_report(reports);
  write_file(dir / "report.txt", table);
  write_file(dir / "report.jsonl", report_records(reports));
  out << table;
  print_lines(out, {(dir / "report.txt").string(), (dir / "report.jsonl").string()});
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exploring expert failures: experiment lab", "eef_lab"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("--config", o.config_path, "flat key = value config file");
    sub->add_option("--output-dir", o.output_dir, "directory for all outputs");
    if (with_config) sub->add_option("--seed", o.seed, "base seed; determines all randomness");
  };

  auto* gen_env = app.add_subcommand("gen-env", "write the generated environment records");
  common(gen_env);
  auto* gen_experts = app.add_subcommand("gen-experts", "calibrate experts and write their demonstrations");
  common(gen_experts);
  auto* train = app.add_subcommand("train", "train one method for one seed");
  common(train);
  train->add_option("--method", o.method, "eef, rft, sft-all, sft-pos or nat")
      ->check(CLI::IsMember({"eef", "rft", "sft-all", "sft-pos", "nat"}));
  train->add_option("--m", o.m, "expert states simulated per expert trajectory")->check(CLI::PositiveNumber);
  train->add_option("--iters", o.iters, "iterations including behavior cloning")->check(CLI::PositiveNumber);
  train->add_option("--k-initial", o.k_initial, "initial-state rollouts per subtask")->check(CLI::PositiveNumber);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "policy checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", o.split, "train or test")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--temperature", o.temperature, "sample at this temperature instead of greedy")
      ->check(CLI::PositiveNumber);
  auto* nav = app.add_subcommand("nav-stats", "navigation statistics of a trajectory dataset");
  common(nav, false);
  nav->add_option("--dataset", o.dataset, "trajectory dataset (.jsonl)")->required()->check(CLI::ExistingFile);
  auto* sweep = app.add_subcommand("sweep", "one-iteration budget sweep from a shared behavior-cloned start");
  common(sweep);
  auto* report = app.add_subcommand("report", "run methods over all seeds and write aggregate reports");
  common(report);
  report->add_option("--methods", o.methods, "comma-separated methods");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "eef_lab: error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub == gen_env) return cmd_gen_env(o, out);
    if (sub == gen_experts) return cmd_gen_experts(o, out);
    if (sub == train) return cmd_train(o, out);
    if (sub == eval) return cmd_eval(o, out);
    if (sub == nav) return cmd_nav_stats(o, out);
    if (sub == sweep) return cmd_sweep(o, out);
    return cmd_report(o, out);
  } catch (const UsageError& e) {
    err << "eef_lab: error: " << e.what() << "\n" << sub->help();
    return 2;
  } catch (const std::exception& e) {
    err << "eef_lab: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace eef::harness
