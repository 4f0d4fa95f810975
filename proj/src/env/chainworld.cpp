#include "eef/env/chainworld.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "eef/common/codec.hpp"
#include "eef/common/random.hpp"

namespace eef::env {

namespace {

constexpr std::array<std::string_view, 24> kItems = {
    "battery",   "copper wire", "bulb",      "switch",   "resistor",  "magnet",   "lens",        "prism",
    "beaker",    "thermometer", "funnel",    "flask",    "seed",      "soil",     "water",       "pot",
    "spring",    "gear",        "lever",     "pulley",   "capacitor", "diode",    "solder",      "clamp"};

constexpr std::string_view kStateTag = "chainworld/1";

std::uint64_t config_signature(const ChainWorldConfig& c) {
  FieldWriter w;
  w.put("chainworld-config/1")
      .put_uint(c.n_stages)
      .put_uint(c.menu_size)
      .put(fmt::format("{:.17g}", c.recoverable_fraction))
      .put_uint(c.n_tasks_train)
      .put_uint(c.n_tasks_test)
      .put_uint(c.seed);
  return fnv1a64(w.str());
}

}  // namespace

void ChainWorldConfig::validate() const {
  if (n_stages < 1) throw EnvError("ChainWorldConfig: n_stages must be at least 1");
  if (n_stages > kChainWorldHorizon)
    throw EnvError(fmt::format("ChainWorldConfig: n_stages must not exceed the {}-step horizon", kChainWorldHorizon));
  if (menu_size < 2) throw EnvError("ChainWorldConfig: menu_size must be at least 2");
  if (menu_size > kItems.size())
    throw EnvError(fmt::format("ChainWorldConfig: menu_size must not exceed {}", kItems.size()));
  if (!(recoverable_fraction >= 0.0 && recoverable_fraction <= 1.0))
    throw EnvError("ChainWorldConfig: recoverable_fraction must lie in [0, 1]");
  if (n_tasks_train + n_tasks_test == 0) throw EnvError("ChainWorldConfig: no tasks requested");
}

ChainWorldEnv::ChainWorldEnv(ChainWorldConfig config, std::vector<ChainTask> tasks)
    : config_(std::move(config)), tasks_(std::move(tasks)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const auto& t = tasks_[i];
    if (!task_index_.emplace(t.task_id, i).second) throw EnvError("duplicate task id " + std::to_string(t.task_id));
    (t.split == Split::train ? train_ : test_).push_back({t.task_id, t.split});
  }
  signature_ = config_signature(config_);
}

TaskConstraints ChainWorldEnv::constraints(ContextId context) const {
  task(context);
  return {};
}

const ChainTask& ChainWorldEnv::task(ContextId context) const {
  auto it = task_index_.find(context.id);
  if (it == task_index_.end() || tasks_[it->second].split != context.split)
    throw EnvError("unknown ChainWorld context " + std::to_string(context.id) + "/" +
                   std::string(to_string(context.split)));
  return tasks_[it->second];
}

void ChainWorldEnv::begin_episode(ContextId context) {
  state_ = State{};
  state_.task = task(context).task_id;
}

std::string ChainWorldEnv::save_state() const {
  FieldWriter w;
  w.put(kStateTag)
      .put_uint(signature_)
      .put_uint(state_.task)
      .put_uint(state_.stage)
      .put_uint(state_.in_mistake ? 1 : 0)
      .put(state_.wrong_choice)
      .put_uint(state_.done ? 1 : 0)
      .put_int(state_.reward);
  return std::move(w).str();
}

void ChainWorldEnv::load_state(std::string_view blob) {
  State s;
  try {
    FieldReader r(blob);
    if (r.next() != kStateTag) throw EnvError("not a ChainWorld state");
    if (r.next_uint() != signature_) throw EnvError("snapshot was produced by a different ChainWorld instance");
    s.task = static_cast<std::uint32_t>(r.next_uint());
    s.stage = static_cast<std::uint32_t>(r.next_uint());
    s.in_mistake = r.next_uint() != 0;
    s.wrong_choice = std::string(r.next());
    s.done = r.next_uint() != 0;
    s.reward = static_cast<int>(r.next_int());
    r.expect_done();
  } catch (const CodecError& e) {
    throw EnvError(std::string("malformed ChainWorld state: ") + e.what());
  }
  auto it = task_index_.find(s.task);
  if (it == task_index_.end()) throw EnvError("ChainWorld state references unknown task");
  if (s.stage > tasks_[it->second].stages.size() || (!s.done && s.stage == tasks_[it->second].stages.size()))
    throw EnvError("ChainWorld state stage out of range");
  if (s.reward != 0 && s.reward != 1) throw EnvError("ChainWorld state reward out of range");
  state_ = std::move(s);
}

EnvironmentBase::Frame ChainWorldEnv::render() const {
  const auto& t = current_task();
  const std::size_t n = t.stages.size();
  Frame f;
  std::string obs = "Task: " + t.instruction + "\n";
  if (state_.done) {
    obs += state_.reward == 1 ? fmt::format("[Done] cleared {} of {} | reward 1", n, n)
                              : fmt::format("[Done] failed at stage {} of {} | reward 0", state_.stage + 1, n);
    f.done = true;
    f.reward = state_.reward;
  } else if (state_.in_mistake) {
    obs += fmt::format("[Mistake] stage {} of {} | wrong choice: {}", state_.stage + 1, n, state_.wrong_choice);
    f.candidates = {{std::string(kClickResetStage)}, {std::string(kClickContinue)}};
  } else {
    const auto& stage = t.stages[state_.stage];
    obs += fmt::format("[Stage {} of {}] needed: {}", state_.stage + 1, n, stage.menu[stage.correct]);
    for (const auto& item : stage.menu) f.candidates.push_back({"click[" + item + "]"});
  }
  f.observation = std::move(obs);
  return f;
}

void ChainWorldEnv::apply(const ActionToken& action) {
  const auto& t = current_task();
  if (state_.in_mistake) {
    if (action.text == kClickResetStage) {
      state_.in_mistake = false;
      state_.wrong_choice.clear();
    } else {
      state_.done = true;
      state_.reward = 0;
    }
    return;
  }
  const auto& stage = t.stages[state_.stage];
  const std::string item = action.text.substr(6, action.text.size() - 7);
  if (item == stage.menu[stage.correct]) {
    ++state_.stage;
    if (state_.stage == t.stages.size()) {
      state_.done = true;
      state_.reward = 1;
    }
  } else if (stage.recoverable) {
    state_.in_mistake = true;
    state_.wrong_choice = item;
  } else {
    state_.done = true;
    state_.reward = 0;
  }
}

std::string ChainWorldEnv::export_records() const {
  std::ostringstream out;
  out << nlohmann::json{{"schema", "eef-chainworld-export"}, {"version", 1}}.dump() << '\n';
  for (const auto& t : tasks_) {
    nlohmann::json j;
    j["record"] = "task";
    j["task_id"] = t.task_id;
    j["split"] = to_string(t.split);
    j["instruction"] = t.instruction;
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : t.stages)
      stages.push_back({{"menu", s.menu}, {"correct", s.correct}, {"recoverable", s.recoverable}});
    j["stages"] = std::move(stages);
    out << j.dump() << '\n';
  }
  return out.str();
}

ChainWorldEnv generate_chainworld(const ChainWorldConfig& config) {
  config.validate();
  std::vector<ChainTask> tasks;
  const std::size_t n = config.n_tasks_train + config.n_tasks_test;
  for (std::uint32_t i = 0; i < n; ++i) {
    Rng rng(derive_seed({config.seed, 0x636861696eULL, i}));
    ChainTask t;
    t.task_id = i;
    t.split = i < config.n_tasks_train ? Split::train : Split::test;
    t.instruction = fmt::format("assemble the device by completing all {} stages in order", config.n_stages);
    for (std::size_t s = 0; s < config.n_stages; ++s) {
      std::vector<std::string> pool(kItems.begin(), kItems.end());
      rng.shuffle(pool.begin(), pool.end());
      ChainStage stage;
      stage.menu.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.menu_size));
      stage.correct = rng.below(config.menu_size);
      stage.recoverable = rng.bernoulli(config.recoverable_fraction);
      t.stages.push_back(std::move(stage));
    }
    tasks.push_back(std::move(t));
  }
  return ChainWorldEnv(config, std::move(tasks));
}

bool is_chain_observation(std::string_view observation) { return observation.substr(0, 6) == "Task: "; }

ChainPage parse_chain_page(std::string_view observation) {
  auto nl = observation.find('\n');
  if (!is_chain_observation(observation) || nl == std::string_view::npos)
    throw EnvError("malformed ChainWorld observation");
  std::string head(observation.substr(nl + 1));
  ChainPage page;
  unsigned a = 0, b = 0;
  if (head.rfind("[Stage ", 0) == 0) {
    page.kind = ChainPage::Kind::stage;
    if (std::sscanf(head.c_str(), "[Stage %u of %u]", &a, &b) != 2) throw EnvError("malformed stage header");
    auto pos = head.find("] needed: ");
    if (pos == std::string::npos) throw EnvError("malformed stage header");
    page.needed = head.substr(pos + 10);
  } else if (head.rfind("[Mistake] ", 0) == 0) {
    page.kind = ChainPage::Kind::mistake;
    if (std::sscanf(head.c_str(), "[Mistake] stage %u of %u", &a, &b) != 2) throw EnvError("malformed mistake header");
  } else if (head.rfind("[Done] ", 0) == 0) {
    page.kind = ChainPage::Kind::done;
    return page;
  } else {
    throw EnvError("unknown ChainWorld page header '" + head + "'");
  }
  page.stage = a - 1;
  page.n_stages = b;
  return page;
}

}  // namespace eef::env
