#include "eef/harness/persistence.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace eef::harness {

using nlohmann::json;

namespace {

json to_json(const core::Trajectory& t) {
  json start = {{"context", t.start.context.id}, {"split", env::to_string(t.start.context.split)}};
  if (t.start.origin.kind == core::Origin::Kind::initial) {
    start["origin"] = "initial";
  } else {
    start["origin"] = "expert_state";
    start["expert_traj_id"] = t.start.origin.expert_traj_id;
    start["state_index"] = t.start.origin.state_index;
  }
  json steps = json::array();
  for (const auto& s : t.steps) {
    json candidates = json::array();
    for (const auto& c : s.candidates) candidates.push_back(c.text);
    json prov = s.provenance.is_expert() ? json{{"source", "expert"}, {"label", s.provenance.expert_label}}
                                         : json{{"source", "policy"}, {"iteration", s.provenance.iteration}};
    steps.push_back({{"fp", fmt::format("{:016x}", s.fingerprint)},
                     {"observation", s.observation},
                     {"candidates", std::move(candidates)},
                     {"action", s.action.text},
                     {"provenance", std::move(prov)}});
  }
  return {{"id", t.id}, {"start", std::move(start)}, {"terminal_reward", t.terminal_reward}, {"steps", std::move(steps)}};
}

env::FingerprintId parse_fp(const std::string& hex) {
  env::FingerprintId v = 0;
  auto [p, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), v, 16);
  if (ec != std::errc() || p != hex.data() + hex.size() || hex.size() != 16)
    throw PersistenceError("malformed fingerprint '" + hex + "'");
  return v;
}

core::Trajectory from_json(const json& j) {
  core::Trajectory t;
  t.id = j.at("id").get<std::uint64_t>();
  t.terminal_reward = j.at("terminal_reward").get<int>();
  if (t.terminal_reward != 0 && t.terminal_reward != 1) throw PersistenceError("terminal_reward must be 0 or 1");
  const json& start = j.at("start");
  t.start.context.id = start.at("context").get<std::uint32_t>();
  t.start.context.split = env::split_from_string(start.at("split").get<std::string>());
  const auto origin = start.at("origin").get<std::string>();
  if (origin == "expert_state") {
    t.start.origin = core::Origin::expert_state(start.at("expert_traj_id").get<std::uint64_t>(),
                                                start.at("state_index").get<std::size_t>());
  } else if (origin != "initial") {
    throw PersistenceError("unknown origin '" + origin + "'");
  }
  for (const json& s : j.at("steps")) {
    core::TrajectoryStep step;
    step.fingerprint = parse_fp(s.at("fp").get<std::string>());
    step.observation = s.at("observation").get<std::string>();
    for (const json& c : s.at("candidates")) step.candidates.push_back({c.get<std::string>()});
    step.action.text = s.at("action").get<std::string>();
    const json& prov = s.at("provenance");
    const auto source = prov.at("source").get<std::string>();
    if (source == "expert") step.provenance = core::Provenance::expert(prov.at("label").get<std::string>());
    else if (source == "policy") step.provenance = core::Provenance::policy(prov.at("iteration").get<std::uint32_t>());
    else throw PersistenceError("unknown provenance source '" + source + "'");
    t.steps.push_back(std::move(step));
  }
  return t;
}

}  // namespace

std::string serialize_dataset(std::span<const core::Trajectory> trajectories) {
  std::string out =
      json{{"schema", kDatasetSchema}, {"version", kDatasetVersion}, {"count", trajectories.size()}}.dump();
  out += '\n';
  for (const auto& t : trajectories) {
    out += to_json(t).dump();
    out += '\n';
  }
  return out;
}

std::vector<core::Trajectory> parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw PersistenceError("line 1: missing header");
  std::size_t count = 0;
  try {
    json header = json::parse(line);
    if (header.at("schema").get<std::string>() != kDatasetSchema)
      throw PersistenceError("line 1: not a trajectory dataset");
    const int version = header.at("version").get<int>();
    if (version != kDatasetVersion)
      throw PersistenceError(
          fmt::format("line 1: unsupported schema version {} (expected {})", version, kDatasetVersion));
    count = header.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw PersistenceError(fmt::format("line 1: bad header: {}", e.what()));
  }

  std::vector<core::Trajectory> out;
  out.reserve(count);
  std::size_t lineno = 1;
  while (out.size() < count) {
    ++lineno;
    if (!std::getline(in, line))
      throw PersistenceError(
          fmt::format("line {}: file truncated, expected {} trajectories but found {}", lineno, count, out.size()));
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw PersistenceError(fmt::format("line {}: {}", lineno, e.what()));
    } catch (const std::exception& e) {
      throw PersistenceError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty()) throw PersistenceError(fmt::format("line {}: unexpected record after {} trajectories", lineno, count));
  }
  return out;
}

void persist_dataset(std::span<const core::Trajectory> trajectories, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError("cannot write '" + path + "'");
  out << serialize_dataset(trajectories);
  if (!out) throw PersistenceError("write failed for '" + path + "'");
}

std::vector<core::Trajectory> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_dataset(buf.str());
  } catch (const PersistenceError& e) {
    throw PersistenceError(path + ": " + e.what());
  }
}

void rehydrate(env::Environment& env, core::Trajectory& t) {
  env::StepResult current = env.reset(t.start.context);
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    auto& step = t.steps[i];
    if (current.done) throw PersistenceError(fmt::format("trajectory {}: episode ended before step {}", t.id, i));
    if (env::state_fingerprint(current.snapshot) != step.fingerprint || current.observation != step.observation)
      throw PersistenceError(fmt::format("trajectory {}: replay diverges at step {}", t.id, i));
    step.snapshot = current.snapshot;
    current = env.step(step.action);
  }
  const int reward = current.done && current.reward == 1.0 ? 1 : 0;
  if (reward != t.terminal_reward)
    throw PersistenceError(fmt::format("trajectory {}: replay reward {} differs from recorded {}", t.id, reward,
                                       t.terminal_reward));
}

void rehydrate(env::Environment& env, std::span<core::Trajectory> trajectories) {
  for (auto& t : trajectories) rehydrate(env, t);
}

}  // namespace eef::harness
