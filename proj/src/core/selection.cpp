#include "eef/core/selection.hpp"

#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "eef/common/codec.hpp"

namespace eef::core {

std::vector<std::size_t> select_expert_states(std::size_t n, std::size_t M) {
  if (M == 0) throw std::invalid_argument("select_expert_states: M must be at least 1");
  std::vector<std::size_t> out;
  const std::size_t l = n / (M + 1);
  if (l >= 1) {
    for (std::size_t m = 1; m <= M; ++m) out.push_back(m * l);
  } else {
    for (std::size_t i = 1; i <= M && i + 1 <= n; ++i) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> select_expert_states(const Trajectory& expert, std::size_t M) {
  return select_expert_states(expert.size(), M);
}

std::optional<std::size_t> need_recover_states(std::span<const std::size_t> selected,
                                               const SimulationOutcomes& outcomes) {
  auto outcome = [&](std::size_t i) {
    auto it = outcomes.find(i);
    if (it == outcomes.end())
      throw std::invalid_argument(fmt::format("need_recover_states: no simulation outcome for state {}", i));
    return it->second;
  };
  bool prev = outcome(0);
  for (std::size_t i : selected) {
    const bool cur = outcome(i);
    if (prev && !cur) return i;
    prev = cur;
  }
  return std::nullopt;
}

std::optional<std::size_t> need_recover_states(const Trajectory& expert, std::size_t M,
                                               const SimulationOutcomes& outcomes) {
  const auto selected = select_expert_states(expert, M);
  return need_recover_states(selected, outcomes);
}

namespace {

std::string dedup_key(const Trajectory& t) {
  FieldWriter w;
  w.put_uint(t.start.context.id).put_uint(static_cast<std::uint64_t>(t.start.context.split));
  w.put_uint(static_cast<std::uint64_t>(t.start.origin.kind));
  w.put_uint(t.start.origin.expert_traj_id).put_uint(t.start.origin.state_index);
  for (const auto& s : t.steps) w.put(s.action.text);
  return w.str();
}

}  // namespace

bool TrajectoryRepository::add(Trajectory trajectory) {
  if (!trajectory.positive())
    throw std::invalid_argument(fmt::format("repository: trajectory {} is not positive", trajectory.id));
  if (by_id_.contains(trajectory.id))
    throw std::invalid_argument(fmt::format("repository: duplicate trajectory id {}", trajectory.id));
  if (!keys_.insert(dedup_key(trajectory)).second) return false;
  by_id_.emplace(trajectory.id, entries_.size());
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i)
    index_[trajectory.steps[i].fingerprint].push_back({trajectory.id, i});
  entries_.push_back(std::move(trajectory));
  return true;
}

const Trajectory& TrajectoryRepository::get(std::uint64_t id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::out_of_range(fmt::format("repository: no trajectory {}", id));
  return entries_[it->second];
}

std::span<const SolutionRef> TrajectoryRepository::lookup(env::FingerprintId fingerprint) const {
  auto it = index_.find(fingerprint);
  if (it == index_.end()) return {};
  return it->second;
}

std::size_t update_repository(TrajectoryRepository& repository, std::span<const Trajectory> batch) {
  std::size_t added = 0;
  for (const auto& t : batch)
    if (t.positive() && repository.add(t)) ++added;
  return added;
}

std::optional<SolutionRef> get_traj(env::FingerprintId fingerprint, const TrajectoryRepository& repository) {
  std::optional<SolutionRef> best;
  std::tuple<std::size_t, std::size_t, std::uint64_t> best_key{};
  for (const auto& ref : repository.lookup(fingerprint)) {
    const Trajectory& t = repository.get(ref.trajectory_id);
    std::tuple key{t.expert_actions_from(ref.step_index), t.size() - ref.step_index, t.id};
    if (!best || key < best_key) {
      best = ref;
      best_key = key;
    }
  }
  return best;
}

std::vector<TrainingExample> build_training_set(std::span<const ImportantState> initial_states,
                                                std::span<const ImportantState> recovery_states,
                                                const TrajectoryRepository& repository) {
  std::vector<TrainingExample> out;
  std::set<env::FingerprintId> served;
  for (auto states : {initial_states, recovery_states}) {
    for (const auto& s : states) {
      if (!served.insert(s.fingerprint).second) continue;
      if (auto ref = get_traj(s.fingerprint, repository))
        out.push_back({ref->trajectory_id, ref->step_index, s.fingerprint, s.kind});
    }
  }
  return out;
}

}  // namespace eef::core
