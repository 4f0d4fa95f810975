#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "eef/core/trajectory.hpp"

namespace eef::core {

/// Indices of the expert states to simulate: l = floor(|tau_e| / (M + 1)),
/// then [l, 2l, ..., M*l]. When l = 0 the indices are 1..min(M, |tau_e| - 1).
std::vector<std::size_t> select_expert_states(std::size_t trajectory_length, std::size_t M);
std::vector<std::size_t> select_expert_states(const Trajectory& expert, std::size_t M);

/// Success of each simulated rollout keyed by expert state index. Index 0 is
/// the outcome of the initial-state exploration of the same context.
using SimulationOutcomes = std::map<std::size_t, bool>;

/// First selected index i whose predecessor (0 for the first) succeeded while
/// i itself failed. Throws std::invalid_argument if an outcome is missing.
std::optional<std::size_t> need_recover_states(std::span<const std::size_t> selected,
                                               const SimulationOutcomes& outcomes);
std::optional<std::size_t> need_recover_states(const Trajectory& expert, std::size_t M,
                                               const SimulationOutcomes& outcomes);

struct SolutionRef {
  std::uint64_t trajectory_id = 0;
  std::size_t step_index = 0;

  friend bool operator==(const SolutionRef&, const SolutionRef&) = default;
};

/// Append-only store of positive trajectories indexed by state fingerprint.
class TrajectoryRepository {
public:
  /// Adds a positive trajectory. Returns false for a duplicate (same start and
  /// action sequence as an existing entry). Throws on a negative trajectory or
  /// on a reused id.
  bool add(Trajectory trajectory);

  const std::vector<Trajectory>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const Trajectory& get(std::uint64_t id) const;
  bool contains(std::uint64_t id) const { return by_id_.contains(id); }
  std::span<const SolutionRef> lookup(env::FingerprintId fingerprint) const;

private:
  std::vector<Trajectory> entries_;
  std::unordered_map<std::uint64_t, std::size_t> by_id_;
  std::unordered_map<env::FingerprintId, std::vector<SolutionRef>> index_;
  std::set<std::string> keys_;
};

/// Appends the positive members of `batch`; returns how many were added.
std::size_t update_repository(TrajectoryRepository& repository, std::span<const Trajectory> batch);

/// The solution for a state: fewest expert actions at or after the matched
/// step, then shortest remainder, then smallest id.
std::optional<SolutionRef> get_traj(env::FingerprintId fingerprint, const TrajectoryRepository& repository);

struct ImportantState {
  enum class Kind : std::uint8_t { initial, recovery };

  Kind kind = Kind::initial;
  env::FingerprintId fingerprint = 0;
  env::ContextId context;
  std::uint64_t expert_traj_id = 0;  // recovery states only
  std::size_t state_index = 0;       // recovery states only
};

struct TrainingExample {
  std::uint64_t trajectory_id = 0;
  std::size_t mask_start = 0;
  env::FingerprintId fingerprint = 0;  // the important state it was selected for
  ImportantState::Kind kind = ImportantState::Kind::initial;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

/// One example per important state that has a solution. States sharing a
/// fingerprint are served once.
std::vector<TrainingExample> build_training_set(std::span<const ImportantState> initial_states,
                                                std::span<const ImportantState> recovery_states,
                                                const TrajectoryRepository& repository);

}  // namespace eef::core
