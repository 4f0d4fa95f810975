#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eef::env {

class EnvError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class EnvKind : std::uint8_t { minishop, chainworld };

std::string_view to_string(EnvKind kind);
EnvKind env_kind_from_string(std::string_view name);

enum class Split : std::uint8_t { train, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct ContextId {
  std::uint32_t id = 0;
  Split split = Split::train;

  friend auto operator<=>(const ContextId&, const ContextId&) = default;
};

struct ActionToken {
  std::string text;

  friend bool operator==(const ActionToken&, const ActionToken&) = default;
};

struct HistoryEntry {
  std::string observation;
  std::string action;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

/// Complete restorable environment state. `internal_state` is an opaque
/// env-specific blob; `history` holds one (observation, action) pair per
/// action taken so far, so history.size() == step_index.
struct StateSnapshot {
  EnvKind env_kind = EnvKind::minishop;
  std::string internal_state;
  std::vector<HistoryEntry> history;
  std::uint32_t step_index = 0;

  friend bool operator==(const StateSnapshot&, const StateSnapshot&) = default;
};

struct StepResult {
  std::string observation;
  std::vector<ActionToken> candidates;
  double reward = 0.0;
  bool done = false;
  StateSnapshot snapshot;

  friend bool operator==(const StepResult&, const StepResult&) = default;
};

using FingerprintId = std::uint64_t;

/// Shopping constraints of a MiniShop task. Empty for environments whose
/// observations carry everything an agent needs.
struct TaskConstraints {
  std::string category;
  std::string color;
  std::int64_t max_price_cents = 0;
  std::map<std::string, std::string> required_options;  // group -> value

  friend bool operator==(const TaskConstraints&, const TaskConstraints&) = default;
};

inline constexpr std::string_view kSnapshotSchema = "eef-snapshot/1";

std::string serialize(const StateSnapshot& snapshot);
StateSnapshot deserialize_snapshot(std::string_view bytes);

/// Hash of the canonical serialization of (internal_state, history).
FingerprintId state_fingerprint(const StateSnapshot& snapshot);

}  // namespace eef::env
