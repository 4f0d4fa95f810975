#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "eef/env/types.hpp"

namespace eef::env {

/// Contextual-MDP contract shared by every environment. Transitions are
/// deterministic given the environment's generation seed; all randomness
/// lives in agents. An instance is confined to one worker at a time; use
/// clone() to hand a copy to another worker.
class Environment {
public:
  virtual ~Environment() = default;

  virtual EnvKind kind() const = 0;

  virtual StepResult reset(ContextId context) = 0;
  virtual StepResult restore(const StateSnapshot& snapshot) = 0;
  virtual StepResult step(const ActionToken& action) = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

  virtual const std::vector<ContextId>& train_contexts() const = 0;
  virtual const std::vector<ContextId>& test_contexts() const = 0;
  virtual TaskConstraints constraints(ContextId context) const = 0;

  /// Episode length bound the harness applies to this environment.
  virtual std::size_t horizon() const = 0;
};

// Shared bookkeeping for environments whose dynamics are expressed over a
// typed internal state: history, pending observation and candidate checks.
class EnvironmentBase : public Environment {
public:
  StepResult reset(ContextId context) final;
  StepResult restore(const StateSnapshot& snapshot) final;
  StepResult step(const ActionToken& action) final;

protected:
  struct Frame {
    std::string observation;
    std::vector<ActionToken> candidates;
    double reward = 0.0;
    bool done = false;
  };

  virtual void begin_episode(ContextId context) = 0;
  virtual void load_state(std::string_view blob) = 0;
  virtual std::string save_state() const = 0;
  virtual Frame render() const = 0;
  /// Applies an action already checked against the offered candidates.
  virtual void apply(const ActionToken& action) = 0;

private:
  StepResult emit();

  std::vector<HistoryEntry> history_;
  Frame current_;
  bool started_ = false;
};

}  // namespace eef::env
