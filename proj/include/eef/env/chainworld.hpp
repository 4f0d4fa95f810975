#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eef/env/environment.hpp"

namespace eef::env {

inline constexpr std::size_t kChainWorldHorizon = 40;
inline constexpr std::string_view kClickResetStage = "click[reset stage]";
inline constexpr std::string_view kClickContinue = "click[continue]";

struct ChainWorldConfig {
  std::size_t n_stages = 20;
  std::size_t menu_size = 4;
  double recoverable_fraction = 0.5;
  std::size_t n_tasks_train = 40;
  std::size_t n_tasks_test = 20;
  std::uint64_t seed = 11;

  void validate() const;
};

struct ChainStage {
  std::vector<std::string> menu;
  std::size_t correct = 0;
  /// A wrong choice here can be undone with "reset stage"; otherwise it ends
  /// the episode with reward 0.
  bool recoverable = false;

  friend bool operator==(const ChainStage&, const ChainStage&) = default;
};

struct ChainTask {
  std::uint32_t task_id = 0;
  Split split = Split::train;
  std::string instruction;
  std::vector<ChainStage> stages;

  friend bool operator==(const ChainTask&, const ChainTask&) = default;
};

/// Long-horizon chain: every stage shows a menu, one entry advances, and the
/// episode is won only when all stages are cleared.
class ChainWorldEnv final : public EnvironmentBase {
public:
  ChainWorldEnv(ChainWorldConfig config, std::vector<ChainTask> tasks);

  EnvKind kind() const override { return EnvKind::chainworld; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ChainWorldEnv>(*this); }
  const std::vector<ContextId>& train_contexts() const override { return train_; }
  const std::vector<ContextId>& test_contexts() const override { return test_; }
  TaskConstraints constraints(ContextId context) const override;
  std::size_t horizon() const override { return kChainWorldHorizon; }

  const ChainWorldConfig& config() const { return config_; }
  const std::vector<ChainTask>& tasks() const { return tasks_; }
  const ChainTask& task(ContextId context) const;

  std::string export_records() const;

protected:
  void begin_episode(ContextId context) override;
  void load_state(std::string_view blob) override;
  std::string save_state() const override;
  Frame render() const override;
  void apply(const ActionToken& action) override;

private:
  struct State {
    std::uint32_t task = 0;
    std::uint32_t stage = 0;
    bool in_mistake = false;
    std::string wrong_choice;
    bool done = false;
    int reward = 0;
  };

  const ChainTask& current_task() const { return tasks_[task_index_.at(state_.task)]; }

  ChainWorldConfig config_;
  std::vector<ChainTask> tasks_;
  std::map<std::uint32_t, std::size_t> task_index_;
  std::vector<ContextId> train_;
  std::vector<ContextId> test_;
  std::uint64_t signature_ = 0;
  State state_;
};

ChainWorldEnv generate_chainworld(const ChainWorldConfig& config);

/// Structured view of a rendered ChainWorld observation.
struct ChainPage {
  enum class Kind : std::uint8_t { stage, mistake, done } kind = Kind::stage;
  std::size_t stage = 0;     // zero-based
  std::size_t n_stages = 0;
  std::string needed;        // stage pages only
};

bool is_chain_observation(std::string_view observation);
ChainPage parse_chain_page(std::string_view observation);

}  // namespace eef::env
