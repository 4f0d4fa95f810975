#include "eef/env/environment.hpp"

#include <algorithm>

namespace eef::env {

StepResult EnvironmentBase::reset(ContextId context) {
  begin_episode(context);
  history_.clear();
  started_ = true;
  return emit();
}

StepResult EnvironmentBase::restore(const StateSnapshot& snapshot) {
  if (snapshot.env_kind != kind())
    throw EnvError("cannot restore a " + std::string(to_string(snapshot.env_kind)) + " snapshot on a " +
                   std::string(to_string(kind())) + " environment");
  if (snapshot.history.size() != snapshot.step_index)
    throw EnvError("snapshot history length does not match step index");
  load_state(snapshot.internal_state);
  history_ = snapshot.history;
  started_ = true;
  return emit();
}

StepResult EnvironmentBase::step(const ActionToken& action) {
  if (!started_) throw EnvError("step called before reset");
  if (current_.done) throw EnvError("step called on a finished episode");
  if (std::find(current_.candidates.begin(), current_.candidates.end(), action) == current_.candidates.end())
    throw EnvError("action '" + action.text + "' is not among the offered candidates");
  history_.push_back({current_.observation, action.text});
  apply(action);
  return emit();
}

StepResult EnvironmentBase::emit() {
  current_ = render();
  StepResult r;
  r.observation = current_.observation;
  r.candidates = current_.candidates;
  r.reward = current_.done ? current_.reward : 0.0;
  r.done = current_.done;
  if (r.done) r.candidates.clear();
  r.snapshot.env_kind = kind();
  r.snapshot.internal_state = save_state();
  r.snapshot.history = history_;
  r.snapshot.step_index = static_cast<std::uint32_t>(history_.size());
  return r;
}

}  // namespace eef::env
