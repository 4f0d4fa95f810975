#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eef/common/random.hpp"
#include "eef/core/trajectory.hpp"
#include "eef/env/environment.hpp"

namespace eef::experts {

/// Behavior knobs of a scripted expert.
///
/// The overlook rate grows with the navigation the expert has already done:
/// after n navigation actions (Next, or Back from a product page) a pick is
/// right with probability (1 - p_overlook) * (1 - navigation_fatigue)^n. This
/// reproduces experts that try Next/Back but then fail for other reasons.
struct ExpertProfile {
  double p_overlook = 0.2;          // ignore one constraint when picking a product or option
  double p_recover = 0.6;           // Back to Search after landing on a wrong product page
  double p_attempt_next = 0.6;      // page forward when nothing on the page matches
  double search_quality = 0.9;      // use the most specific query offered
  double navigation_fatigue = 0.6;  // extra slip per navigation action taken
  std::string label = "strong";

  void validate() const;
};

ExpertProfile strong_profile();
ExpertProfile weak_profile();

double overlook_rate(const ExpertProfile& profile, std::size_t navigation_actions);

/// Number of navigation actions in an episode history.
std::size_t count_navigation(std::span<const env::HistoryEntry> history);

env::ActionToken expert_act(const ExpertProfile& profile, const std::string& observation,
                            const std::vector<env::ActionToken>& candidates, const env::TaskConstraints& constraints,
                            std::span<const env::HistoryEntry> history, Rng& rng);

struct DatasetStats {
  std::size_t total = 0;
  std::size_t positive = 0;
  double avg_len = 0.0;

  double positive_fraction() const { return total == 0 ? 0.0 : static_cast<double>(positive) / total; }

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct ExpertDataset {
  std::vector<core::Trajectory> trajectories;
  DatasetStats stats;
};

DatasetStats compute_stats(std::span<const core::Trajectory> trajectories);

/// One expert episode per context, with per-context RNG streams derived from
/// (seed, context id). Trajectory ids are first_id, first_id + 1, ...
ExpertDataset generate_expert_dataset(env::Environment& env, std::span<const env::ContextId> contexts,
                                      const ExpertProfile& profile, std::uint64_t seed, std::uint64_t first_id = 0);

class CalibrationError : public std::runtime_error {
public:
  CalibrationError(const std::string& what, double lo, double hi) : std::runtime_error(what), lo_(lo), hi_(hi) {}
  double bracket_lo() const { return lo_; }
  double bracket_hi() const { return hi_; }

private:
  double lo_;
  double hi_;
};

struct CalibrationOptions {
  std::uint64_t eval_seed = 0;
  int max_iterations = 24;
};

/// Bisection on p_overlook (all other fields fixed) until the measured win
/// rate over `contexts` is within `tol` of `target`.
ExpertProfile calibrate_profile(env::Environment& env, std::span<const env::ContextId> contexts,
                                const ExpertProfile& base, double target, double tol,
                                const CalibrationOptions& options = {});

}  // namespace eef::experts
