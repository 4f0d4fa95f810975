#include "eef/experts/expert.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "eef/env/chainworld.hpp"
#include "eef/env/minishop.hpp"

namespace eef::experts {

using env::ActionToken;

void ExpertProfile::validate() const {
  for (double p : {p_overlook, p_recover, p_attempt_next, search_quality, navigation_fatigue})
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("ExpertProfile '" + label + "': probabilities must lie in [0, 1]");
}

ExpertProfile strong_profile() { return {0.2, 0.6, 0.6, 0.9, 0.6, "strong"}; }

ExpertProfile weak_profile() { return {0.3, 0.4, 0.4, 0.75, 0.6, "weak"}; }

double overlook_rate(const ExpertProfile& profile, std::size_t navigation_actions) {
  const double keep = std::pow(1.0 - profile.navigation_fatigue, static_cast<double>(navigation_actions));
  return 1.0 - (1.0 - profile.p_overlook) * keep;
}

std::size_t count_navigation(std::span<const env::HistoryEntry> history) {
  std::size_t n = 0;
  for (const auto& h : history) {
    if (h.action == env::kClickNext) ++n;
    else if (h.action == env::kClickBack && h.observation.find("\n[Product] ") != std::string::npos) ++n;
  }
  return n;
}

namespace {

const ActionToken& find_or_throw(const std::vector<ActionToken>& candidates, std::string_view text) {
  for (const auto& c : candidates)
    if (c.text == text) return c;
  throw env::EnvError("expected candidate '" + std::string(text) + "' is not offered");
}

bool offered(const std::vector<ActionToken>& candidates, std::string_view text) {
  return std::any_of(candidates.begin(), candidates.end(), [&](const ActionToken& c) { return c.text == text; });
}

int query_coverage(std::string_view query, const env::TaskConstraints& c) {
  std::vector<std::string> terms = {c.color, c.category};
  for (const auto& [g, v] : c.required_options) terms.push_back(v);
  int covered = 0;
  std::string padded = " " + std::string(query) + " ";
  for (const auto& t : terms)
    if (!t.empty() && padded.find(" " + t + " ") != std::string::npos) ++covered;
  return covered;
}

ActionToken shop_act(const ExpertProfile& profile, const std::string& observation,
                     const std::vector<ActionToken>& candidates, const env::TaskConstraints& constraints,
                     std::span<const env::HistoryEntry> history, Rng& rng) {
  const env::ShopPage page = env::parse_shop_page(observation);
  const double slip = overlook_rate(profile, count_navigation(history));

  switch (page.kind) {
    case env::ShopPage::Kind::search: {
      const ActionToken* best = &candidates.front();
      int best_cov = -1;
      for (const auto& c : candidates) {
        int cov = query_coverage(env::parse_shop_action(c.text, page).argument, constraints);
        if (cov > best_cov) {
          best_cov = cov;
          best = &c;
        }
      }
      return rng.bernoulli(profile.search_quality) ? *best : candidates.front();
    }
    case env::ShopPage::Kind::results: {
      std::vector<const env::ListedProduct*> matches;
      for (const auto& lp : page.listed)
        if (env::visible_match(lp, constraints).all()) matches.push_back(&lp);
      if (!matches.empty()) {
        if (rng.bernoulli(slip)) {
          // Overlook: pick the first listing that misses exactly one constraint.
          const env::ListedProduct* wrong = nullptr;
          for (const auto& lp : page.listed) {
            int count = env::visible_match(lp, constraints).count();
            if (count == 3) continue;
            if (wrong == nullptr || (count == 2 && env::visible_match(*wrong, constraints).count() != 2)) wrong = &lp;
          }
          if (wrong != nullptr) return find_or_throw(candidates, "click[" + wrong->pid + "]");
        }
        return find_or_throw(candidates, "click[" + matches.front()->pid + "]");
      }
      if (offered(candidates, env::kClickNext) && rng.bernoulli(profile.p_attempt_next))
        return find_or_throw(candidates, env::kClickNext);
      // Nothing matches and no paging: blindly take the closest listing.
      const env::ListedProduct* closest = &page.listed.front();
      for (const auto& lp : page.listed)
        if (env::visible_match(lp, constraints).count() > env::visible_match(*closest, constraints).count())
          closest = &lp;
      return find_or_throw(candidates, "click[" + closest->pid + "]");
    }
    case env::ShopPage::Kind::product: {
      bool missing_option = false;
      for (const auto& [g, v] : constraints.required_options) {
        auto it = page.options.find(g);
        if (it == page.options.end() || std::find(it->second.begin(), it->second.end(), v) == it->second.end())
          missing_option = true;
      }
      if (!env::visible_match(page.product, constraints).all() || missing_option) {
        if (rng.bernoulli(profile.p_recover)) return find_or_throw(candidates, env::kClickBack);
        return find_or_throw(candidates, env::kClickBuy);
      }
      for (const auto& [g, v] : constraints.required_options) {
        auto it = page.selected.find(g);
        if (it != page.selected.end() && it->second == v) continue;
        if (rng.bernoulli(slip)) return find_or_throw(candidates, env::kClickBuy);
        return find_or_throw(candidates, "click[" + v + "]");
      }
      return find_or_throw(candidates, env::kClickBuy);
    }
    case env::ShopPage::Kind::done: break;
  }
  throw env::EnvError("expert asked to act on a finished MiniShop episode");
}

ActionToken chain_act(const ExpertProfile& profile, const std::string& observation,
                      const std::vector<ActionToken>& candidates, Rng& rng) {
  const env::ChainPage page = env::parse_chain_page(observation);
  if (page.kind == env::ChainPage::Kind::mistake)
    return find_or_throw(candidates, rng.bernoulli(profile.p_recover) ? env::kClickResetStage : env::kClickContinue);
  if (page.kind == env::ChainPage::Kind::done) throw env::EnvError("expert asked to act on a finished episode");
  const std::string right = "click[" + page.needed + "]";
  if (rng.bernoulli(profile.p_overlook)) {
    std::vector<const ActionToken*> wrong;
    for (const auto& c : candidates)
      if (c.text != right) wrong.push_back(&c);
    if (!wrong.empty()) return *wrong[rng.below(wrong.size())];
  }
  return find_or_throw(candidates, right);
}

}  // namespace

ActionToken expert_act(const ExpertProfile& profile, const std::string& observation,
                       const std::vector<ActionToken>& candidates, const env::TaskConstraints& constraints,
                       std::span<const env::HistoryEntry> history, Rng& rng) {
  if (candidates.empty()) throw env::EnvError("expert_act: no candidates offered");
  if (env::is_shop_observation(observation))
    return shop_act(profile, observation, candidates, constraints, history, rng);
  if (env::is_chain_observation(observation)) return chain_act(profile, observation, candidates, rng);
  throw env::EnvError("expert_act: unrecognized observation format");
}

DatasetStats compute_stats(std::span<const core::Trajectory> trajectories) {
  DatasetStats s;
  s.total = trajectories.size();
  std::size_t steps = 0;
  for (const auto& t : trajectories) {
    if (t.positive()) ++s.positive;
    steps += t.size();
  }
  s.avg_len = s.total == 0 ? 0.0 : static_cast<double>(steps) / static_cast<double>(s.total);
  return s;
}

ExpertDataset generate_expert_dataset(env::Environment& env, std::span<const env::ContextId> contexts,
                                      const ExpertProfile& profile, std::uint64_t seed, std::uint64_t first_id) {
  profile.validate();
  ExpertDataset ds;
  ds.trajectories.reserve(contexts.size());
  const auto provenance = core::Provenance::expert(profile.label);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const auto ctx = contexts[i];
    Rng rng(derive_seed({seed, 0x657870ULL, ctx.id}));
    const env::TaskConstraints constraints = env.constraints(ctx);
    core::Trajectory traj;
    traj.id = first_id + i;
    traj.start = {ctx, core::Origin::initial()};
    core::extend_episode(
        env, env.reset(ctx), traj,
        [&](const env::StepResult& s) {
          return expert_act(profile, s.observation, s.candidates, constraints, s.snapshot.history, rng);
        },
        provenance, env.horizon());
    ds.trajectories.push_back(std::move(traj));
  }
  ds.stats = compute_stats(ds.trajectories);
  return ds;
}

ExpertProfile calibrate_profile(env::Environment& env, std::span<const env::ContextId> contexts,
                                const ExpertProfile& base, double target, double tol,
                                const CalibrationOptions& options) {
  base.validate();
  if (contexts.empty()) throw std::invalid_argument("calibrate_profile: no contexts");
  auto measure = [&](double p) {
    ExpertProfile prof = base;
    prof.p_overlook = p;
    return generate_expert_dataset(env, contexts, prof, options.eval_seed).stats.positive_fraction();
  };
  auto with = [&](double p) {
    ExpertProfile prof = base;
    prof.p_overlook = p;
    return prof;
  };

  double lo = 0.0;
  double hi = 1.0;
  const double ceiling = measure(lo);
  if (std::abs(ceiling - target) <= tol) return with(lo);
  if (ceiling < target)
    throw CalibrationError(fmt::format("calibrate_profile: target {:.3f} unreachable, ceiling is {:.3f} at "
                                       "p_overlook=0",
                                       target, ceiling),
                           lo, hi);
  const double floor = measure(hi);
  if (std::abs(floor - target) <= tol) return with(hi);
  if (floor > target)
    throw CalibrationError(fmt::format("calibrate_profile: target {:.3f} unreachable, floor is {:.3f} at "
                                       "p_overlook=1",
                                       target, floor),
                           lo, hi);

  double rate_lo = ceiling;
  double rate_hi = floor;
  for (int it = 0; it < options.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double rate = measure(mid);
    if (std::abs(rate - target) <= tol) return with(mid);
    if (rate > target) {
      lo = mid;
      rate_lo = rate;
    } else {
      hi = mid;
      rate_hi = rate;
    }
  }
  throw CalibrationError(fmt::format("calibrate_profile: no p_overlook within tolerance {:.3f} of {:.3f}; "
                                     "bracket [{:.6f}, {:.6f}] measures [{:.3f}, {:.3f}]",
                                     tol, target, lo, hi, rate_lo, rate_hi),
                         lo, hi);
}

}  // namespace eef::experts
