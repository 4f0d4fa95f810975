#include "eef/harness/report.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace eef::harness {

using nlohmann::json;

namespace {

std::string pm(const Stat& s, int precision = 3) { return fmt::format("{:.{}f} ± {:.{}f}", s.mean, precision, s.sd, precision); }

// Display width, counting each UTF-8 code point once.
std::size_t width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

json stat_json(const Stat& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

}  // namespace

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = width(header[c]);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], width(r[c]));
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < w.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      const std::string pad(w[c] - width(cell), ' ');
      if (c > 0) out += "  ";
      out += c == 0 ? cell + pad : pad + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < w.size(); ++c) total += w[c] + (c > 0 ? 2 : 0);
  out += std::string(total, '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string render_report(std::span<const MethodReport> reports) {
  std::string out;
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports)
    rows.push_back({r.label, pm(r.win_rate), pm(r.avg_reward), pm(r.next_success_pct, 1), pm(r.back_success_pct, 1),
                    pm(r.next_attempt_pct, 1), pm(r.back_attempt_pct, 1), fmt::format("{:.0f}", r.budget.mean)});
  out += render_table({"method", "win rate", "reward", "next succ %", "back succ %", "next att %", "back att %",
                       "rollouts"},
                      rows);

  bool any_difficulty = false;
  rows.clear();
  for (const auto& r : reports) {
    if (r.by_difficulty.empty()) continue;
    any_difficulty = true;
    std::vector<std::string> row{r.label};
    for (const auto& [d, s] : r.by_difficulty) row.push_back(pm(s));
    rows.push_back(std::move(row));
  }
  if (any_difficulty) {
    out += "\nsolve rate by difficulty\n";
    out += render_table({"method", "easy", "needs_next", "needs_back"}, rows);
  }

  rows.clear();
  for (const auto& r : reports)
    for (const auto& s : r.seeds)
      rows.push_back({r.label, std::to_string(s.seed), fmt::format("{:.3f}", s.win_rate),
                      std::to_string(s.selected_iteration), std::to_string(s.budget)});
  out += "\nper seed\n";
  out += render_table({"method", "seed", "win rate", "selected", "rollouts"}, rows);
  return out;
}

json to_json(const NavigationStats& nav) {
  return {{"next_success_pct", nav.next_success_pct},
          {"back_success_pct", nav.back_success_pct},
          {"next_attempt_pct", nav.next_attempt_pct},
          {"back_attempt_pct", nav.back_attempt_pct}};
}

json to_json(const ExpertRecord& rec) {
  return {{"label", rec.profile.label},
          {"p_overlook", rec.profile.p_overlook},
          {"p_recover", rec.profile.p_recover},
          {"p_attempt_next", rec.profile.p_attempt_next},
          {"search_quality", rec.profile.search_quality},
          {"navigation_fatigue", rec.profile.navigation_fatigue},
          {"calibrated", rec.spec.calibrate},
          {"target", rec.spec.target},
          {"calibrated_rate", rec.calibrated_rate},
          {"first_id", rec.first_id},
          {"dataset", {{"total", rec.stats.total}, {"positive", rec.stats.positive}, {"avg_len", rec.stats.avg_len}}}};
}

json to_json(const SeedResult& s) {
  json experts = json::array();
  for (const auto& e : s.experts) experts.push_back(to_json(e));
  json diff = json::object();
  for (const auto& [d, c] : s.by_difficulty)
    diff[std::string(env::to_string(d))] = {{"solved", c.solved}, {"total", c.total}};
  return {{"seed", s.seed},
          {"win_rate", s.win_rate},
          {"avg_reward", s.avg_reward},
          {"navigation", to_json(s.navigation)},
          {"budget", s.budget},
          {"selected_iteration", s.selected_iteration},
          {"curves", {{"validation", s.validation_curve}, {"test", s.test_curve}}},
          {"by_difficulty", diff},
          {"experts", experts}};
}

std::string report_records(std::span<const MethodReport> reports) {
  std::string out;
  for (const auto& r : reports) {
    for (const auto& s : r.seeds) {
      json j = to_json(s);
      j["kind"] = "seed";
      j["method"] = to_string(r.method);
      j["label"] = r.label;
      out += j.dump() + "\n";
    }
  }
  for (const auto& r : reports) {
    json diff = json::object();
    for (const auto& [d, s] : r.by_difficulty) diff[std::string(env::to_string(d))] = stat_json(s);
    json j = {{"kind", "aggregate"},
              {"method", to_string(r.method)},
              {"label", r.label},
              {"n_seeds", r.seeds.size()},
              {"win_rate", stat_json(r.win_rate)},
              {"avg_reward", stat_json(r.avg_reward)},
              {"navigation",
               {{"next_success_pct", stat_json(r.next_success_pct)},
                {"back_success_pct", stat_json(r.back_success_pct)},
                {"next_attempt_pct", stat_json(r.next_attempt_pct)},
                {"back_attempt_pct", stat_json(r.back_attempt_pct)}}},
              {"budget", stat_json(r.budget)},
              {"by_difficulty", diff}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string render_sweep(std::span<const SweepRow> rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::string rollouts;
    if (!r.rollouts.empty()) {
      auto [lo, hi] = std::minmax_element(r.rollouts.begin(), r.rollouts.end());
      rollouts = *lo == *hi ? std::to_string(*lo) : fmt::format("{}-{}", *lo, *hi);
    }
    cells.push_back({std::string(to_string(r.entry.method)),
                     fmt::format("{}={}", r.entry.method == Method::eef ? "M" : "N", r.entry.budget), rollouts,
                     pm(r.win_rate)});
  }
  return render_table({"method", "budget", "rollouts", "win rate"}, cells);
}

std::string sweep_records(std::span<const SweepRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    json j = {{"kind", "sweep"},
              {"method", to_string(r.entry.method)},
              {"budget", r.entry.budget},
              {"rollouts", r.rollouts},
              {"win_rates", r.win_rates},
              {"win_rate", stat_json(r.win_rate)}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace eef::harness
