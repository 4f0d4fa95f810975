#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eef/harness/experiment.hpp"

namespace eef::harness {

/// Left-aligned first column, right-aligned others, two spaces between.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

std::string render_report(std::span<const MethodReport> reports);
/// One "seed" record per (method, seed) followed by one "aggregate" record per method.
std::string report_records(std::span<const MethodReport> reports);

std::string render_sweep(std::span<const SweepRow> rows);
std::string sweep_records(std::span<const SweepRow> rows);

nlohmann::json to_json(const NavigationStats& nav);
nlohmann::json to_json(const SeedResult& result);
nlohmann::json to_json(const ExpertRecord& record);

}  // namespace eef::harness
