#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eef/core/trajectory.hpp"
#include "eef/env/environment.hpp"

namespace eef::harness {

class PersistenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kDatasetSchema = "eef-trajectories";
inline constexpr int kDatasetVersion = 1;

// One JSON object per line after a header line
//   {"count":N,"schema":"eef-trajectories","version":1}
// Snapshots are not stored; rehydrate() rebuilds them by replay.
std::string serialize_dataset(std::span<const core::Trajectory> trajectories);
std::vector<core::Trajectory> parse_dataset(const std::string& text);

void persist_dataset(std::span<const core::Trajectory> trajectories, const std::string& path);
std::vector<core::Trajectory> load_dataset(const std::string& path);

/// Replays the recorded actions from reset and restores every step's
/// snapshot. Throws PersistenceError if a fingerprint, observation or the
/// terminal reward disagrees with the recording.
void rehydrate(env::Environment& env, core::Trajectory& trajectory);
void rehydrate(env::Environment& env, std::span<core::Trajectory> trajectories);

}  // namespace eef::harness
