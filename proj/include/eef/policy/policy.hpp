#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eef/common/random.hpp"
#include "eef/core/trajectory.hpp"
#include "eef/policy/features.hpp"

namespace eef::policy {

struct PolicyParams {
  std::vector<double> weights;
  int schema_version = kFeatureSchemaVersion;

  static PolicyParams zeros(const Featurizer& featurizer);

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 6;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// w . phi(c) for every candidate row.
std::vector<double> candidate_scores(const PolicyParams& params, const CandidateFeatures& features);

/// softmax(scores / temperature), computed with the max subtracted.
std::vector<double> softmax(std::span<const double> scores, double temperature);

std::vector<double> action_distribution(const PolicyParams& params, const CandidateFeatures& features,
                                        double temperature);

/// Categorical draw; consumes exactly one uniform from `rng`.
std::size_t sample_index(std::span<const double> probabilities, Rng& rng);

/// Highest score, ties to the earliest candidate.
std::size_t greedy_index(const PolicyParams& params, const CandidateFeatures& features);

/// Parameters bound to the featurizer that produced them.
class Policy {
public:
  Policy(PolicyParams params, Featurizer featurizer);

  const PolicyParams& params() const { return params_; }
  const Featurizer& featurizer() const { return featurizer_; }

  std::vector<double> action_distribution(const std::string& observation,
                                          const std::vector<env::ActionToken>& candidates,
                                          const env::TaskConstraints& constraints, double temperature) const;
  env::ActionToken sample_action(const std::string& observation, const std::vector<env::ActionToken>& candidates,
                                 const env::TaskConstraints& constraints, double temperature, Rng& rng) const;
  env::ActionToken greedy_action(const std::string& observation, const std::vector<env::ActionToken>& candidates,
                                 const env::TaskConstraints& constraints) const;

private:
  PolicyParams params_;
  Featurizer featurizer_;
};

struct StepFeatures {
  CandidateFeatures candidates;
  std::size_t chosen = 0;
};

/// A trajectory prepared for the loss. Steps before mask_start are kept only
/// as placeholders and never read.
struct FeaturizedExample {
  std::vector<StepFeatures> steps;
  std::size_t mask_start = 0;
};

FeaturizedExample featurize_example(const core::Trajectory& trajectory, std::size_t mask_start,
                                    const env::TaskConstraints& constraints, const Featurizer& featurizer,
                                    bool negative_exemplar = false);

/// -sum over examples and steps t >= mask_start of log pi(a_t | s_t) at temperature 1.
double masked_sft_loss(const PolicyParams& params, std::span<const FeaturizedExample> examples);

std::vector<double> grad_masked_sft(const PolicyParams& params, std::span<const FeaturizedExample> examples);

/// Mini-batch gradient descent on the summed loss of each batch.
PolicyParams sft_update(const PolicyParams& params, std::span<const FeaturizedExample> examples,
                        const TrainConfig& config);

inline constexpr const char* kCheckpointMagic = "eef-policy-checkpoint";
inline constexpr int kCheckpointVersion = 1;

std::string serialize_checkpoint(const PolicyParams& params);
PolicyParams parse_checkpoint(const std::string& text);
void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace eef::policy
