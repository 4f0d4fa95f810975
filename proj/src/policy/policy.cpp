#include "eef/policy/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace eef::policy {

PolicyParams PolicyParams::zeros(const Featurizer& featurizer) {
  return {std::vector<double>(featurizer.dimension(), 0.0), featurizer.schema_version()};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
}

std::vector<double> candidate_scores(const PolicyParams& params, const CandidateFeatures& features) {
  if (features.cols != params.weights.size())
    throw SchemaError(fmt::format("feature dimension {} does not match {} weights", features.cols,
                                  params.weights.size()));
  std::vector<double> scores(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    auto r = features.row(i);
    scores[i] = std::inner_product(r.begin(), r.end(), params.weights.begin(), 0.0);
  }
  return scores;
}

std::vector<double> softmax(std::span<const double> scores, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  if (scores.empty()) throw std::invalid_argument("softmax: no candidates");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp((scores[i] - top) / temperature);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> action_distribution(const PolicyParams& params, const CandidateFeatures& features,
                                        double temperature) {
  return softmax(candidate_scores(params, features), temperature);
}

std::size_t sample_index(std::span<const double> probabilities, Rng& rng) {
  if (probabilities.empty()) throw std::invalid_argument("sample_index: no candidates");
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    acc += probabilities[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::size_t greedy_index(const PolicyParams& params, const CandidateFeatures& features) {
  if (features.rows == 0) throw std::invalid_argument("greedy_index: no candidates");
  auto scores = candidate_scores(params, features);
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

Policy::Policy(PolicyParams params, Featurizer featurizer) : params_(std::move(params)), featurizer_(featurizer) {
  featurizer_.check_schema(params_.schema_version, params_.weights.size());
}

std::vector<double> Policy::action_distribution(const std::string& observation,
                                                const std::vector<env::ActionToken>& candidates,
                                                const env::TaskConstraints& constraints, double temperature) const {
  if (candidates.empty()) throw std::invalid_argument("action_distribution: no candidates");
  if (!(temperature > 0.0)) throw std::invalid_argument("action_distribution: temperature must be positive");
  return policy::action_distribution(params_, featurizer_.featurize_all(observation, candidates, constraints),
                                     temperature);
}

env::ActionToken Policy::sample_action(const std::string& observation, const std::vector<env::ActionToken>& candidates,
                                       const env::TaskConstraints& constraints, double temperature, Rng& rng) const {
  auto p = action_distribution(observation, candidates, constraints, temperature);
  return candidates[sample_index(p, rng)];
}

env::ActionToken Policy::greedy_action(const std::string& observation, const std::vector<env::ActionToken>& candidates,
                                       const env::TaskConstraints& constraints) const {
  if (candidates.empty()) throw std::invalid_argument("greedy_action: no candidates");
  return candidates[greedy_index(params_, featurizer_.featurize_all(observation, candidates, constraints))];
}

FeaturizedExample featurize_example(const core::Trajectory& trajectory, std::size_t mask_start,
                                    const env::TaskConstraints& constraints, const Featurizer& featurizer,
                                    bool negative_exemplar) {
  if (mask_start > trajectory.size())
    throw TrainingError(fmt::format("trajectory {}: mask_start {} beyond length {}", trajectory.id, mask_start,
                                    trajectory.size()));
  FeaturizedExample ex;
  ex.mask_start = mask_start;
  ex.steps.resize(trajectory.size());
  for (std::size_t t = mask_start; t < trajectory.size(); ++t) {
    const auto& step = trajectory.steps[t];
    auto it = std::find(step.candidates.begin(), step.candidates.end(), step.action);
    if (it == step.candidates.end())
      throw TrainingError(fmt::format("trajectory {} step {}: recorded action '{}' is not among its candidates",
                                      trajectory.id, t, step.action.text));
    ex.steps[t].candidates = featurizer.featurize_all(step.observation, step.candidates, constraints, negative_exemplar);
    ex.steps[t].chosen = static_cast<std::size_t>(it - step.candidates.begin());
  }
  return ex;
}

namespace {

void check_step(const StepFeatures& s, std::size_t ex, std::size_t t) {
  if (s.candidates.rows == 0 || s.chosen >= s.candidates.rows)
    throw TrainingError(fmt::format("example {} step {}: recorded action is not among its candidates", ex, t));
}

// Adds -log pi(a|s) to loss and its gradient to grad (when non-null).
double accumulate(const PolicyParams& params, std::span<const FeaturizedExample> examples,
                  std::vector<double>* grad) {
  double loss = 0.0;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const auto& ex = examples[e];
    for (std::size_t t = ex.mask_start; t < ex.steps.size(); ++t) {
      const auto& s = ex.steps[t];
      check_step(s, e, t);
      auto scores = candidate_scores(params, s.candidates);
      const double top = *std::max_element(scores.begin(), scores.end());
      double z = 0.0;
      for (double x : scores) z += std::exp(x - top);
      loss += top + std::log(z) - scores[s.chosen];
      if (grad == nullptr) continue;
      for (std::size_t c = 0; c < s.candidates.rows; ++c) {
        const double p = std::exp(scores[c] - top) / z;
        auto r = s.candidates.row(c);
        for (std::size_t j = 0; j < r.size(); ++j) (*grad)[j] += p * r[j];
      }
      auto chosen = s.candidates.row(s.chosen);
      for (std::size_t j = 0; j < chosen.size(); ++j) (*grad)[j] -= chosen[j];
    }
  }
  return loss;
}

}  // namespace

double masked_sft_loss(const PolicyParams& params, std::span<const FeaturizedExample> examples) {
  return accumulate(params, examples, nullptr);
}

std::vector<double> grad_masked_sft(const PolicyParams& params, std::span<const FeaturizedExample> examples) {
  std::vector<double> grad(params.weights.size(), 0.0);
  accumulate(params, examples, &grad);
  return grad;
}

PolicyParams sft_update(const PolicyParams& params, std::span<const FeaturizedExample> examples,
                        const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw TrainingError("sft_update: no training examples");
  PolicyParams out = params;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed({config.seed, 0x736674ULL}));
  std::vector<FeaturizedExample> batch;
  std::vector<double> grad(out.weights.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t i = begin; i < end; ++i)
        loss += accumulate(out, std::span<const FeaturizedExample>(&examples[order[i]], 1), &grad);
      if (!std::isfinite(loss))
        throw TrainingError(fmt::format("sft_update: non-finite loss {} at epoch {}, batch starting at {} "
                                        "(learning_rate {})",
                                        loss, epoch, begin, config.learning_rate));
      for (std::size_t j = 0; j < grad.size(); ++j) out.weights[j] -= config.learning_rate * grad[j];
      if (!std::all_of(out.weights.begin(), out.weights.end(), [](double w) { return std::isfinite(w); }))
        throw TrainingError(fmt::format("sft_update: weights became non-finite at epoch {} (batch loss {}, "
                                        "learning_rate {})",
                                        epoch, loss, config.learning_rate));
    }
  }
  return out;
}

std::string serialize_checkpoint(const PolicyParams& params) {
  std::string out = fmt::format("{} {}\nschema_version {}\ndimension {}\n", kCheckpointMagic, kCheckpointVersion,
                                params.schema_version, params.weights.size());
  for (double w : params.weights) out += fmt::format("{:.17g}\n", w);
  return out;
}

PolicyParams parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  std::string key;
  PolicyParams params;
  std::size_t dim = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic)
    throw std::runtime_error("checkpoint: missing header");
  if (version != kCheckpointVersion)
    throw std::runtime_error(fmt::format("checkpoint: unsupported version {}", version));
  if (!(in >> key >> params.schema_version) || key != "schema_version")
    throw std::runtime_error("checkpoint: missing schema_version");
  if (!(in >> key >> dim) || key != "dimension") throw std::runtime_error("checkpoint: missing dimension");
  params.weights.reserve(dim);
  std::string token;
  while (in >> token) {
    double w = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), w);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(w))
      throw std::runtime_error("checkpoint: bad weight '" + token + "'");
    params.weights.push_back(w);
  }
  if (params.weights.size() != dim)
    throw std::runtime_error(fmt::format("checkpoint: expected {} weights, found {}", dim, params.weights.size()));
  return params;
}

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << serialize_checkpoint(params);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace eef::policy
