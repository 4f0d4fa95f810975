#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eef/env/types.hpp"

namespace eef::policy {

inline constexpr int kFeatureSchemaVersion = 1;
/// Base features plus a copy gated by the exemplar-negative flag.
inline constexpr int kNegativeAwareSchemaVersion = 2;

// Per-candidate feature layout. Interaction slots are nonzero only for the
// action type named in their prefix.
enum Feature : std::size_t {
  kBias,
  kIsSearch,
  kIsNext,
  kIsPrev,
  kIsBack,
  kIsSelectProduct,
  kIsSelectOption,
  kIsBuy,
  kProductCategoryMatch,
  kProductColorMatch,
  kProductPriceOk,
  kProductFullMatch,
  kPageIndex,
  kAnyMatchOnPage,
  kNextNoMatch,
  kNextWithMatch,
  kBackFromResults,
  kBackMissingOption,
  kBackProductMismatch,
  kBackProductOk,
  kBuyReady,
  kBuyMissingRequired,
  kOptionRequired,
  kOptionRequiredAgain,
  kOptionOther,
  kSearchCoverage,
  kSearchRefined,
  kRequiredSelected,
  kChainChoose,
  kChainChooseNeeded,
  kChainReset,
  kChainContinue,
  kBaseFeatureCount
};

class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct FeatureVector {
  std::vector<double> values;
  int schema_version = kFeatureSchemaVersion;
};

/// Row-major (candidates x dimension) feature matrix of one decision point.
struct CandidateFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

class Featurizer {
public:
  explicit Featurizer(bool negative_exemplar_block = false) : negative_block_(negative_exemplar_block) {}

  int schema_version() const { return negative_block_ ? kNegativeAwareSchemaVersion : kFeatureSchemaVersion; }
  std::size_t dimension() const { return negative_block_ ? 2 * kBaseFeatureCount : kBaseFeatureCount; }
  bool negative_exemplar_block() const { return negative_block_; }

  FeatureVector featurize(const std::string& observation, const env::ActionToken& candidate,
                          const env::TaskConstraints& constraints, bool negative_exemplar = false) const;

  /// Features for every candidate; the observation is parsed once.
  CandidateFeatures featurize_all(const std::string& observation, std::span<const env::ActionToken> candidates,
                                  const env::TaskConstraints& constraints, bool negative_exemplar = false) const;

  void check_schema(int schema_version, std::size_t dimension) const;

private:
  bool negative_block_;
};

}  // namespace eef::policy
