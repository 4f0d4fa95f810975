#include "eef/policy/features.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "eef/env/chainworld.hpp"
#include "eef/env/minishop.hpp"

namespace eef::policy {

namespace {

using Row = std::span<double>;

bool has_term(std::string_view query, const std::string& term) {
  if (term.empty()) return false;
  std::string padded = " " + std::string(query) + " ";
  return padded.find(" " + term + " ") != std::string::npos;
}

void shop_row(const env::ShopPage& page, const env::ActionToken& candidate, const env::TaskConstraints& c, Row f) {
  const auto action = env::parse_shop_action(candidate.text, page);
  using K = env::ShopAction::Kind;

  bool any_match = false;
  for (const auto& lp : page.listed) any_match = any_match || env::visible_match(lp, c).all();
  if (page.kind == env::ShopPage::Kind::results) {
    f[kPageIndex] = static_cast<double>(page.page_index) / 2.0;
    f[kAnyMatchOnPage] = any_match ? 1.0 : 0.0;
  }

  // Buy looks ready once every required option the page offers is selected,
  // even when the product lacks one altogether.
  std::size_t n_required = c.required_options.size();
  std::size_t n_selected = 0;
  std::size_t n_pending = 0;
  bool missing_option = false;
  if (page.kind == env::ShopPage::Kind::product) {
    for (const auto& [g, v] : c.required_options) {
      auto sel = page.selected.find(g);
      const bool selected = sel != page.selected.end() && sel->second == v;
      if (selected) ++n_selected;
      auto opt = page.options.find(g);
      if (opt == page.options.end() || std::find(opt->second.begin(), opt->second.end(), v) == opt->second.end())
        missing_option = true;
      else if (!selected)
        ++n_pending;
    }
    f[kRequiredSelected] = n_required == 0 ? 1.0 : static_cast<double>(n_selected) / n_required;
  }

  switch (action.kind) {
    case K::search: {
      f[kIsSearch] = 1.0;
      double covered = double(has_term(action.argument, c.color)) + double(has_term(action.argument, c.category));
      f[kSearchCoverage] = covered / 2.0;
      bool refined = false;
      for (const auto& [g, v] : c.required_options) refined = refined || has_term(action.argument, v);
      f[kSearchRefined] = refined ? 1.0 : 0.0;
      break;
    }
    case K::next:
      f[kIsNext] = 1.0;
      f[any_match ? kNextWithMatch : kNextNoMatch] = 1.0;
      break;
    case K::prev: f[kIsPrev] = 1.0; break;
    case K::back:
      f[kIsBack] = 1.0;
      if (page.kind == env::ShopPage::Kind::results) {
        f[kBackFromResults] = 1.0;
      } else if (missing_option) {
        f[kBackMissingOption] = 1.0;
      } else if (!env::visible_match(page.product, c).all()) {
        f[kBackProductMismatch] = 1.0;
      } else {
        f[kBackProductOk] = 1.0;
      }
      break;
    case K::product: {
      f[kIsSelectProduct] = 1.0;
      auto it = std::find_if(page.listed.begin(), page.listed.end(),
                             [&](const env::ListedProduct& lp) { return lp.pid == action.argument; });
      if (it == page.listed.end()) throw env::EnvError("product " + action.argument + " is not listed on the page");
      auto vm = env::visible_match(*it, c);
      f[kProductCategoryMatch] = vm.category;
      f[kProductColorMatch] = vm.color;
      f[kProductPriceOk] = vm.price;
      f[kProductFullMatch] = vm.all();
      break;
    }
    case K::option: {
      f[kIsSelectOption] = 1.0;
      bool required = false;
      bool again = false;
      for (const auto& [g, v] : c.required_options) {
        if (v != action.argument) continue;
        required = true;
        auto sel = page.selected.find(g);
        again = sel != page.selected.end() && sel->second == v;
      }
      f[!required ? kOptionOther : again ? kOptionRequiredAgain : kOptionRequired] = 1.0;
      break;
    }
    case K::buy:
      f[kIsBuy] = 1.0;
      f[n_pending == 0 ? kBuyReady : kBuyMissingRequired] = 1.0;
      break;
  }
}

void chain_row(const env::ChainPage& page, const env::ActionToken& candidate, Row f) {
  if (page.kind == env::ChainPage::Kind::mistake) {
    f[candidate.text == env::kClickResetStage ? kChainReset : kChainContinue] = 1.0;
  } else if (page.kind == env::ChainPage::Kind::stage) {
    f[kChainChoose] = 1.0;
    f[kChainChooseNeeded] = candidate.text == "click[" + page.needed + "]" ? 1.0 : 0.0;
  }
}

}  // namespace

CandidateFeatures Featurizer::featurize_all(const std::string& observation,
                                            std::span<const env::ActionToken> candidates,
                                            const env::TaskConstraints& constraints, bool negative_exemplar) const {
  CandidateFeatures out;
  out.rows = candidates.size();
  out.cols = dimension();
  out.data.assign(out.rows * out.cols, 0.0);

  if (env::is_shop_observation(observation)) {
    const auto page = env::parse_shop_page(observation);
    for (std::size_t i = 0; i < candidates.size(); ++i) shop_row(page, candidates[i], constraints, out.row(i));
  } else if (env::is_chain_observation(observation)) {
    const auto page = env::parse_chain_page(observation);
    for (std::size_t i = 0; i < candidates.size(); ++i) chain_row(page, candidates[i], out.row(i));
  } else {
    throw env::EnvError("featurize: unrecognized observation format");
  }
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto r = out.row(i);
    r[kBias] = 1.0;
    if (negative_block_ && negative_exemplar)
      std::copy(r.begin(), r.begin() + kBaseFeatureCount, r.begin() + kBaseFeatureCount);
  }
  return out;
}

FeatureVector Featurizer::featurize(const std::string& observation, const env::ActionToken& candidate,
                                    const env::TaskConstraints& constraints, bool negative_exemplar) const {
  auto m = featurize_all(observation, std::span<const env::ActionToken>(&candidate, 1), constraints, negative_exemplar);
  return {std::move(m.data), schema_version()};
}

void Featurizer::check_schema(int schema_version, std::size_t dimension) const {
  if (schema_version != this->schema_version() || dimension != this->dimension())
    throw SchemaError(fmt::format("feature schema mismatch: parameters have schema {} with {} weights, featurizer "
                                  "expects schema {} with {}",
                                  schema_version, dimension, this->schema_version(), this->dimension()));
}

}  // namespace eef::policy
