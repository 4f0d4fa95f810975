#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eef/env/environment.hpp"

namespace eef::env {

inline constexpr std::string_view kClickNext = "click[Next]";
inline constexpr std::string_view kClickPrev = "click[Prev]";
inline constexpr std::string_view kClickBack = "click[Back to Search]";
inline constexpr std::string_view kClickBuy = "click[Buy Now]";

inline constexpr std::size_t kMiniShopHorizon = 15;

struct Product {
  std::string pid;
  std::string brand;
  std::string category;
  std::string color;
  std::int64_t price_cents = 0;
  std::map<std::string, std::vector<std::string>> option_groups;
  std::string title;

  bool has_option(const std::string& group, const std::string& value) const;

  friend bool operator==(const Product&, const Product&) = default;
};

enum class Difficulty : std::uint8_t { easy, needs_next, needs_back };

std::string_view to_string(Difficulty d);

struct TaskSpec {
  std::uint32_t task_id = 0;
  Split split = Split::train;
  std::string instruction;
  TaskConstraints constraints;
  std::string target_pid;
  Difficulty difficulty = Difficulty::easy;
  std::string query_partial;  // category only
  std::string query_full;     // color + category
  std::string query_refined;  // full query plus required option values
  /// Final ranked result list (pids) for each offered query.
  std::map<std::string, std::vector<std::string>> results;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct DifficultyMix {
  double easy = 0.4;
  double needs_next = 0.3;
  double needs_back = 0.3;
};

struct MiniShopConfig {
  std::size_t n_products = 60;
  std::size_t page_size = 3;
  std::size_t n_tasks_train = 40;
  std::size_t n_tasks_test = 20;
  DifficultyMix difficulty_mix;
  std::uint64_t seed = 7;

  void validate() const;
};

/// 1 iff category matches, price <= max_price, the color constraint holds
/// (product color or a chosen "color" option) and every required option was
/// chosen with the required value.
int judge_purchase(const Product& product, const std::map<std::string, std::string>& chosen_options,
                   const TaskConstraints& constraints);

/// Lexical-overlap ranking: score = number of distinct query tokens found in
/// the product's title or option values; zero-score products are dropped;
/// ties are ordered by a seeded per-product hash.
std::vector<const Product*> rank_results(std::span<const Product> catalog, std::string_view query,
                                         std::uint64_t seed);

class MiniShopEnv final : public EnvironmentBase {
public:
  MiniShopEnv(MiniShopConfig config, std::vector<Product> catalog, std::vector<TaskSpec> tasks);

  EnvKind kind() const override { return EnvKind::minishop; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<MiniShopEnv>(*this); }
  const std::vector<ContextId>& train_contexts() const override { return train_; }
  const std::vector<ContextId>& test_contexts() const override { return test_; }
  TaskConstraints constraints(ContextId context) const override { return task(context).constraints; }
  std::size_t horizon() const override { return kMiniShopHorizon; }

  const MiniShopConfig& config() const { return config_; }
  const std::vector<Product>& catalog() const { return catalog_; }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  const TaskSpec& task(ContextId context) const;
  const Product& product(std::string_view pid) const;

  /// Catalog and task split as JSON lines, preceded by a schema header line.
  std::string export_records() const;

protected:
  void begin_episode(ContextId context) override;
  void load_state(std::string_view blob) override;
  std::string save_state() const override;
  Frame render() const override;
  void apply(const ActionToken& action) override;

private:
  enum class Page : std::uint8_t { search, results, product, done };

  struct State {
    std::uint32_t task = 0;
    Page page = Page::search;
    std::string query;
    std::uint32_t page_index = 0;
    std::string pid;
    std::map<std::string, std::string> selected;
    bool visited_product = false;
    int reward = 0;
  };

  const std::vector<std::string>& current_results() const;

  MiniShopConfig config_;
  std::vector<Product> catalog_;
  std::vector<TaskSpec> tasks_;
  std::map<std::uint32_t, std::size_t> task_index_;
  std::map<std::string, std::size_t, std::less<>> product_index_;
  std::vector<ContextId> train_;
  std::vector<ContextId> test_;
  std::uint64_t signature_ = 0;
  State state_;
};

MiniShopEnv generate_minishop(const MiniShopConfig& config);

// ---------------------------------------------------------------------------
// Structured view of a rendered MiniShop observation, shared by the scripted
// experts and the policy featurizer.

struct ListedProduct {
  std::string pid;
  std::string title;
  std::int64_t price_cents = 0;
};

struct ShopPage {
  enum class Kind : std::uint8_t { search, results, product, done } kind = Kind::search;
  std::string instruction;
  // results page
  std::string query;
  std::size_t page_index = 0;
  std::size_t page_count = 0;
  std::vector<ListedProduct> listed;
  // product page
  ListedProduct product;
  std::map<std::string, std::vector<std::string>> options;
  std::map<std::string, std::string> selected;
};

ShopPage parse_shop_page(std::string_view observation);
bool is_shop_observation(std::string_view observation);

struct ShopAction {
  enum class Kind : std::uint8_t { search, next, prev, back, product, option, buy } kind = Kind::search;
  std::string argument;  // query, pid or option value
};

/// Classifies an action token; product vs option clicks are told apart by the
/// page the action is offered on.
ShopAction parse_shop_action(std::string_view text, const ShopPage& page);

struct VisibleMatch {
  bool category = false;
  bool color = false;
  bool price = false;

  bool all() const { return category && color && price; }
  int count() const { return int(category) + int(color) + int(price); }
};

/// Constraint checks an agent can make from a listing alone.
VisibleMatch visible_match(const ListedProduct& listed, const TaskConstraints& constraints);

std::string format_price(std::int64_t cents);

}  // namespace eef::env
