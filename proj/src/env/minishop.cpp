#include "eef/env/minishop.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "eef/common/codec.hpp"
#include "eef/common/random.hpp"
#include "eef/env/oracle.hpp"

namespace eef::env {

namespace {

constexpr std::array<std::string_view, 10> kBrands = {"Luma", "Orbit", "Nexa", "Vela", "Kiro",
                                                      "Tamo", "Zeni",  "Paxo", "Rivo", "Sola"};
constexpr std::array<std::string_view, 5> kCategories = {"t-shirt", "jacket", "lamp", "sofa", "shampoo"};
constexpr std::array<std::string_view, 4> kColors = {"black", "white", "red", "blue"};
constexpr std::array<std::string_view, 5> kSizes = {"xs", "s", "m", "l", "xl"};
constexpr std::array<std::string_view, 3> kPacks = {"1 pack", "2 pack", "3 pack"};

constexpr std::string_view kStateTag = "minishop/1";
constexpr std::string_view kExportSchema = "eef-minishop-export";
constexpr int kExportVersion = 1;
constexpr std::size_t kResultPages = 3;

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

bool contains_token(std::string_view text, std::string_view token) {
  auto toks = tokenize(text);
  return std::find(toks.begin(), toks.end(), token) != toks.end();
}

std::string_view strip_prefix(std::string_view s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) throw EnvError("unexpected observation line '" + std::string(s) + "'");
  return s.substr(prefix.size());
}

std::int64_t parse_price(std::string_view text) {
  text = strip_prefix(text, "$");
  auto dot = text.find('.');
  if (dot == std::string_view::npos || text.size() != dot + 3) throw EnvError("malformed price '" + std::string(text) + "'");
  std::int64_t dollars = std::stoll(std::string(text.substr(0, dot)));
  std::int64_t cents = std::stoll(std::string(text.substr(dot + 1)));
  return dollars * 100 + cents;
}

std::vector<std::string> split(std::string_view text, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = text.find(sep, pos);
    out.emplace_back(text.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + sep.size();
  }
  return out;
}

std::string bracket_arg(std::string_view text, std::string_view head) {
  if (text.size() < head.size() + 2 || text.substr(0, head.size()) != head || text[head.size()] != '[' ||
      text.back() != ']')
    throw EnvError("malformed action '" + std::string(text) + "'");
  return std::string(text.substr(head.size() + 1, text.size() - head.size() - 2));
}

std::string click(std::string_view arg) { return fmt::format("click[{}]", arg); }

std::uint64_t config_signature(const MiniShopConfig& c) {
  FieldWriter w;
  w.put("minishop-config/1")
      .put_uint(c.n_products)
      .put_uint(c.page_size)
      .put_uint(c.n_tasks_train)
      .put_uint(c.n_tasks_test)
      .put(fmt::format("{:.17g}", c.difficulty_mix.easy))
      .put(fmt::format("{:.17g}", c.difficulty_mix.needs_next))
      .put(fmt::format("{:.17g}", c.difficulty_mix.needs_back))
      .put_uint(c.seed);
  return fnv1a64(w.str());
}

}  // namespace

// ---------------------------------------------------------------------------

bool Product::has_option(const std::string& group, const std::string& value) const {
  auto it = option_groups.find(group);
  return it != option_groups.end() && std::find(it->second.begin(), it->second.end(), value) != it->second.end();
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::needs_next: return "needs_next";
    case Difficulty::needs_back: return "needs_back";
  }
  return "unknown";
}

std::string format_price(std::int64_t cents) { return fmt::format("${}.{:02}", cents / 100, cents % 100); }

void MiniShopConfig::validate() const {
  if (n_products == 0) throw EnvError("MiniShopConfig: n_products must be positive");
  if (page_size < 2) throw EnvError("MiniShopConfig: page_size must be at least 2");
  if (n_tasks_train + n_tasks_test == 0) throw EnvError("MiniShopConfig: no tasks requested");
  const auto& m = difficulty_mix;
  for (double f : {m.easy, m.needs_next, m.needs_back})
    if (!(f >= 0.0 && f <= 1.0)) throw EnvError("MiniShopConfig: difficulty fractions must lie in [0, 1]");
  if (std::abs(m.easy + m.needs_next + m.needs_back - 1.0) > 1e-9)
    throw EnvError("MiniShopConfig: difficulty fractions must sum to 1");
}

int judge_purchase(const Product& product, const std::map<std::string, std::string>& chosen_options,
                   const TaskConstraints& constraints) {
  if (product.category != constraints.category) return 0;
  if (product.price_cents > constraints.max_price_cents) return 0;
  if (!constraints.color.empty()) {
    auto it = chosen_options.find("color");
    const std::string& effective = it != chosen_options.end() ? it->second : product.color;
    if (effective != constraints.color) return 0;
  }
  for (const auto& [group, value] : constraints.required_options) {
    auto it = chosen_options.find(group);
    if (it == chosen_options.end() || it->second != value || !product.has_option(group, value)) return 0;
  }
  return 1;
}

std::vector<const Product*> rank_results(std::span<const Product> catalog, std::string_view query,
                                         std::uint64_t seed) {
  auto q = tokenize(query);
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());
  if (q.empty()) return {};

  struct Scored {
    int score;
    std::uint64_t tie;
    const Product* product;
  };
  const std::uint64_t basis = splitmix64(seed);
  std::vector<Scored> scored;
  for (const auto& p : catalog) {
    std::vector<std::string_view> toks = tokenize(p.title);
    for (const auto& [group, values] : p.option_groups)
      for (const auto& v : values)
        for (auto t : tokenize(v)) toks.push_back(t);
    int score = 0;
    for (auto t : q)
      if (std::find(toks.begin(), toks.end(), t) != toks.end()) ++score;
    if (score > 0) scored.push_back({score, fnv1a64(p.pid, basis), &p});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.tie != b.tie) return a.tie < b.tie;
    return a.product->pid < b.product->pid;
  });
  std::vector<const Product*> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(s.product);
  return out;
}

// ---------------------------------------------------------------------------

MiniShopEnv::MiniShopEnv(MiniShopConfig config, std::vector<Product> catalog, std::vector<TaskSpec> tasks)
    : config_(std::move(config)), catalog_(std::move(catalog)), tasks_(std::move(tasks)) {
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    if (!product_index_.emplace(catalog_[i].pid, i).second)
      throw EnvError("duplicate product id " + catalog_[i].pid);
  }
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const auto& t = tasks_[i];
    if (!task_index_.emplace(t.task_id, i).second) throw EnvError("duplicate task id " + std::to_string(t.task_id));
    (t.split == Split::train ? train_ : test_).push_back({t.task_id, t.split});
  }
  signature_ = config_signature(config_);
}

const TaskSpec& MiniShopEnv::task(ContextId context) const {
  auto it = task_index_.find(context.id);
  if (it == task_index_.end() || tasks_[it->second].split != context.split)
    throw EnvError("unknown MiniShop context " + std::to_string(context.id) + "/" +
                   std::string(to_string(context.split)));
  return tasks_[it->second];
}

const Product& MiniShopEnv::product(std::string_view pid) const {
  auto it = product_index_.find(pid);
  if (it == product_index_.end()) throw EnvError("unknown product id " + std::string(pid));
  return catalog_[it->second];
}

const std::vector<std::string>& MiniShopEnv::current_results() const {
  const auto& t = tasks_[task_index_.at(state_.task)];
  return t.results.at(state_.query);
}

void MiniShopEnv::begin_episode(ContextId context) {
  const auto& t = task(context);
  state_ = State{};
  state_.task = t.task_id;
}

std::string MiniShopEnv::save_state() const {
  FieldWriter w;
  w.put(kStateTag)
      .put_uint(signature_)
      .put_uint(state_.task)
      .put_uint(static_cast<std::uint64_t>(state_.page))
      .put(state_.query)
      .put_uint(state_.page_index)
      .put(state_.pid)
      .put_uint(state_.selected.size());
  for (const auto& [g, v] : state_.selected) w.put(g).put(v);
  w.put_uint(state_.visited_product ? 1 : 0).put_int(state_.reward);
  return std::move(w).str();
}

void MiniShopEnv::load_state(std::string_view blob) {
  State s;
  try {
    FieldReader r(blob);
    if (r.next() != kStateTag) throw EnvError("not a MiniShop state");
    if (r.next_uint() != signature_) throw EnvError("snapshot was produced by a different MiniShop instance");
    s.task = static_cast<std::uint32_t>(r.next_uint());
    auto page = r.next_uint();
    if (page > static_cast<std::uint64_t>(Page::done)) throw EnvError("invalid page kind");
    s.page = static_cast<Page>(page);
    s.query = std::string(r.next());
    s.page_index = static_cast<std::uint32_t>(r.next_uint());
    s.pid = std::string(r.next());
    auto n = r.next_uint();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string g(r.next());
      s.selected[g] = std::string(r.next());
    }
    s.visited_product = r.next_uint() != 0;
    s.reward = static_cast<int>(r.next_int());
    r.expect_done();
  } catch (const CodecError& e) {
    throw EnvError(std::string("malformed MiniShop state: ") + e.what());
  }
  auto ti = task_index_.find(s.task);
  if (ti == task_index_.end()) throw EnvError("MiniShop state references unknown task");
  const auto& t = tasks_[ti->second];
  if (s.page == Page::results) {
    auto it = t.results.find(s.query);
    if (it == t.results.end()) throw EnvError("MiniShop state references unknown query");
    std::size_t pages = (it->second.size() + config_.page_size - 1) / config_.page_size;
    if (s.page_index >= std::max<std::size_t>(pages, 1)) throw EnvError("MiniShop state page index out of range");
  }
  if (s.page == Page::product || s.page == Page::done) product(s.pid);
  if (s.reward != 0 && s.reward != 1) throw EnvError("MiniShop state reward out of range");
  state_ = std::move(s);
}

EnvironmentBase::Frame MiniShopEnv::render() const {
  const auto& t = tasks_[task_index_.at(state_.task)];
  Frame f;
  std::string obs = "Instruction: " + t.instruction + "\n";
  switch (state_.page) {
    case Page::search:
      obs += "[Search]";
      f.candidates.push_back({"search[" + t.query_partial + "]"});
      f.candidates.push_back({"search[" + t.query_full + "]"});
      if (state_.visited_product) f.candidates.push_back({"search[" + t.query_refined + "]"});
      break;
    case Page::results: {
      const auto& res = current_results();
      const std::size_t ps = config_.page_size;
      const std::size_t pages = std::max<std::size_t>((res.size() + ps - 1) / ps, 1);
      obs += fmt::format("[Results] page {} of {} | query: {}", state_.page_index + 1, pages, state_.query);
      f.candidates.push_back({std::string(kClickBack)});
      if (state_.page_index + 1 < pages) f.candidates.push_back({std::string(kClickNext)});
      if (state_.page_index > 0) f.candidates.push_back({std::string(kClickPrev)});
      for (std::size_t i = state_.page_index * ps; i < std::min(res.size(), (state_.page_index + 1) * ps); ++i) {
        const auto& p = product(res[i]);
        obs += fmt::format("\n[{}] {} | {}", p.pid, p.title, format_price(p.price_cents));
        f.candidates.push_back({click(p.pid)});
      }
      break;
    }
    case Page::product: {
      const auto& p = product(state_.pid);
      obs += fmt::format("[Product] {} | {} | {}\noptions: ", p.pid, p.title, format_price(p.price_cents));
      std::vector<std::string> groups;
      for (const auto& [g, values] : p.option_groups) {
        std::string joined;
        for (const auto& v : values) joined += (joined.empty() ? "" : ", ") + v;
        groups.push_back(g + " = " + joined);
      }
      obs += fmt::format("{}", fmt::join(groups, " ; "));
      std::vector<std::string> sel;
      for (const auto& [g, v] : state_.selected) sel.push_back(g + " = " + v);
      obs += "\nselected: " + (sel.empty() ? std::string("none") : fmt::format("{}", fmt::join(sel, " ; ")));
      f.candidates.push_back({std::string(kClickBack)});
      for (const auto& [g, values] : p.option_groups)
        for (const auto& v : values) f.candidates.push_back({click(v)});
      f.candidates.push_back({std::string(kClickBuy)});
      break;
    }
    case Page::done:
      obs += fmt::format("[Done] purchased {} | reward {}", state_.pid, state_.reward);
      f.done = true;
      f.reward = state_.reward;
      break;
  }
  f.observation = std::move(obs);
  return f;
}

void MiniShopEnv::apply(const ActionToken& action) {
  const auto& text = action.text;
  switch (state_.page) {
    case Page::search:
      state_.query = bracket_arg(text, "search");
      state_.page = Page::results;
      state_.page_index = 0;
      return;
    case Page::results:
      if (text == kClickBack) {
        state_.page = Page::search;
        state_.query.clear();
        state_.page_index = 0;
      } else if (text == kClickNext) {
        ++state_.page_index;
      } else if (text == kClickPrev) {
        --state_.page_index;
      } else {
        state_.pid = bracket_arg(text, "click");
        state_.page = Page::product;
        state_.selected.clear();
        state_.visited_product = true;
      }
      return;
    case Page::product: {
      if (text == kClickBack) {
        state_.page = Page::search;
        state_.query.clear();
        state_.page_index = 0;
        state_.pid.clear();
        state_.selected.clear();
        return;
      }
      const auto& p = product(state_.pid);
      if (text == kClickBuy) {
        state_.reward = judge_purchase(p, state_.selected, tasks_[task_index_.at(state_.task)].constraints);
        state_.page = Page::done;
        return;
      }
      std::string value = bracket_arg(text, "click");
      for (const auto& [g, values] : p.option_groups)
        if (std::find(values.begin(), values.end(), value) != values.end()) state_.selected[g] = value;
      return;
    }
    case Page::done: break;
  }
  throw EnvError("MiniShop: no transition for '" + text + "'");
}

std::string MiniShopEnv::export_records() const {
  std::ostringstream out;
  out << nlohmann::json{{"schema", kExportSchema}, {"version", kExportVersion}}.dump() << '\n';
  for (const auto& p : catalog_) {
    nlohmann::json j;
    j["record"] = "product";
    j["pid"] = p.pid;
    j["brand"] = p.brand;
    j["category"] = p.category;
    j["color"] = p.color;
    j["price_cents"] = p.price_cents;
    j["options"] = p.option_groups;
    j["title"] = p.title;
    out << j.dump() << '\n';
  }
  for (const auto& t : tasks_) {
    nlohmann::json j;
    j["record"] = "task";
    j["task_id"] = t.task_id;
    j["split"] = to_string(t.split);
    j["instruction"] = t.instruction;
    j["category"] = t.constraints.category;
    j["color"] = t.constraints.color;
    j["max_price_cents"] = t.constraints.max_price_cents;
    j["required_options"] = t.constraints.required_options;
    j["target_pid"] = t.target_pid;
    j["difficulty"] = to_string(t.difficulty);
    j["results"] = t.results;
    out << j.dump() << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Generation

namespace {

std::vector<Product> generate_catalog(const MiniShopConfig& config) {
  Rng rng(derive_seed({config.seed, 0x63617461ULL}));
  std::vector<Product> catalog;
  catalog.reserve(config.n_products);
  for (std::size_t i = 0; i < config.n_products; ++i) {
    Product p;
    p.pid = fmt::format("P{:04}", i + 1);
    p.brand = std::string(kBrands[rng.below(kBrands.size())]);
    p.category = std::string(kCategories[rng.below(kCategories.size())]);
    p.color = std::string(kColors[rng.below(kColors.size())]);
    p.price_cents = 1000 + static_cast<std::int64_t>(rng.below(9000));
    std::vector<std::string> sizes(kSizes.begin(), kSizes.end());
    std::size_t keep = 2 + rng.below(3);
    while (sizes.size() > keep) sizes.erase(sizes.begin() + static_cast<std::ptrdiff_t>(rng.below(sizes.size())));
    p.option_groups["size"] = sizes;
    if (rng.bernoulli(0.4)) {
      std::vector<std::string> packs(kPacks.begin(), kPacks.end());
      std::size_t keep_packs = 1 + rng.below(2);
      while (packs.size() > keep_packs)
        packs.erase(packs.begin() + static_cast<std::ptrdiff_t>(rng.below(packs.size())));
      p.option_groups["pack"] = packs;
    }
    p.title = p.brand + " " + p.color + " " + p.category;
    catalog.push_back(std::move(p));
  }
  return catalog;
}

std::vector<Difficulty> difficulty_plan(const MiniShopConfig& config, Rng& rng) {
  const std::size_t n = config.n_tasks_train + config.n_tasks_test;
  const std::array<double, 3> fr = {config.difficulty_mix.easy, config.difficulty_mix.needs_next,
                                    config.difficulty_mix.needs_back};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    double exact = fr[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (rem[k] > rem[best] + 1e-12) best = k;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  std::vector<Difficulty> plan;
  for (std::size_t k = 0; k < 3; ++k) plan.insert(plan.end(), counts[k], static_cast<Difficulty>(k));
  rng.shuffle(plan.begin(), plan.end());
  return plan;
}

using PidList = std::vector<std::string>;
using PidSet = std::set<std::string>;

PidList without(const PidList& list, const PidSet& drop) {
  PidList out;
  for (const auto& p : list)
    if (!drop.contains(p)) out.push_back(p);
  return out;
}

void insert_clamped(PidList& list, std::size_t pos, const std::string& pid) {
  list.insert(list.begin() + static_cast<std::ptrdiff_t>(std::min(pos, list.size())), pid);
}

bool page_one_free_of(const PidList& list, std::size_t page_size, const PidSet& banned) {
  for (std::size_t i = 0; i < std::min(page_size, list.size()); ++i)
    if (banned.contains(list[i])) return false;
  return true;
}

std::optional<TaskSpec> build_task(const MiniShopConfig& config, const std::vector<Product>& catalog,
                                   std::uint32_t task_id, Split split, Difficulty difficulty, const Product& target,
                                   Rng& rng) {
  const std::size_t ps = config.page_size;
  const std::size_t limit = kResultPages * ps;

  TaskSpec t;
  t.task_id = task_id;
  t.split = split;
  t.difficulty = difficulty;
  t.target_pid = target.pid;
  t.constraints.category = target.category;
  t.constraints.color = target.color;
  const auto& sizes = target.option_groups.at("size");
  t.constraints.required_options["size"] = sizes[rng.below(sizes.size())];
  if (auto it = target.option_groups.find("pack"); it != target.option_groups.end() && rng.bernoulli(0.25))
    t.constraints.required_options["pack"] = it->second[rng.below(it->second.size())];
  const std::int64_t slack = static_cast<std::int64_t>(rng.below(1001));
  t.constraints.max_price_cents = ((target.price_cents + slack + 499) / 500) * 500;

  std::vector<std::string> req_phrases;
  std::vector<std::string> req_values;
  for (const auto& [g, v] : t.constraints.required_options) {
    req_phrases.push_back(g + " " + v);
    req_values.push_back(v);
  }
  t.instruction = fmt::format("i need a {} {} with {}, and price lower than {} dollars", target.color,
                              target.category, fmt::join(req_phrases, " and "),
                              format_price(t.constraints.max_price_cents).substr(1));
  t.query_partial = target.category;
  t.query_full = target.color + " " + target.category;
  t.query_refined = fmt::format("{} {}", t.query_full, fmt::join(req_values, " "));

  PidSet satisfying;
  PidSet plausible;
  for (const auto& p : catalog) {
    std::map<std::string, std::string> chosen = t.constraints.required_options;
    if (judge_purchase(p, chosen, t.constraints) == 1) {
      satisfying.insert(p.pid);
    } else if (p.category == t.constraints.category && p.color == t.constraints.color &&
               p.price_cents <= t.constraints.max_price_cents) {
      plausible.insert(p.pid);
    }
  }

  const std::uint64_t rank_seed = derive_seed({config.seed, 0x72616e6bULL, task_id});
  auto natural = [&](const std::string& q) {
    PidList out;
    for (const Product* p : rank_results(catalog, q, rank_seed)) out.push_back(p->pid);
    return out;
  };

  PidSet target_and_plausible = plausible;
  target_and_plausible.insert(target.pid);
  PidSet banned_p1 = satisfying;
  banned_p1.insert(plausible.begin(), plausible.end());

  switch (difficulty) {
    case Difficulty::easy: {
      t.results[t.query_partial] = natural(t.query_partial);
      for (const auto& q : {t.query_full, t.query_refined}) {
        PidList list = without(natural(q), target_and_plausible);
        insert_clamped(list, rng.below(ps), target.pid);
        for (const auto& p : plausible) list.push_back(p);
        if (!page_one_free_of(list, ps, plausible)) return std::nullopt;
        t.results[q] = list;
      }
      break;
    }
    case Difficulty::needs_next: {
      const std::size_t slot = rng.below(ps);
      for (const auto& q : {t.query_partial, t.query_full, t.query_refined}) {
        PidList rest = without(natural(q), banned_p1);
        if (rest.size() < ps) return std::nullopt;
        PidList list(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(ps));
        PidList tail(rest.begin() + static_cast<std::ptrdiff_t>(ps), rest.end());
        insert_clamped(tail, slot, target.pid);
        list.insert(list.end(), tail.begin(), tail.end());
        for (const auto& p : banned_p1)
          if (p != target.pid) list.push_back(p);
        t.results[q] = list;
      }
      break;
    }
    case Difficulty::needs_back: {
      if (plausible.empty()) return std::nullopt;
      std::string decoy;
      for (const auto& p : natural(t.query_full))
        if (plausible.contains(p)) {
          decoy = p;
          break;
        }
      if (decoy.empty()) return std::nullopt;
      for (const auto& q : {t.query_partial, t.query_full}) {
        PidList list = without(natural(q), satisfying);
        list.erase(std::remove(list.begin(), list.end(), decoy), list.end());
        list.insert(list.begin(), decoy);
        t.results[q] = list;
      }
      PidList list = without(natural(t.query_refined), target_and_plausible);
      insert_clamped(list, rng.below(ps), target.pid);
      for (const auto& p : plausible) list.push_back(p);
      if (!page_one_free_of(list, ps, plausible)) return std::nullopt;
      t.results[t.query_refined] = list;
      break;
    }
  }
  for (auto& [q, list] : t.results)
    if (list.size() > limit) list.resize(limit);
  return t;
}

// True once any product page has been opened, including the current one.
bool history_visited_product(const StateSnapshot& s) {
  for (const auto& h : s.history)
    if (h.action.rfind("click[P", 0) == 0 && h.observation.find("\n[Results] ") != std::string::npos) return true;
  return false;
}

// Generation-time oracle check: solvable, and faithful to its difficulty tag.
bool verify_task(const MiniShopConfig& config, const std::vector<Product>& catalog, const TaskSpec& spec) {
  MiniShopEnv probe(config, catalog, {spec});
  StepResult start = probe.reset({spec.task_id, spec.split});
  if (!reward_reachable(probe, start, kMiniShopHorizon)) return false;
  switch (spec.difficulty) {
    case Difficulty::easy: return true;
    case Difficulty::needs_next:
      return !reward_reachable(probe, start, kMiniShopHorizon,
                               [](const StateSnapshot&, const ActionToken& a) { return a.text == kClickNext; });
    case Difficulty::needs_back:
      return !reward_reachable(probe, start, kMiniShopHorizon, [](const StateSnapshot& s, const ActionToken& a) {
        return a.text == kClickBack && history_visited_product(s);
      });
  }
  return false;
}

}  // namespace

MiniShopEnv generate_minishop(const MiniShopConfig& config) {
  config.validate();
  if (config.difficulty_mix.needs_next > 0.0 && config.n_products < 2 * config.page_size)
    throw EnvError(fmt::format("infeasible difficulty mix: needs_next tasks require at least {} products "
                               "(two result pages of {}), catalog has {}",
                               2 * config.page_size, config.page_size, config.n_products));

  std::vector<Product> catalog = generate_catalog(config);
  Rng plan_rng(derive_seed({config.seed, 0x706c616eULL}));
  const std::vector<Difficulty> plan = difficulty_plan(config, plan_rng);

  std::vector<TaskSpec> tasks;
  tasks.reserve(plan.size());
  for (std::uint32_t i = 0; i < plan.size(); ++i) {
    const Split split = i < config.n_tasks_train ? Split::train : Split::test;
    Rng rng(derive_seed({config.seed, 0x7461736bULL, i}));
    std::vector<std::size_t> order(catalog.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    std::optional<TaskSpec> accepted;
    for (std::size_t idx : order) {
      auto spec = build_task(config, catalog, i, split, plan[i], catalog[idx], rng);
      if (spec && verify_task(config, catalog, *spec)) {
        accepted = std::move(spec);
        break;
      }
    }
    if (!accepted)
      throw EnvError(fmt::format("infeasible difficulty mix: no product in the {}-item catalog can realize a {} "
                                 "task (task {}); enlarge n_products or change the mix",
                                 catalog.size(), to_string(plan[i]), i));
    tasks.push_back(std::move(*accepted));
  }
  return MiniShopEnv(config, std::move(catalog), std::move(tasks));
}

// ---------------------------------------------------------------------------
// Observation parsing

bool is_shop_observation(std::string_view observation) { return observation.substr(0, 13) == "Instruction: "; }

ShopPage parse_shop_page(std::string_view observation) {
  auto lines = split(observation, "\n");
  if (lines.size() < 2) throw EnvError("malformed MiniShop observation");
  ShopPage page;
  page.instruction = std::string(strip_prefix(lines[0], "Instruction: "));
  std::string_view head = lines[1];
  if (head == "[Search]") {
    page.kind = ShopPage::Kind::search;
  } else if (head.substr(0, 10) == "[Results] ") {
    page.kind = ShopPage::Kind::results;
    auto parts = split(strip_prefix(head, "[Results] page "), " | query: ");
    if (parts.size() != 2) throw EnvError("malformed results header");
    auto of = split(parts[0], " of ");
    if (of.size() != 2) throw EnvError("malformed results header");
    page.page_index = std::stoul(of[0]) - 1;
    page.page_count = std::stoul(of[1]);
    page.query = parts[1];
    for (std::size_t i = 2; i < lines.size(); ++i) {
      std::string_view line = lines[i];
      auto close = line.find("] ");
      auto bar = line.rfind(" | ");
      if (line.empty() || line[0] != '[' || close == std::string_view::npos || bar == std::string_view::npos)
        throw EnvError("malformed result line '" + std::string(line) + "'");
      ListedProduct lp;
      lp.pid = std::string(line.substr(1, close - 1));
      lp.title = std::string(line.substr(close + 2, bar - close - 2));
      lp.price_cents = parse_price(line.substr(bar + 3));
      page.listed.push_back(std::move(lp));
    }
  } else if (head.substr(0, 10) == "[Product] ") {
    page.kind = ShopPage::Kind::product;
    auto parts = split(strip_prefix(head, "[Product] "), " | ");
    if (parts.size() != 3 || lines.size() != 4) throw EnvError("malformed product page");
    page.product = {parts[0], parts[1], parse_price(parts[2])};
    for (const auto& group : split(strip_prefix(lines[2], "options: "), " ; ")) {
      auto kv = split(group, " = ");
      if (kv.size() != 2) throw EnvError("malformed option group '" + group + "'");
      page.options[kv[0]] = split(kv[1], ", ");
    }
    std::string_view sel = strip_prefix(lines[3], "selected: ");
    if (sel != "none") {
      for (const auto& entry : split(sel, " ; ")) {
        auto kv = split(entry, " = ");
        if (kv.size() != 2) throw EnvError("malformed selection '" + entry + "'");
        page.selected[kv[0]] = kv[1];
      }
    }
  } else if (head.substr(0, 7) == "[Done] ") {
    page.kind = ShopPage::Kind::done;
  } else {
    throw EnvError("unknown MiniShop page header '" + std::string(head) + "'");
  }
  return page;
}

ShopAction parse_shop_action(std::string_view text, const ShopPage& page) {
  if (text.substr(0, 7) == "search[") return {ShopAction::Kind::search, bracket_arg(text, "search")};
  if (text == kClickNext) return {ShopAction::Kind::next, {}};
  if (text == kClickPrev) return {ShopAction::Kind::prev, {}};
  if (text == kClickBack) return {ShopAction::Kind::back, {}};
  if (text == kClickBuy) return {ShopAction::Kind::buy, {}};
  std::string arg = bracket_arg(text, "click");
  if (page.kind == ShopPage::Kind::results) return {ShopAction::Kind::product, arg};
  if (page.kind == ShopPage::Kind::product) return {ShopAction::Kind::option, arg};
  throw EnvError("click action '" + std::string(text) + "' on a page without clickable items");
}

VisibleMatch visible_match(const ListedProduct& listed, const TaskConstraints& constraints) {
  VisibleMatch m;
  m.category = contains_token(listed.title, constraints.category);
  m.color = contains_token(listed.title, constraints.color);
  m.price = listed.price_cents <= constraints.max_price_cents;
  return m;
}

}  // namespace eef::env
