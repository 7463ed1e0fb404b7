// Interactive query task: execute candidate queries against a hidden table and
// submit when the last result is the answer. The filter is sometimes only
// named as one of two candidates. Reward is IoU x Kendall against the gold
// result list; the evaluator demands an exact match.

#include <algorithm>

#include "agentrl/error.hpp"
#include "agentrl/metrics.hpp"
#include "envs_internal.hpp"

namespace agentrl {

namespace {

constexpr std::uint32_t kFilters = 6;
constexpr std::uint32_t kOrders = 2;
constexpr double kAmbiguousRate = 0.8;
constexpr std::uint32_t kSizeBuckets = 6;

class SetQueryEnv final : public Environment {
 public:
  explicit SetQueryEnv(EnvConfig config) : Environment(std::move(config)) {
    task_ = vocab_.add("task:sql");
    for (std::uint32_t f = 0; f < kFilters; ++f) filter_.push_back(vocab_.add("filter:f" + std::to_string(f)));
    for (std::uint32_t g = 0; g < kFilters / 2; ++g) group_.push_back(vocab_.add("fgroup:g" + std::to_string(g)));
    order_ = {vocab_.add("order:asc"), vocab_.add("order:desc")};

    vocab_.add("Execute");
    vocab_.add("Submit");
    for (std::uint32_t f = 0; f < kFilters; ++f) farg_.push_back(vocab_.add("f" + std::to_string(f)));
    oarg_ = {vocab_.add("asc"), vocab_.add("desc")};
    const TokenId think_query = vocab_.add("think:query");
    const TokenId think_submit = vocab_.add("think:submit");
    result_ = vocab_.add("obs:result");
    for (std::uint32_t b = 0; b < kSizeBuckets; ++b) size_.push_back(vocab_.add("rows:" + std::to_string(b)));
    submitted_ = vocab_.add("obs:submitted");
    for (std::uint32_t f = 0; f < kFilters; ++f) sent_filter_.push_back(vocab_.add("sent:f" + std::to_string(f)));
    sent_order_ = {vocab_.add("sent:asc"), vocab_.add("sent:desc")};

    for (std::uint32_t f = 0; f < kFilters; ++f) {
      for (std::uint32_t o = 0; o < kOrders; ++o) {
        table_.entries.push_back({ActionKind::Execute, {farg_[f], oarg_[o]}, {think_query}});
      }
    }
    table_.entries.push_back({ActionKind::Submit, {}, {think_submit}});

    for (std::uint32_t f = 0; f < kFilters; ++f) {
      hint_filter_.push_back(vocab_.add("hint:filter:f" + std::to_string(f)));
      alphabet_.push_back(hint_filter_.back());
    }
    hint_order_ = {vocab_.add("hint:order:asc"), vocab_.add("hint:order:desc")};
    alphabet_.push_back(hint_order_[0]);
    alphabet_.push_back(hint_order_[1]);
    hint_submit_ = vocab_.add("hint:submit-after-result");
    alphabet_.push_back(hint_submit_);
    finalize();
  }

  std::vector<TaskInstance> generate_tasks(std::size_t count, Rng& rng,
                                           std::string_view id_prefix) const override {
    std::vector<TaskInstance> tasks;
    tasks.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      QuerySpec spec = sample_spec(rng);
      TokenSeq tokens{task_,
                      spec.filter_ambiguous ? group_[spec.gold_filter / 2] : filter_[spec.gold_filter],
                      order_[spec.gold_order]};
      tasks.emplace_back(internal::task_id(id_prefix, "setquery", i), std::move(tokens), std::move(spec));
    }
    return tasks;
  }

  // Record list produced by query slot `q`.
  static std::vector<std::uint32_t> execute(const QuerySpec& spec, std::uint32_t q) {
    const std::uint32_t f = q / kOrders;
    const bool descending = q % kOrders == 1;
    std::vector<std::uint32_t> rows;
    for (std::uint32_t r = 0; r < spec.attrs.size(); ++r) {
      if (spec.attrs[r][f]) rows.push_back(r);
    }
    std::sort(rows.begin(), rows.end(), [&](std::uint32_t a, std::uint32_t b) {
      return descending ? spec.sort_key[a] > spec.sort_key[b] : spec.sort_key[a] < spec.sort_key[b];
    });
    return rows;
  }

 protected:
  Transition transition(const TaskInstance& task, std::span<const std::uint32_t> prior,
                        std::uint32_t action) const override {
    const auto& spec = std::get<QuerySpec>(hidden(task));
    Sim sim = replay(spec, prior);
    return apply(spec, sim, action);
  }

  double score(const TaskInstance& task, std::span<const std::uint32_t> actions,
               bool submitted) const override {
    const auto& spec = std::get<QuerySpec>(hidden(task));
    const Sim sim = replay(spec, actions);
    const auto gold = execute(spec, gold_slot(spec));
    std::vector<std::uint32_t> answer;
    if (submitted && sim.last_result) answer = *sim.last_result;
    return iou_kendall_reward<std::uint32_t>(answer, gold);
  }

  bool passes(const TaskInstance& task, std::span<const std::uint32_t> actions,
              bool submitted) const override {
    const auto& spec = std::get<QuerySpec>(hidden(task));
    const Sim sim = replay(spec, actions);
    return submitted && sim.last_result && *sim.last_result == execute(spec, gold_slot(spec));
  }

  std::uint32_t optimal_after(const TaskInstance& task,
                              std::span<const std::uint32_t> prior) const override {
    const auto& spec = std::get<QuerySpec>(hidden(task));
    const Sim sim = replay(spec, prior);
    if (sim.last_result && *sim.last_result == execute(spec, gold_slot(spec))) return submit_slot();
    return gold_slot(spec);
  }

  // With an ambiguous filter the expert follows a matching hint, or keeps the
  // candidate it already ran this trial, or guesses.
  std::uint32_t expert_intent(const TaskInstance& task, const StateText& state,
                              std::span<const std::uint32_t> prior, Rng& rng) const override {
    const auto& spec = std::get<QuerySpec>(hidden(task));
    if (!spec.filter_ambiguous) return optimal_after(task, prior);
    const Sim sim = replay(spec, prior);
    const std::uint32_t group = spec.gold_filter / 2;
    std::optional<std::uint32_t> believed;
    for (TokenId t : state.reflection_tokens) {
      for (std::uint32_t f : {2 * group, 2 * group + 1}) {
        if (t == hint_filter_[f]) believed = f;
      }
    }
    if (!believed && sim.last_query && *sim.last_query / kOrders / 2 == group &&
        *sim.last_query % kOrders == spec.gold_order) {
      believed = *sim.last_query / kOrders;
    }
    if (!believed) believed = 2 * group + static_cast<std::uint32_t>(rng.below(2));
    const std::uint32_t query = *believed * kOrders + spec.gold_order;
    return sim.last_query == query ? submit_slot() : query;
  }

  TokenId hint_for(const TaskInstance& task, std::span<const std::uint32_t> actions) const override {
    const auto& spec = std::get<QuerySpec>(hidden(task));
    // The task text cannot settle an ambiguous filter, so that is the hint.
    if (spec.filter_ambiguous) return hint_filter_[spec.gold_filter];
    auto mistake = first_mistake(task, actions);
    if (!mistake) return hint_filter_[spec.gold_filter];
    const std::uint32_t expected = optimal_after(task, actions.first(*mistake));
    if (expected == submit_slot()) return hint_submit_;
    const std::uint32_t taken = actions[*mistake];
    if (taken != submit_slot() && taken / kOrders == spec.gold_filter) return hint_order_[spec.gold_order];
    return hint_filter_[spec.gold_filter];
  }

 private:
  struct Sim {
    std::optional<std::vector<std::uint32_t>> last_result;
    std::optional<std::uint32_t> last_query;
  };

  static std::uint32_t gold_slot(const QuerySpec& spec) { return spec.gold_filter * kOrders + spec.gold_order; }
  static std::uint32_t submit_slot() { return kFilters * kOrders; }

  Transition apply(const QuerySpec& spec, Sim& sim, std::uint32_t action) const {
    Transition t;
    if (action == submit_slot()) {
      // The closing observation names the query whose result was submitted.
      t.observation = {submitted_};
      if (sim.last_query) {
        t.observation.push_back(sent_filter_[*sim.last_query / kOrders]);
        t.observation.push_back(sent_order_[*sim.last_query % kOrders]);
      }
      t.submitted = true;
      return t;
    }
    sim.last_result = execute(spec, action);
    sim.last_query = action;
    t.observation = {result_, size_[std::min<std::size_t>(sim.last_result->size(), kSizeBuckets - 1)]};
    return t;
  }

  Sim replay(const QuerySpec& spec, std::span<const std::uint32_t> actions) const {
    Sim sim;
    for (std::uint32_t a : actions) apply(spec, sim, a);
    return sim;
  }

  QuerySpec sample_spec(Rng& rng) const {
    const std::uint32_t n = config_.table_rows;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      QuerySpec spec;
      spec.attrs.assign(n, std::vector<bool>(kFilters));
      for (auto& row : spec.attrs) {
        for (std::uint32_t f = 0; f < kFilters; ++f) row[f] = rng.uniform() < 0.5;
      }
      spec.sort_key.resize(n);
      for (std::uint32_t r = 0; r < n; ++r) spec.sort_key[r] = r;
      shuffle_in_place(spec.sort_key, rng);
      spec.gold_filter = static_cast<std::uint32_t>(rng.below(kFilters));
      spec.gold_order = static_cast<std::uint32_t>(rng.below(kOrders));
      spec.filter_ambiguous = rng.uniform() < kAmbiguousRate;

      const auto gold = execute(spec, gold_slot(spec));
      const auto partner = execute(spec, (spec.gold_filter ^ 1u) * kOrders + spec.gold_order);
      auto sorted_gold = gold;
      auto sorted_partner = partner;
      std::sort(sorted_gold.begin(), sorted_gold.end());
      std::sort(sorted_partner.begin(), sorted_partner.end());
      if (gold.size() >= 2 && !partner.empty() && sorted_gold != sorted_partner) return spec;
    }
    throw ConfigError("setquery: could not generate a well-posed task for table_rows " +
                      std::to_string(n));
  }

  TokenId task_ = 0, result_ = 0, submitted_ = 0, hint_submit_ = 0;
  TokenSeq filter_, group_, order_, farg_, oarg_, size_, sent_filter_, sent_order_, hint_filter_,
      hint_order_;
};

}  // namespace

std::unique_ptr<Environment> internal::make_setquery(const EnvConfig& config) {
  return std::make_unique<SetQueryEnv>(config);
}

}  // namespace agentrl
