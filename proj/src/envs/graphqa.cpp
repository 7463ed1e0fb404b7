// Two-hop question answering over a per-task relation graph. The question
// names a topic entity and a relation chain; the second relation is sometimes
// only given as one of two candidates, which no amount of reading the question
// resolves. The answer is scored with token F1 against the gold entity names.

#include <algorithm>
#include <array>

#include "agentrl/error.hpp"
#include "agentrl/metrics.hpp"
#include "envs_internal.hpp"

namespace agentrl {

namespace {

// Even: relations 2g and 2g+1 form one ambiguity group.
constexpr std::uint32_t kRelations = 10;
constexpr std::uint32_t kFanOut = 2;
constexpr double kAmbiguousRate = 0.5;

constexpr std::array<std::string_view, 24> kNames = {
    "Ouse",   "Foss",  "York",    "Derwent", "Humber", "Aire",   "Wharfe", "Nidd",
    "Swale",  "Ure",   "Calder",  "Don",     "Trent",  "Severn", "Avon",   "Wye",
    "Tamar",  "Exe",   "Medway",  "Tyne",    "Wear",   "Tees",   "Eden",   "Lune"};

std::string entity_name(std::uint32_t e) {
  if (e < kNames.size()) return std::string(kNames[e]);
  return "Place" + std::to_string(e);
}

class GraphQaEnv final : public Environment {
 public:
  explicit GraphQaEnv(EnvConfig config) : Environment(std::move(config)) {
    task_ = vocab_.add("task:qa");
    for (std::uint32_t e = 0; e < config_.entity_count; ++e) entity_.push_back(vocab_.add(entity_name(e)));
    for (std::uint32_t r = 0; r < kRelations; ++r) {
      q1_.push_back(vocab_.add("q1:r" + std::to_string(r)));
      q2_.push_back(vocab_.add("q2:r" + std::to_string(r)));
    }
    for (std::uint32_t g = 0; g < kRelations / 2; ++g) q2_amb_.push_back(vocab_.add("q2:amb" + std::to_string(g)));

    vocab_.add("Lookup");
    vocab_.add("Finish");
    const TokenId topic = vocab_.add("topic");
    const TokenId bridge = vocab_.add("bridge");
    for (std::uint32_t r = 0; r < kRelations; ++r) rel_.push_back(vocab_.add("r" + std::to_string(r)));
    const TokenId think_topic = vocab_.add("think:search-topic");
    const TokenId think_bridge = vocab_.add("think:follow-bridge");
    const TokenId think_answer = vocab_.add("think:answer");
    for (int d = 1; d <= 3; ++d) hop_obs_.push_back(vocab_.add("obs:hop" + std::to_string(d)));
    nothing_ = vocab_.add("obs:nothing");
    answered_ = vocab_.add("obs:answered");
    for (std::uint32_t r = 0; r < kRelations; ++r) via_.push_back(vocab_.add("via:r" + std::to_string(r)));

    for (std::uint32_t r = 0; r < kRelations; ++r) {
      table_.entries.push_back({ActionKind::Lookup, {topic, rel_[r]}, {think_topic}});
    }
    for (std::uint32_t r = 0; r < kRelations; ++r) {
      table_.entries.push_back({ActionKind::Lookup, {bridge, rel_[r]}, {think_bridge}});
    }
    table_.entries.push_back({ActionKind::Finish, {}, {think_answer}});

    for (std::uint32_t r = 0; r < kRelations; ++r) {
      hint_first_.push_back(vocab_.add("hint:first:r" + std::to_string(r)));
      alphabet_.push_back(hint_first_.back());
    }
    for (std::uint32_t r = 0; r < kRelations; ++r) {
      hint_then_.push_back(vocab_.add("hint:then:r" + std::to_string(r)));
      alphabet_.push_back(hint_then_.back());
    }
    hint_finish_ = vocab_.add("hint:finish-after-second");
    alphabet_.push_back(hint_finish_);
    finalize();
  }

  std::vector<TaskInstance> generate_tasks(std::size_t count, Rng& rng,
                                           std::string_view id_prefix) const override {
    std::vector<TaskInstance> tasks;
    tasks.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      GraphSpec spec = sample_spec(rng);
      TokenSeq tokens{task_, entity_[spec.topic], q1_[spec.first_relation],
                      spec.second_ambiguous ? q2_amb_[spec.second_relation / 2]
                                            : q2_[spec.second_relation]};
      tasks.emplace_back(internal::task_id(id_prefix, "graphqa", i), std::move(tokens), std::move(spec));
    }
    return tasks;
  }

 protected:
  Transition transition(const TaskInstance& task, std::span<const std::uint32_t> prior,
                        std::uint32_t action) const override {
    const auto& spec = std::get<GraphSpec>(hidden(task));
    Sim sim = replay(spec, prior);
    return apply(spec, sim, action);
  }

  double score(const TaskInstance& task, std::span<const std::uint32_t> actions,
               bool submitted) const override {
    const auto& spec = std::get<GraphSpec>(hidden(task));
    const Sim sim = replay(spec, actions);
    const std::vector<std::uint32_t> empty;
    const auto& answer = submitted && sim.answer ? *sim.answer : empty;
    return f1(normalize_answer(render(answer)), normalize_answer(render(spec.gold)));
  }

  bool passes(const TaskInstance& task, std::span<const std::uint32_t> actions,
              bool submitted) const override {
    const auto& spec = std::get<GraphSpec>(hidden(task));
    const Sim sim = replay(spec, actions);
    if (!submitted || !sim.answer) return false;
    return exact_match(normalize_answer(render(*sim.answer)), normalize_answer(render(spec.gold))) == 1;
  }

  std::uint32_t optimal_after(const TaskInstance& task,
                              std::span<const std::uint32_t> prior) const override {
    const auto& spec = std::get<GraphSpec>(hidden(task));
    return plan(spec.first_relation, spec.second_relation, replay(spec, prior));
  }

  // With an ambiguous second relation the expert follows a matching hint, or
  // sticks with the candidate it already tried this trial, or guesses.
  std::uint32_t expert_intent(const TaskInstance& task, const StateText& state,
                              std::span<const std::uint32_t> prior, Rng& rng) const override {
    const auto& spec = std::get<GraphSpec>(hidden(task));
    const Sim sim = replay(spec, prior);
    if (!spec.second_ambiguous) return plan(spec.first_relation, spec.second_relation, sim);
    const std::uint32_t group = spec.second_relation / 2;
    std::optional<std::uint32_t> believed;
    for (TokenId t : state.reflection_tokens) {
      for (std::uint32_t r : {2 * group, 2 * group + 1}) {
        if (t == hint_then_[r]) believed = r;
      }
    }
    if (!believed && sim.chain.size() == 2 && sim.chain[1] / 2 == group) believed = sim.chain[1];
    if (!believed && sim.chain.size() == 1 && sim.chain[0] == spec.first_relation) {
      believed = 2 * group + static_cast<std::uint32_t>(rng.below(2));
    }
    return plan(spec.first_relation, believed.value_or(spec.second_relation), sim);
  }

  TokenId hint_for(const TaskInstance& task, std::span<const std::uint32_t> actions) const override {
    const auto& spec = std::get<GraphSpec>(hidden(task));
    // The question text cannot settle an ambiguous relation, so that is the hint.
    if (spec.second_ambiguous) return hint_then_[spec.second_relation];
    auto mistake = first_mistake(task, actions);
    if (!mistake) return hint_then_[spec.second_relation];
    const std::uint32_t expected = optimal_after(task, actions.first(*mistake));
    if (expected == finish_slot()) return hint_finish_;
    if (expected >= kRelations) return hint_then_[spec.second_relation];
    return hint_first_[spec.first_relation];
  }

 private:
  struct Sim {
    bool has_bridge = false;
    std::vector<std::uint32_t> bridge;
    std::vector<std::uint32_t> chain;
    std::optional<std::vector<std::uint32_t>> answer;
  };

  static std::uint32_t topic_slot(std::uint32_t r) { return r; }
  static std::uint32_t bridge_slot(std::uint32_t r) { return kRelations + r; }
  static std::uint32_t finish_slot() { return 2 * kRelations; }

  // Oracle step for the relation chain (r1, r2).
  static std::uint32_t plan(std::uint32_t r1, std::uint32_t r2, const Sim& sim) {
    if (sim.has_bridge && sim.chain.size() == 1 && sim.chain[0] == r1) return bridge_slot(r2);
    if (sim.has_bridge && sim.chain.size() == 2 && sim.chain[0] == r1 && sim.chain[1] == r2) {
      return finish_slot();
    }
    return topic_slot(r1);
  }

  static std::vector<std::uint32_t> follow(const GraphSpec& spec, std::span<const std::uint32_t> from,
                                           std::uint32_t relation) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t e : from) {
      const auto& t = spec.targets[e][relation];
      out.insert(out.end(), t.begin(), t.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  Transition apply(const GraphSpec& spec, Sim& sim, std::uint32_t action) const {
    Transition t;
    if (action == finish_slot()) {
      sim.answer = sim.has_bridge ? sim.bridge : std::vector<std::uint32_t>{spec.topic};
      // The closing observation restates the relations followed from the bridge.
      t.observation = {answered_};
      for (std::size_t i = 1; i < sim.chain.size(); ++i) t.observation.push_back(via_[sim.chain[i]]);
      t.submitted = true;
      return t;
    }
    const std::uint32_t relation = action % kRelations;
    if (action < kRelations) {
      const std::uint32_t topic[] = {spec.topic};
      sim.bridge = follow(spec, topic, relation);
      sim.chain = {relation};
      sim.has_bridge = true;
    } else if (!sim.has_bridge) {
      t.observation = {nothing_};
      return t;
    } else {
      sim.bridge = follow(spec, sim.bridge, relation);
      sim.chain.push_back(relation);
    }
    t.observation.push_back(hop_obs_[std::min<std::size_t>(sim.chain.size(), 3) - 1]);
    return t;
  }

  Sim replay(const GraphSpec& spec, std::span<const std::uint32_t> actions) const {
    Sim sim;
    for (std::uint32_t a : actions) apply(spec, sim, a);
    return sim;
  }

  std::string render(std::span<const std::uint32_t> entities) const {
    std::string out;
    for (std::uint32_t e : entities) {
      if (!out.empty()) out += ' ';
      out += vocab_.lookup(entity_[e]);
    }
    return out;
  }

  GraphSpec sample_spec(Rng& rng) const {
    const std::uint32_t n = config_.entity_count;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      GraphSpec spec;
      spec.targets.assign(n, std::vector<std::vector<std::uint32_t>>(kRelations));
      for (std::uint32_t e = 0; e < n; ++e) {
        for (std::uint32_t r = 0; r < kRelations; ++r) {
          auto& t = spec.targets[e][r];
          while (t.size() < kFanOut) {
            auto c = static_cast<std::uint32_t>(rng.below(n));
            if (c != e && std::find(t.begin(), t.end(), c) == t.end()) t.push_back(c);
          }
          std::sort(t.begin(), t.end());
        }
      }
      spec.topic = static_cast<std::uint32_t>(rng.below(n));
      spec.first_relation = static_cast<std::uint32_t>(rng.below(kRelations));
      do {
        spec.second_relation = static_cast<std::uint32_t>(rng.below(kRelations));
      } while (spec.second_relation == spec.first_relation);
      spec.second_ambiguous = rng.uniform() < kAmbiguousRate;

      const std::uint32_t topic[] = {spec.topic};
      const auto hop1 = follow(spec, topic, spec.first_relation);
      spec.gold = follow(spec, hop1, spec.second_relation);
      const auto partner = follow(spec, hop1, spec.second_relation ^ 1u);
      if (spec.gold != hop1 && spec.gold != partner) return spec;
    }
    throw ConfigError("graphqa: could not generate a well-posed task for entity_count " +
                      std::to_string(n));
  }

  TokenId task_ = 0, nothing_ = 0, answered_ = 0, hint_finish_ = 0;
  TokenSeq entity_, q1_, q2_, q2_amb_, rel_, hop_obs_, via_, hint_first_, hint_then_;
};

}  // namespace

std::unique_ptr<Environment> internal::make_graphqa(const EnvConfig& config) {
  return std::make_unique<GraphQaEnv>(config);
}

}  // namespace agentrl
