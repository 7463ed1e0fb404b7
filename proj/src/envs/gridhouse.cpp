// Household task: pick up the bowl and switch on the desk lamp while holding
// it. The task text names the lamp's location and a clue for the bowl's
// location that is right most of the time. Success is binary.

#include <array>

#include "agentrl/error.hpp"
#include "envs_internal.hpp"

namespace agentrl {

namespace {

constexpr double kClueAccuracy = 0.6;

enum Object : std::uint32_t { kBowl = 0, kMug = 1, kBook = 2, kLamp = 3, kObjects = 4 };
constexpr std::array<std::string_view, kObjects> kObjectNames = {"bowl", "mug", "book", "desklamp"};

class GridHouseEnv final : public Environment {
 public:
  explicit GridHouseEnv(EnvConfig config) : Environment(std::move(config)) {
    const std::uint32_t L = config_.location_count;
    task_ = vocab_.add("task:house");
    goal_ = vocab_.add("goal:examine-bowl");
    for (std::uint32_t l = 0; l < L; ++l) lamp_at_.push_back(vocab_.add("lamp-at:loc" + std::to_string(l)));
    for (std::uint32_t l = 0; l < L; ++l) clue_at_.push_back(vocab_.add("bowl-clue:loc" + std::to_string(l)));

    vocab_.add("Goto");
    vocab_.add("Take");
    vocab_.add("Use");
    for (std::uint32_t l = 0; l < L; ++l) loc_.push_back(vocab_.add("loc" + std::to_string(l)));
    for (auto name : kObjectNames) obj_.push_back(vocab_.add(name));
    const TokenId think_go = vocab_.add("think:go");
    const TokenId think_take = vocab_.add("think:take");
    const TokenId think_use = vocab_.add("think:use");

    arrive_ = vocab_.add("obs:arrive");
    for (auto name : kObjectNames) see_.push_back(vocab_.add("see:" + std::string(name)));
    see_nothing_ = vocab_.add("see:nothing");
    picked_ = vocab_.add("obs:picked");
    for (std::uint32_t o = 0; o < kLamp; ++o) holding_.push_back(vocab_.add("holding:" + std::string(kObjectNames[o])));
    nothing_ = vocab_.add("obs:nothing");
    lamp_on_ = vocab_.add("obs:lamp-on");

    for (std::uint32_t l = 0; l < L; ++l) table_.entries.push_back({ActionKind::Goto, {loc_[l]}, {think_go}});
    for (std::uint32_t o = 0; o < kLamp; ++o) table_.entries.push_back({ActionKind::Take, {obj_[o]}, {think_take}});
    table_.entries.push_back({ActionKind::Use, {obj_[kLamp]}, {think_use}});

    for (std::uint32_t l = 0; l < L; ++l) {
      hint_bowl_at_.push_back(vocab_.add("hint:bowl-at:loc" + std::to_string(l)));
      alphabet_.push_back(hint_bowl_at_.back());
    }
    hint_order_ = vocab_.add("hint:order-bowl-first");
    alphabet_.push_back(hint_order_);
    hint_bring_ = vocab_.add("hint:bring-bowl-to-lamp");
    alphabet_.push_back(hint_bring_);
    finalize();
  }

  std::vector<TaskInstance> generate_tasks(std::size_t count, Rng& rng,
                                           std::string_view id_prefix) const override {
    const auto L = config_.location_count;
    std::vector<TaskInstance> tasks;
    tasks.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      HouseSpec spec;
      spec.bowl_at = static_cast<std::uint32_t>(rng.below(L));
      do {
        spec.lamp_at = static_cast<std::uint32_t>(rng.below(L));
      } while (spec.lamp_at == spec.bowl_at);
      spec.mug_at = static_cast<std::uint32_t>(rng.below(L));
      spec.book_at = static_cast<std::uint32_t>(rng.below(L));
      if (rng.uniform() < kClueAccuracy) {
        spec.clue_at = spec.bowl_at;
      } else {
        do {
          spec.clue_at = static_cast<std::uint32_t>(rng.below(L));
        } while (spec.clue_at == spec.bowl_at);
      }
      TokenSeq tokens{task_, goal_, lamp_at_[spec.lamp_at], clue_at_[spec.clue_at]};
      tasks.emplace_back(internal::task_id(id_prefix, "gridhouse", i), std::move(tokens), spec);
    }
    return tasks;
  }

 protected:
  Transition transition(const TaskInstance& task, std::span<const std::uint32_t> prior,
                        std::uint32_t action) const override {
    const auto& spec = std::get<HouseSpec>(hidden(task));
    Sim sim = replay(spec, prior);
    return apply(spec, sim, action);
  }

  double score(const TaskInstance& task, std::span<const std::uint32_t> actions,
               bool submitted) const override {
    return passes(task, actions, submitted) ? 1.0 : 0.0;
  }

  bool passes(const TaskInstance& task, std::span<const std::uint32_t> actions,
              bool submitted) const override {
    const auto& spec = std::get<HouseSpec>(hidden(task));
    return submitted && replay(spec, actions).success;
  }

  std::uint32_t optimal_after(const TaskInstance& task,
                              std::span<const std::uint32_t> prior) const override {
    const auto& spec = std::get<HouseSpec>(hidden(task));
    const Sim sim = replay(spec, prior);
    if (!sim.held[kBowl]) {
      return sim.location == static_cast<int>(spec.bowl_at) ? take_slot(kBowl) : spec.bowl_at;
    }
    return sim.location == static_cast<int>(spec.lamp_at) ? use_slot() : spec.lamp_at;
  }

  // The expert trusts a location hint, else the clue, and searches the
  // remaining locations in order when the bowl is not where it expected.
  std::uint32_t expert_intent(const TaskInstance& task, const StateText& state,
                              std::span<const std::uint32_t> prior, Rng&) const override {
    const auto& spec = std::get<HouseSpec>(hidden(task));
    const Sim sim = replay(spec, prior);
    if (sim.held[kBowl]) return optimal_after(task, prior);
    if (sim.location == static_cast<int>(spec.bowl_at)) return take_slot(kBowl);
    std::uint32_t believed = spec.clue_at;
    for (TokenId t : state.reflection_tokens) {
      for (std::uint32_t l = 0; l < config_.location_count; ++l) {
        if (t == hint_bowl_at_[l]) believed = l;
      }
    }
    std::vector<bool> visited(config_.location_count, false);
    for (std::uint32_t a : prior) {
      if (a < config_.location_count) visited[a] = true;
    }
    if (!visited[believed]) return believed;
    for (std::uint32_t l = 0; l < config_.location_count; ++l) {
      if (!visited[l]) return l;
    }
    return spec.bowl_at;
  }

  TokenId hint_for(const TaskInstance& task, std::span<const std::uint32_t> actions) const override {
    const auto& spec = std::get<HouseSpec>(hidden(task));
    auto mistake = first_mistake(task, actions);
    if (!mistake) return hint_bowl_at_[spec.bowl_at];
    const Sim before = replay(spec, actions.first(*mistake));
    if (before.held[kBowl]) return hint_bring_;
    if (actions[*mistake] == use_slot()) return hint_order_;
    return hint_bowl_at_[spec.bowl_at];
  }

 private:
  struct Sim {
    int location = -1;
    std::array<bool, kLamp> held{};
    bool success = false;
  };

  std::uint32_t take_slot(std::uint32_t object) const { return config_.location_count + object; }
  std::uint32_t use_slot() const { return config_.location_count + kLamp; }

  static std::uint32_t position(const HouseSpec& spec, std::uint32_t object) {
    switch (object) {
      case kBowl: return spec.bowl_at;
      case kMug: return spec.mug_at;
      case kBook: return spec.book_at;
      default: return spec.lamp_at;
    }
  }

  Transition apply(const HouseSpec& spec, Sim& sim, std::uint32_t action) const {
    Transition t;
    const std::uint32_t L = config_.location_count;
    if (action < L) {
      sim.location = static_cast<int>(action);
      t.observation.push_back(arrive_);
      for (std::uint32_t o = 0; o < kObjects; ++o) {
        const bool held = o < kLamp && sim.held[o];
        if (!held && position(spec, o) == action) t.observation.push_back(see_[o]);
      }
      if (t.observation.size() == 1) t.observation.push_back(see_nothing_);
    } else if (action < L + kLamp) {
      const std::uint32_t o = action - L;
      if (!sim.held[o] && sim.location == static_cast<int>(position(spec, o))) {
        sim.held[o] = true;
        t.observation = {picked_, holding_[o]};
      } else {
        t.observation = {nothing_};
      }
    } else if (sim.location == static_cast<int>(spec.lamp_at)) {
      sim.success = sim.held[kBowl];
      t.observation = {lamp_on_};
      t.submitted = true;
    } else {
      t.observation = {nothing_};
    }
    return t;
  }

  Sim replay(const HouseSpec& spec, std::span<const std::uint32_t> actions) const {
    Sim sim;
    for (std::uint32_t a : actions) apply(spec, sim, a);
    return sim;
  }

  TokenId task_ = 0, goal_ = 0, arrive_ = 0, see_nothing_ = 0, picked_ = 0, nothing_ = 0,
          lamp_on_ = 0, hint_order_ = 0, hint_bring_ = 0;
  TokenSeq lamp_at_, clue_at_, loc_, obj_, see_, holding_, hint_bowl_at_;
};

}  // namespace

std::unique_ptr<Environment> internal::make_gridhouse(const EnvConfig& config) {
  return std::make_unique<GridHouseEnv>(config);
}

}  // namespace agentrl
