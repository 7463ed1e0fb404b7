#pragma once

// Linear softmax policies over a fixed slot table:
//   score[j] = sum over active features i of values[i * max_action_slots + j]
// The planner scores environment actions from state features, the reflector
// scores reflection-alphabet tokens from trajectory features. In shared mode
// one ParamVector holds both, with the reflector's slots placed after the
// planner's.

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

#include "agentrl/core_types.hpp"
#include "agentrl/rng.hpp"

namespace agentrl {

enum class Role : std::uint8_t { Planner, Reflector, Shared };

std::string_view to_string(Role role);
Role parse_role(std::string_view s);

// Index layout for a vocabulary of V tokens:
//   [0, V)      task tokens
//   [V, 2V)     reflection tokens (states) / action kind and argument tokens (trajectories)
//   [2V, 3V)    last-W history tokens (states) / final observation tokens (trajectories)
//   3V..3V+3    terminal reward bucket
//   3V+4, 3V+5  terminated by submit / by step limit
//   3V+6        role flag, active in shared mode
struct FeatureSpace {
  std::size_t vocab_size = 0;
  std::size_t window = 16;
  bool shared = false;

  std::size_t dim() const { return 3 * vocab_size + 7; }
  std::size_t reward_bucket(std::size_t b) const { return 3 * vocab_size + b; }
  std::size_t submitted_flag() const { return 3 * vocab_size + 4; }
  std::size_t step_limit_flag() const { return 3 * vocab_size + 5; }
  std::size_t role_flag() const { return 3 * vocab_size + 6; }
};

struct FeatureVector {
  std::vector<std::uint32_t> indices;  // sorted, distinct

  bool operator==(const FeatureVector&) const = default;
};

FeatureVector featurize_state(const StateText& state, const FeatureSpace& space);
FeatureVector featurize_trajectory(const Trajectory& traj, const Vocab& vocab,
                                   const FeatureSpace& space);

// Bucket of a terminal reward in [0, 1]: [0,.25) [.25,.5) [.5,1) {1}.
std::size_t reward_bucket(double reward);

class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(Role role, std::size_t feature_dim, std::size_t max_action_slots, std::uint64_t seed,
              std::vector<double> values);

  static ParamVector zeros(Role role, std::size_t feature_dim, std::size_t max_action_slots,
                           std::uint64_t seed = 0);
  // Independent N(0, scale^2) entries drawn from `seed`.
  static ParamVector random(Role role, std::size_t feature_dim, std::size_t max_action_slots,
                            std::uint64_t seed, double scale = 0.01);

  Role role() const { return role_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t max_action_slots() const { return slots_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double at(std::size_t feature, std::size_t slot) const { return values_[feature * slots_ + slot]; }

  bool all_finite() const;
  bool operator==(const ParamVector&) const = default;

 private:
  Role role_ = Role::Planner;
  std::size_t feature_dim_ = 0;
  std::size_t slots_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> values_;
};

struct ActionDistribution {
  std::vector<double> probs;
  double temperature = 1.0;
};

// `slot_offset` selects the column range [offset, offset + table_size); it is
// nonzero only for the reflector half of a shared ParamVector.
std::vector<double> action_scores(const ParamVector& params, const FeatureVector& features,
                                  std::size_t table_size, std::size_t slot_offset = 0);

ActionDistribution distribution(const ParamVector& params, const FeatureVector& features,
                                std::size_t table_size, double temperature,
                                std::size_t slot_offset = 0);

// Draws an index. Returns ln prob[index] under the tempered distribution;
// greedy decoding (temperature 0) returns logprob 0.
std::pair<std::uint32_t, double> sample(const ParamVector& params, const FeatureVector& features,
                                        std::size_t table_size, double temperature, Rng& rng,
                                        std::size_t slot_offset = 0);

// ln softmax(scores)[index] at temperature 1.
double logprob_of(const ParamVector& params, const FeatureVector& features, std::size_t table_size,
                  std::uint32_t index, std::size_t slot_offset = 0);

// Gradient of logprob_of: coeff[j] = 1{j = index} - prob[j] at every
// (i, slot_offset + j) with i active, zero elsewhere.
struct SparseGrad {
  std::vector<std::uint32_t> features;
  std::size_t slot_offset = 0;
  std::vector<double> coeffs;

  // dense += scale * this, for a dense vector laid out like ParamVector.
  void add_to(std::vector<double>& dense, std::size_t max_action_slots, double scale) const;
  double at(std::uint32_t feature, std::size_t slot) const;
};

SparseGrad grad_logprob(const ParamVector& params, const FeatureVector& features,
                        std::size_t table_size, std::uint32_t index, std::size_t slot_offset = 0);

// Text header plus one value per line, bit-exact round trip.
void write_checkpoint(std::ostream& out, const ParamVector& params);
ParamVector read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ParamVector& params);
ParamVector load_checkpoint(const std::string& path);

}  // namespace agentrl
