#include "agentrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "agentrl/error.hpp"
#include "agentrl/text_io.hpp"

namespace agentrl {

namespace {

void normalize_indices(std::vector<std::uint32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

void check_table(const ParamVector& params, const FeatureVector& features, std::size_t table_size,
                 std::size_t slot_offset) {
  if (table_size == 0) throw ContractViolation("empty action table");
  if (slot_offset + table_size > params.max_action_slots()) {
    throw ConfigError("action table of size " + std::to_string(table_size) + " at offset " +
                      std::to_string(slot_offset) + " exceeds max_action_slots " +
                      std::to_string(params.max_action_slots()));
  }
  if (!features.indices.empty() && features.indices.back() >= params.feature_dim()) {
    throw ContractViolation("feature index outside feature_dim");
  }
}

// Softmax of scores / temperature with max subtraction. Log-probs, when asked
// for, are formed from the shifted scores so they stay exact for large scores.
std::vector<double> stable_softmax(const std::vector<double>& scores, double temperature,
                                   std::vector<double>* log_probs = nullptr) {
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    p[j] = std::exp((scores[j] - m) / temperature);
    z += p[j];
  }
  for (double& x : p) x /= z;
  if (log_probs) {
    const double log_z = std::log(z);
    log_probs->resize(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) (*log_probs)[j] = (scores[j] - m) / temperature - log_z;
  }
  return p;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Planner: return "planner";
    case Role::Reflector: return "reflector";
    case Role::Shared: return "shared";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  if (s == "planner") return Role::Planner;
  if (s == "reflector") return Role::Reflector;
  if (s == "shared") return Role::Shared;
  throw DataError("unknown role '" + std::string(s) + "'");
}

FeatureVector featurize_state(const StateText& state, const FeatureSpace& space) {
  const auto V = static_cast<std::uint32_t>(space.vocab_size);
  FeatureVector f;
  for (TokenId t : state.task_tokens) f.indices.push_back(t);
  for (TokenId t : state.reflection_tokens) f.indices.push_back(V + t);
  const auto& h = state.history_tokens;
  const std::size_t from = h.size() > space.window ? h.size() - space.window : 0;
  for (std::size_t k = from; k < h.size(); ++k) f.indices.push_back(2 * V + h[k]);
  if (space.shared) f.indices.push_back(static_cast<std::uint32_t>(space.role_flag()));
  normalize_indices(f.indices);
  return f;
}

std::size_t reward_bucket(double reward) {
  if (reward < 0.25) return 0;
  if (reward < 0.5) return 1;
  if (reward < 1.0) return 2;
  return 3;
}

FeatureVector featurize_trajectory(const Trajectory& traj, const Vocab& vocab,
                                   const FeatureSpace& space) {
  const auto V = static_cast<std::uint32_t>(space.vocab_size);
  FeatureVector f;
  if (!traj.steps.empty()) {
    for (TokenId t : traj.steps.front().state.task_tokens) f.indices.push_back(t);
    for (const auto& s : traj.steps) {
      f.indices.push_back(V + vocab.id(to_string(s.action.kind)));
      for (TokenId t : s.action.args) f.indices.push_back(V + t);
    }
    for (TokenId t : traj.steps.back().observation) f.indices.push_back(2 * V + t);
  }
  f.indices.push_back(static_cast<std::uint32_t>(space.reward_bucket(reward_bucket(traj.terminal_reward))));
  f.indices.push_back(static_cast<std::uint32_t>(
      traj.terminated_by == Termination::Submitted ? space.submitted_flag() : space.step_limit_flag()));
  if (space.shared) f.indices.push_back(static_cast<std::uint32_t>(space.role_flag()));
  normalize_indices(f.indices);
  return f;
}

ParamVector::ParamVector(Role role, std::size_t feature_dim, std::size_t max_action_slots,
                         std::uint64_t seed, std::vector<double> values)
    : role_(role), feature_dim_(feature_dim), slots_(max_action_slots), seed_(seed), values_(std::move(values)) {
  if (values_.size() != feature_dim_ * slots_) {
    throw ContractViolation("ParamVector values do not match feature_dim x max_action_slots");
  }
  if (!all_finite()) throw ContractViolation("ParamVector holds a non-finite value");
}

ParamVector ParamVector::zeros(Role role, std::size_t feature_dim, std::size_t max_action_slots,
                               std::uint64_t seed) {
  return ParamVector(role, feature_dim, max_action_slots, seed,
                     std::vector<double>(feature_dim * max_action_slots, 0.0));
}

ParamVector ParamVector::random(Role role, std::size_t feature_dim, std::size_t max_action_slots,
                                std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::vector<double> v(feature_dim * max_action_slots);
  for (double& x : v) x = scale * rng.normal();
  return ParamVector(role, feature_dim, max_action_slots, seed, std::move(v));
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> action_scores(const ParamVector& params, const FeatureVector& features,
                                  std::size_t table_size, std::size_t slot_offset) {
  check_table(params, features, table_size, slot_offset);
  std::vector<double> scores(table_size, 0.0);
  const std::size_t slots = params.max_action_slots();
  const double* v = params.values().data();
  for (std::uint32_t i : features.indices) {
    const double* row = v + static_cast<std::size_t>(i) * slots + slot_offset;
    for (std::size_t j = 0; j < table_size; ++j) scores[j] += row[j];
  }
  return scores;
}

ActionDistribution distribution(const ParamVector& params, const FeatureVector& features,
                                std::size_t table_size, double temperature, std::size_t slot_offset) {
  if (!(temperature >= 0.0)) throw ContractViolation("temperature must be >= 0");
  const auto scores = action_scores(params, features, table_size, slot_offset);
  ActionDistribution d;
  d.temperature = temperature;
  if (temperature == 0.0) {
    d.probs.assign(table_size, 0.0);
    d.probs[argmax(scores)] = 1.0;
  } else {
    d.probs = stable_softmax(scores, temperature);
  }
  return d;
}

std::pair<std::uint32_t, double> sample(const ParamVector& params, const FeatureVector& features,
                                        std::size_t table_size, double temperature, Rng& rng,
                                        std::size_t slot_offset) {
  if (!(temperature >= 0.0)) throw ContractViolation("temperature must be >= 0");
  const auto scores = action_scores(params, features, table_size, slot_offset);
  if (temperature == 0.0) return {static_cast<std::uint32_t>(argmax(scores)), 0.0};
  std::vector<double> log_probs;
  const auto probs = stable_softmax(scores, temperature, &log_probs);
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t pick = table_size - 1;
  for (std::size_t j = 0; j < table_size; ++j) {
    acc += probs[j];
    if (u < acc) {
      pick = j;
      break;
    }
  }
  // Guard against rounding pushing u past the cumulative sum onto a zero-probability tail.
  while (probs[pick] == 0.0 && pick > 0) --pick;
  return {static_cast<std::uint32_t>(pick), log_probs[pick]};
}

double logprob_of(const ParamVector& params, const FeatureVector& features, std::size_t table_size,
                  std::uint32_t index, std::size_t slot_offset) {
  if (index >= table_size) throw ContractViolation("index outside the action table");
  const auto scores = action_scores(params, features, table_size, slot_offset);
  std::vector<double> log_probs;
  stable_softmax(scores, 1.0, &log_probs);
  return log_probs[index];
}

SparseGrad grad_logprob(const ParamVector& params, const FeatureVector& features,
                        std::size_t table_size, std::uint32_t index, std::size_t slot_offset) {
  if (index >= table_size) throw ContractViolation("index outside the action table");
  const auto scores = action_scores(params, features, table_size, slot_offset);
  SparseGrad g;
  g.features = features.indices;
  g.slot_offset = slot_offset;
  g.coeffs = stable_softmax(scores, 1.0);
  for (double& c : g.coeffs) c = -c;
  g.coeffs[index] += 1.0;
  return g;
}

void SparseGrad::add_to(std::vector<double>& dense, std::size_t max_action_slots, double scale) const {
  for (std::uint32_t i : features) {
    double* row = dense.data() + static_cast<std::size_t>(i) * max_action_slots + slot_offset;
    for (std::size_t j = 0; j < coeffs.size(); ++j) row[j] += scale * coeffs[j];
  }
}

double SparseGrad::at(std::uint32_t feature, std::size_t slot) const {
  if (slot < slot_offset || slot >= slot_offset + coeffs.size()) return 0.0;
  if (!std::binary_search(features.begin(), features.end(), feature)) return 0.0;
  return coeffs[slot - slot_offset];
}

void write_checkpoint(std::ostream& out, const ParamVector& params) {
  out << "agentrl-checkpoint 1\n"
      << "role " << to_string(params.role()) << '\n'
      << "feature_dim " << params.feature_dim() << '\n'
      << "max_action_slots " << params.max_action_slots() << '\n'
      << "seed " << params.seed() << '\n'
      << "values " << params.values().size() << '\n';
  for (double v : params.values()) out << text::format_double(v) << '\n';
}

ParamVector read_checkpoint(std::istream& in) {
  auto expect = [&](std::string_view key) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("checkpoint truncated before '" + std::string(key) + "'");
    auto parts = text::split(line, ' ');
    if (parts.size() != 2 || parts[0] != key) {
      throw DataError("checkpoint: expected '" + std::string(key) + "', got '" + line + "'");
    }
    return std::string(parts[1]);
  };
  if (expect("agentrl-checkpoint") != "1") throw DataError("unsupported checkpoint version");
  const Role role = parse_role(expect("role"));
  const auto dim = text::parse_uint(expect("feature_dim"));
  const auto slots = text::parse_uint(expect("max_action_slots"));
  const auto seed = text::parse_uint(expect("seed"));
  const auto count = text::parse_uint(expect("values"));
  if (count != dim * slots) throw DataError("checkpoint value count does not match its shape");
  std::vector<double> values;
  values.reserve(count);
  std::string line;
  while (values.size() < count && std::getline(in, line)) values.push_back(text::parse_double(line));
  if (values.size() != count) throw DataError("checkpoint truncated");
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("checkpoint holds a non-finite value");
  }
  return ParamVector(role, dim, slots, seed, std::move(values));
}

void save_checkpoint(const std::string& path, const ParamVector& params) {
  std::ostringstream out;
  write_checkpoint(out, params);
  text::write_file(path, out.str());
}

ParamVector load_checkpoint(const std::string& path) {
  std::istringstream in(text::read_file(path));
  return read_checkpoint(in);
}

}  // namespace agentrl
