#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <string_view>

#include "agentrl/envs.hpp"

namespace agentrl::internal {

inline std::string task_id(std::string_view prefix, std::string_view env, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return std::string(prefix) + "-" + std::string(env) + "-" + buf;
}

std::unique_ptr<Environment> make_graphqa(const EnvConfig& config);
std::unique_ptr<Environment> make_gridhouse(const EnvConfig& config);
std::unique_ptr<Environment> make_setquery(const EnvConfig& config);

}  // namespace agentrl::internal
