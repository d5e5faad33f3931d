#pragma once

// Thin wrapper over spdlog. Verbosity comes from RINGBALANCE_LOG
// (error, info or debug; default error).

#include <spdlog/spdlog.h>

#include <string>
#include <string_view>

#include "ringbalance/core.hpp"

namespace ringbalance::log {

// Reads RINGBALANCE_LOG once; safe to call repeatedly.
void init_from_env();

template <typename... Args>
void info(std::string_view fmt, Args&&... args) {
  init_from_env();
  spdlog::info(fmt::runtime(fmt), std::forward<Args>(args)...);
}

template <typename... Args>
void debug(std::string_view fmt, Args&&... args) {
  init_from_env();
  spdlog::debug(fmt::runtime(fmt), std::forward<Args>(args)...);
}

template <typename... Args>
void error(std::string_view fmt, Args&&... args) {
  init_from_env();
  spdlog::error(fmt::runtime(fmt), std::forward<Args>(args)...);
}

}  // namespace ringbalance::log

namespace ringbalance {
std::string fmt_weights(const Weights& w);
}
