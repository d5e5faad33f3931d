#include "ringbalance/log.hpp"

#include <cstdlib>
#include <mutex>

namespace ringbalance {

namespace log {

void init_from_env() {
  static std::once_flag once;
  std::call_once(once, [] {
    spdlog::level::level_enum level = spdlog::level::err;
    if (const char* env = std::getenv("RINGBALANCE_LOG")) {
      const std::string v(env);
      if (v == "info") level = spdlog::level::info;
      else if (v == "debug") level = spdlog::level::debug;
    }
    spdlog::set_level(level);
  });
}

}  // namespace log

std::string fmt_weights(const Weights& w) {
  std::string out = "[";
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(w[i]);
  }
  return out + "]";
}

}  // namespace ringbalance
