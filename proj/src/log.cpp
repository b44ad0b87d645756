#include "log.hpp"

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace supwma {

spdlog::logger& log() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("supwma");
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::level::level_enum level = spdlog::level::info;
    if (const char* env = std::getenv("SUPWMA_LOG")) {
      // from_str maps unknown names to off; keep the default for those.
      const std::string v(env);
      const auto parsed = spdlog::level::from_str(v);
      if (parsed != spdlog::level::off || v == "off") level = parsed;
    }
    l->set_level(level);
    return l;
  }();
  return *logger;
}

}  // namespace supwma
