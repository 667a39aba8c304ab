#include "drive/log.hpp"

#include <cstdlib>

namespace drive::log {

void init_from_env() {
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  const char* level = std::getenv("DRIVE_LOG_LEVEL");
  if (!level) return;
  const auto parsed = spdlog::level::from_str(level);
  // from_str maps unknown names to off; only accept it when asked for.
  if (parsed != spdlog::level::off || std::string(level) == "off") spdlog::set_level(parsed);
}

}  // namespace drive::log
