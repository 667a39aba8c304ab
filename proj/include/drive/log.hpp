#pragma once

#include <spdlog/spdlog.h>

namespace drive::log {

// Sets the level from DRIVE_LOG_LEVEL (trace, debug, info, warn, error, off);
// unset or unknown values leave the default of info.
void init_from_env();

using spdlog::debug;
using spdlog::error;
using spdlog::info;
using spdlog::warn;

}  // namespace drive::log
