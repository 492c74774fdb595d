#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace ordreg {

/// Shared stderr logger. The level comes from ORDREG_LOG
/// (trace, debug, info, warn, error, off); default warn.
std::shared_ptr<spdlog::logger> logger();

}  // namespace ordreg
