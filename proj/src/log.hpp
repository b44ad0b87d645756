#pragma once

#include <spdlog/spdlog.h>

namespace supwma {

/// Shared stderr logger. Level comes from SUPWMA_LOG (error|info|debug,
/// default info); unknown values fall back to info.
spdlog::logger& log();

}  // namespace supwma
