#pragma once

// Single include point for nlohmann/json so the vendored header path is not
// repeated across the codebase.

#include <json.hpp>
