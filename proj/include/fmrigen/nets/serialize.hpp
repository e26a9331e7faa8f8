#pragma once

#include <string>

#include "json.hpp"

#include "fmrigen/nets/arch.hpp"

namespace fmrigen::nets {

nlohmann::json arch_to_json(const ArchConfig& cfg);

// Throws FormatError on missing or ill-typed fields.
ArchConfig arch_from_json(const nlohmann::json& j);

} // namespace fmrigen::nets
