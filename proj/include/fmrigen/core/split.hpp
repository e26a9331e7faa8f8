#pragma once

#include <optional>

#include "fmrigen/core/types.hpp"

namespace fmrigen::core {

// Deterministic split: ids are sorted, shuffled by seed, then cut into
// train/val/test. Sizes come from largest-remainder rounding of the ratios
// (ties hand the extra subject to the later split), or from explicit sizes
// when given.
DatasetSplit split_dataset(const std::vector<std::string>& ids,
                           const std::array<double, 3>& ratios, uint64_t seed,
                           const std::optional<std::array<int, 3>>& explicit_sizes = std::nullopt);

// The size arithmetic alone, exposed for direct checking.
std::array<int, 3> split_sizes(int n, const std::array<double, 3>& ratios);

} // namespace fmrigen::core
