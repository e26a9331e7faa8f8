#pragma once

#include "fmrigen/core/types.hpp"

namespace fmrigen::core {

// Affine map into [-1, 1]: y = clamp((x - offset) / scale). Inverting
// recovers every voxel that was not clamped.
struct ScaleParams {
    double offset = 0.0;
    double scale = 1.0;
};

// Robust range from the 1st/99th percentile of all voxel values (linear
// interpolation between order statistics). A constant sequence maps to all
// zeros with unit scale.
ScaleParams normalize_sequence(VolumeSequence& seq);

void denormalize_sequence(VolumeSequence& seq, const ScaleParams& p);

// Percentile with linear interpolation at rank q*(n-1), q in [0, 1].
double percentile(std::vector<float> values, double q);

} // namespace fmrigen::core
