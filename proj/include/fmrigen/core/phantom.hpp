#pragma once

#include "fmrigen/core/types.hpp"

namespace fmrigen::core {

// Tags tile the (block_len, order) pattern truncated to T frames.
StimulusSchedule build_block_schedule(int t, int block_len_frames, const std::vector<Cond>& order,
                                      int lag_frames);

// Ground-truth surrogate dataset: baseline + spatially smoothed Gaussian
// noise, with ROI spheres adding class- and condition-dependent amplitude.
// Deterministic given spec.seed; the parcellation labels exactly the ROIs.
PhantomData make_phantom(const PhantomSpec& spec);

// In-place separable blur: three box passes per axis approximating a
// Gaussian of the given FWHM (voxels). No-op when the equivalent box radius
// rounds to zero.
void smooth_volume(std::vector<float>& vol, int d, int h, int w, double fwhm);

} // namespace fmrigen::core
