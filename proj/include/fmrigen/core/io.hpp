#pragma once

#include <string>

#include "fmrigen/core/types.hpp"

namespace fmrigen::core {

// All volume formats are a sidecar pair: <stem>.json metadata plus a raw
// little-endian payload (<stem>.f32 or <stem>.i32, W fastest).

void write_vseq(const VolumeSequence& seq, const std::string& stem);
VolumeSequence read_vseq(const std::string& stem);

void write_parcellation(const Parcellation& p, const std::string& stem);
Parcellation read_parcellation(const std::string& stem);

// Schedules are plain text: a "lag_frames: N" header line followed by one
// BIO|SCRAM|REST tag per frame.
void write_schedule(const StimulusSchedule& s, const std::string& path);
StimulusSchedule read_schedule(const std::string& path);

} // namespace fmrigen::core
