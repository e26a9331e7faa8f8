#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmrigen/util/error.hpp"

namespace fmrigen::core {

enum class Label { ASD, HC };
enum class Cond { BIO, SCRAM, REST };

std::string label_name(Label l);
Label parse_label(const std::string& s);
std::string cond_name(Cond c);
Cond parse_cond(const std::string& s);

// One subject's 4D recording: T frames of a D x H x W volume, stored
// row-major with W fastest.
struct VolumeSequence {
    int t = 0, d = 0, h = 0, w = 0;
    std::vector<float> data;
    std::array<double, 3> voxel_size_mm{1.0, 1.0, 1.0};
    double frame_interval_s = 1.0;
    std::optional<Label> label;
    std::string subject_id;

    int64_t frame_voxels() const { return static_cast<int64_t>(d) * h * w; }
    int64_t total() const { return static_cast<int64_t>(t) * frame_voxels(); }

    float& at(int ti, int di, int hi, int wi) {
        return data[((static_cast<int64_t>(ti) * d + di) * h + hi) * w + wi];
    }
    float at(int ti, int di, int hi, int wi) const {
        return data[((static_cast<int64_t>(ti) * d + di) * h + hi) * w + wi];
    }

    void validate() const;
};

// Per-frame stimulus tags plus the hemodynamic shift to apply before any
// contrast analysis.
struct StimulusSchedule {
    std::vector<Cond> conditions;
    int lag_frames = 0;

    int t() const { return static_cast<int>(conditions.size()); }
    void validate() const;
};

// Frames whose (lag-shifted) stimulus is `c`; shifts past the end are
// dropped rather than wrapped.
std::vector<int> condition_frames(const StimulusSchedule& s, Cond c);

struct Parcellation {
    int d = 0, h = 0, w = 0;
    std::vector<int32_t> labels; // 0 = background
    std::map<int32_t, std::string> region_names;

    int64_t total() const { return static_cast<int64_t>(d) * h * w; }
    void validate() const;
};

struct DatasetSplit {
    std::vector<std::string> train_ids, val_ids, test_ids;
    uint64_t seed = 0;
};

struct PhantomRoi {
    std::array<int, 3> center{0, 0, 0}; // (d, h, w) voxel
    double radius = 1.0;                // voxels
    Cond active = Cond::BIO;
    double amplitude_asd = 0.0;
    double amplitude_hc = 0.0;

    double amplitude(Label l) const { return l == Label::ASD ? amplitude_asd : amplitude_hc; }
};

struct PhantomSpec {
    int t = 24, d = 16, h = 16, w = 16;
    int n_subjects_per_class = 4;
    std::vector<PhantomRoi> rois;
    double baseline = 0.0;
    double noise_sigma = 0.0;
    double spatial_smooth_fwhm = 0.0; // voxels
    uint64_t seed = 0;
    // Stimulus layout for every generated subject.
    int block_len_frames = 1;
    std::vector<Cond> block_order{Cond::BIO, Cond::SCRAM};
    int lag_frames = 0;
    double voxel_size_mm = 3.2;
    double frame_interval_s = 2.0;

    void validate() const;
};

struct PhantomData {
    std::vector<VolumeSequence> subjects; // all ASD first, then all HC
    StimulusSchedule schedule;
    Parcellation parcellation;
};

} // namespace fmrigen::core
