#pragma once

#include <string>
#include <vector>

#include "fmrigen/core/types.hpp"

namespace fmrigen::eval {

struct RegionContrast {
    int region_id = 0;
    std::string region_name;
    double mean_z_bio = 0;
    double mean_z_scram = 0;
    double t_statistic = 0;
    double p_value = 1;
    int n_bio_frames = 0;
    int n_scram_frames = 0;
};

struct ContrastReport {
    std::vector<RegionContrast> rows;
};

// Per-frame arithmetic mean over one region's voxels.
std::vector<double> roi_mean_series(const core::VolumeSequence& seq,
                                    const core::Parcellation& parc, int region_id);

// (x - mean) / population std; a constant series maps to all zeros.
std::vector<double> zscore_series(const std::vector<double>& series);

// Per subject: z-score the region series, average over BIO frames and over
// SCRAM frames (schedule lag already applied by condition_frames); report the
// across-subject mean of each. REST frames never enter the averages.
ContrastReport condition_mean_z(const std::vector<core::VolumeSequence>& dataset,
                                const core::StimulusSchedule& schedule,
                                const core::Parcellation& parc,
                                const std::vector<int>& region_ids);

struct TtestResult {
    double t = 0;
    double p = 1;
    double df = 0;
};

// Two-tailed two-sample t-test; pooled variance unless welch. Both groups
// need >= 2 samples. Zero variance in both groups: p=1 on equal means,
// p=0 otherwise.
TtestResult two_sample_ttest(const std::vector<double>& a, const std::vector<double>& b,
                             bool welch);

// BIO-vs-SCRAM test per region. Samples are z-scored frame values pooled
// across subjects by default; subject_level collapses each subject to its
// per-condition mean first. Means and frame counts are filled like
// condition_mean_z so one call yields complete report rows.
ContrastReport bio_scram_ttest(const std::vector<core::VolumeSequence>& dataset,
                               const core::StimulusSchedule& schedule,
                               const core::Parcellation& parc,
                               const std::vector<int>& region_ids, bool welch = false,
                               bool subject_level = false);

std::vector<int> all_region_ids(const core::Parcellation& parc);

void write_contrast_csv(const std::string& path, const ContrastReport& report);

// Regularized incomplete beta I_x(a,b), continued fraction accurate to ~1e-10.
double reg_inc_beta(double a, double b, double x);

} // namespace fmrigen::eval
