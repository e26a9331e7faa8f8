#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fmrigen/core/types.hpp"
#include "fmrigen/nets/params.hpp"

namespace fmrigen::eval {

struct ClfConfig {
    int pool = 4;          // spatial mean-pool factor before the conv stack
    int conv_kernel = 3;
    int conv_stride = 2;
    std::vector<int> conv_channels{4, 8};
    int mlp_width = 32;
    int epochs = 30;
    double lr = 1e-3;

    void validate() const;
};

struct Classifier {
    ClfConfig cfg;
    int t = 0, d = 0, h = 0, w = 0; // input dims the parameters were built for
    nets::ParamStore<float> params;

    // P(label == ASD) for one sequence.
    double predict(const core::VolumeSequence& seq) const;
};

// Mean-pool -> per-frame 3D convs -> temporal mean -> MLP -> sigmoid,
// trained with Adam on binary cross-entropy; returns the parameter snapshot
// with the lowest validation loss.
Classifier train_classifier(const std::vector<core::VolumeSequence>& train,
                            const std::vector<core::VolumeSequence>& val, const ClfConfig& cfg,
                            uint64_t seed);

struct ClassifierReport {
    std::string tag;
    double ce_loss = 0;
    double accuracy = 0;
    double f1 = 0;
    std::optional<double> auc; // absent when labels are single-class
    int n = 0;
};

// CE with clamped logs, accuracy at the threshold, F1 with ASD positive,
// AUC as the tie-aware pairwise statistic.
ClassifierReport classification_metrics(const std::vector<core::Label>& labels,
                                        const std::vector<double>& scores,
                                        double threshold = 0.5);

// Originals first, then `copies` noisy passes over the whole set; labels kept.
std::vector<core::VolumeSequence> augment_gaussian(
    const std::vector<core::VolumeSequence>& dataset, double sigma, int copies, uint64_t seed);

// Generator callback: n sequences per class, deterministic in the seed.
using SynthFn = std::function<std::vector<core::VolumeSequence>(int n_per_class, uint64_t seed)>;

// One classifier per augmentation arm — "none", "gaussian" (sigma 0.1), then
// one arm per named generator — each trained to target_size examples with a
// shared seed and scored once on the untouched test set. Arms with a null
// generator are skipped with a warning.
std::vector<ClassifierReport> augmentation_experiment(
    const std::vector<core::VolumeSequence>& train, const std::vector<core::VolumeSequence>& val,
    const std::vector<core::VolumeSequence>& test,
    const std::vector<std::pair<std::string, SynthFn>>& generators, int target_size,
    const ClfConfig& cfg, uint64_t seed);

void write_classifier_csv(const std::string& path, const std::vector<ClassifierReport>& reports);

} // namespace fmrigen::eval
