#pragma once

#include <array>
#include <string>
#include <vector>

#include "fmrigen/ad/tensor.hpp"
#include "fmrigen/core/types.hpp"

namespace fmrigen::eval {

namespace ad = fmrigen::ad;

// One row per sequence, raster order identical to the on-disk payload.
ad::Tensor<double> flatten_for_projection(const std::vector<core::VolumeSequence>& dataset);

struct PcaResult {
    ad::Tensor<double> y;          // [n, k] scores
    ad::Tensor<double> components; // [k, p] orthonormal rows
    std::vector<double> mean;      // length p
    std::vector<double> ratios;    // explained-variance ratios, non-increasing
    int k = 0;
};

// Mean-centered projection onto the top-k principal axes via the Gram
// (snapshot) eigenproblem. k saturates to min(n-1, p) with a warning. Sign
// convention: each component's largest-magnitude entry is positive.
PcaResult pca_reduce(const ad::Tensor<double>& x, int k);

struct TsneOptions {
    int out_dim = 3;
    double perplexity = 30.0;
    int iters = 1000;
    uint64_t seed = 0;
};

// Exact tSNE. Bandwidths are binary-searched to the target perplexity
// (entropy tolerance 1e-4), affinities symmetrized and clamped at 1e-12,
// then plain momentum gradient descent: early exaggeration 12 for the first
// 250 iterations, momentum 0.5 then 0.8, step size 200, recentering each
// iteration. Requires n > 3*perplexity.
ad::Tensor<double> tsne_embed(const ad::Tensor<double>& x, const TsneOptions& opt);

// Same, with caller-supplied initial coordinates [n, out_dim].
ad::Tensor<double> tsne_embed(const ad::Tensor<double>& x, const TsneOptions& opt,
                              const ad::Tensor<double>& init);

struct ProjectionItem {
    std::string subject_id;
    std::string source; // "real" | "synthetic"
    std::array<double, 3> coords{0, 0, 0};
};

struct ProjectionResult {
    std::vector<ProjectionItem> items;
    std::vector<double> pca_ratios;
    std::string metadata; // hyperparameters, recorded into the CSV header
};

// Pairs ids with embedding rows; ids starting "synth-" are tagged synthetic.
ProjectionResult make_projection(const std::vector<core::VolumeSequence>& dataset,
                                 const ad::Tensor<double>& coords,
                                 const std::vector<double>& ratios, const std::string& metadata);

void write_projection_csv(const std::string& path, const ProjectionResult& proj);

// Flat 2D scatter of two embedding axes, colored by source.
void write_projection_svg(const std::string& path, const ProjectionResult& proj, int axis_x = 0,
                          int axis_y = 1);

} // namespace fmrigen::eval
