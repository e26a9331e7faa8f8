#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fmrigen/ad/tensor.hpp"
#include "fmrigen/nets/params.hpp"

namespace fmrigen::train {

namespace ad = fmrigen::ad;

struct AdamParams {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    ad::Tensor<float> m;
    ad::Tensor<float> v;
};

// Bias-corrected Adam update, elementwise in double. t counts updates and
// must already include the current one (first call passes t=1).
void adam_step(ad::Tensor<float>& param, const ad::Tensor<float>& grad, AdamState& state,
               const AdamParams& hp, int64_t t);

// Owns the Adam state for every parameter whose name the predicate accepts.
// step() applies one update from the accumulated gradients and clears them;
// parameters outside the group are never touched.
class AdamOptimizer {
public:
    AdamOptimizer(nets::ParamStore<float>& store, std::function<bool(const std::string&)> want,
                  AdamParams hp);

    void step(nets::ParamStore<float>& store);

    int64_t t() const { return t_; }
    const std::vector<size_t>& indices() const { return indices_; }
    AdamState& state(size_t slot) { return states_[slot]; }
    const AdamState& state(size_t slot) const { return states_[slot]; }
    void restore(int64_t t) { t_ = t; }
    const AdamParams& hyper() const { return hp_; }

private:
    std::vector<size_t> indices_;
    std::vector<AdamState> states_;
    AdamParams hp_;
    int64_t t_ = 0;
};

} // namespace fmrigen::train
