#include "fmrigen/train/optim.hpp"

#include <cmath>

#include "fmrigen/util/error.hpp"

namespace fmrigen::train {

void adam_step(ad::Tensor<float>& param, const ad::Tensor<float>& grad, AdamState& state,
               const AdamParams& hp, int64_t t) {
    if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v))
        throw ValidationError("adam_step: parameter, gradient, and state shapes disagree");
    if (t < 1) throw ValidationError("adam_step: t must be >= 1");
    const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    for (int64_t i = 0; i < param.size(); ++i) {
        const double g = grad.v[i];
        const double m = hp.beta1 * state.m.v[i] + (1.0 - hp.beta1) * g;
        const double v = hp.beta2 * state.v.v[i] + (1.0 - hp.beta2) * g * g;
        state.m.v[i] = static_cast<float>(m);
        state.v.v[i] = static_cast<float>(v);
        const double mh = static_cast<double>(state.m.v[i]) / c1;
        const double vh = static_cast<double>(state.v.v[i]) / c2;
        param.v[i] = static_cast<float>(param.v[i] - hp.lr * mh / (std::sqrt(vh) + hp.eps));
    }
}

AdamOptimizer::AdamOptimizer(nets::ParamStore<float>& store,
                             std::function<bool(const std::string&)> want, AdamParams hp)
    : hp_(hp) {
    for (size_t i = 0; i < store.count(); ++i) {
        if (!want(store.specs[i].name)) continue;
        indices_.push_back(i);
        states_.push_back({ad::Tensor<float>(store.specs[i].shape),
                           ad::Tensor<float>(store.specs[i].shape)});
    }
}

void AdamOptimizer::step(nets::ParamStore<float>& store) {
    ++t_;
    for (size_t s = 0; s < indices_.size(); ++s) {
        auto& var = store.vars[indices_[s]];
        adam_step(var->val, var->ensure_grad(), states_[s], hp_, t_);
        var->zero_grad();
    }
}

} // namespace fmrigen::train
