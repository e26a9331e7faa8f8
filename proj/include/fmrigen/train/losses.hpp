#pragma once

#include "fmrigen/ad/ops.hpp"

namespace fmrigen::train {

namespace ad = fmrigen::ad;

inline constexpr double kProbClampEps = 1e-7;

// -log p and -log(1-p) with p clamped to [eps, 1-eps] first, so every loss
// stays finite for probabilities anywhere in [0,1]. The clamp passes its
// gradient through: combined with the sigmoid that produced p this yields the
// bounded logit-space BCE gradient, where a hard clamp would instead zero the
// signal exactly when a discriminator becomes confident.
template <class S>
ad::Var<S> neg_log(const ad::Var<S>& p) {
    return ad::scale(ad::log_op(ad::clamp_passthrough(p, kProbClampEps, 1.0 - kProbClampEps)),
                     -1.0);
}

template <class S>
ad::Var<S> neg_log1m(const ad::Var<S>& p) {
    return neg_log(ad::affine(p, -1.0, 1.0));
}

template <class S>
struct GanLosses {
    ad::Var<S> eg;
    ad::Var<S> d;
    ad::Var<S> c;
};

// The three adversarial objectives over [1,1] probability nodes:
//   eg: lambda*mae - log D(recon) - log D(fake) - log(1 - C(z_real))
//   d : -log D(real) - log(1 - D(recon)) - log(1 - D(fake))
//   c : -log C(z_real) - log(1 - C(z_rand))
template <class S>
GanLosses<S> alpha_gan_losses(const ad::Var<S>& d_real, const ad::Var<S>& d_recon,
                              const ad::Var<S>& d_fake, const ad::Var<S>& c_real,
                              const ad::Var<S>& c_rand, const ad::Var<S>& mae, double lambda) {
    using namespace ad;
    GanLosses<S> out;
    out.eg = add(scale(mae, lambda),
                 add(add(neg_log(d_recon), neg_log(d_fake)), neg_log1m(c_real)));
    out.d = add(add(neg_log(d_real), neg_log1m(d_recon)), neg_log1m(d_fake));
    out.c = add(neg_log(c_real), neg_log1m(c_rand));
    return out;
}

template <class S>
ad::Var<S> mean_abs_error(const ad::Var<S>& x, const ad::Var<S>& y) {
    return ad::reshape(ad::mean_all(ad::abs_op(ad::sub(x, y))), {1, 1});
}

template <class S>
ad::Var<S> mean_sq_error(const ad::Var<S>& x, const ad::Var<S>& y) {
    ad::Var<S> diff = ad::sub(x, y);
    return ad::reshape(ad::mean_all(ad::mul(diff, diff)), {1, 1});
}

} // namespace fmrigen::train
