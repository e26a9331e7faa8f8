#include "fmrigen/nets/forward.hpp"

namespace fmrigen::nets {

ad::Tensor<float> seq_to_tensor(const core::VolumeSequence& seq) {
    seq.validate();
    return ad::Tensor<float>({seq.t, 1, seq.d, seq.h, seq.w}, seq.data);
}

core::VolumeSequence tensor_to_seq(const ad::Tensor<float>& t, const ArchConfig& cfg) {
    if (t.shape != std::vector<int>{cfg.t, 1, cfg.d, cfg.h, cfg.w})
        throw ValidationError("tensor shape " + t.shape_str() + " is not a config-shaped sequence");
    core::VolumeSequence seq;
    seq.t = cfg.t;
    seq.d = cfg.d;
    seq.h = cfg.h;
    seq.w = cfg.w;
    seq.data = t.v;
    return seq;
}

} // namespace fmrigen::nets
