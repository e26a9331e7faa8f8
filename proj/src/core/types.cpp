#include "fmrigen/core/types.hpp"

#include <algorithm>
#include <set>

namespace fmrigen::core {

std::string label_name(Label l) { return l == Label::ASD ? "ASD" : "HC"; }

Label parse_label(const std::string& s) {
    if (s == "ASD") return Label::ASD;
    if (s == "HC") return Label::HC;
    throw FormatError("unknown label '" + s + "' (expected ASD or HC)");
}

std::string cond_name(Cond c) {
    switch (c) {
        case Cond::BIO: return "BIO";
        case Cond::SCRAM: return "SCRAM";
        default: return "REST";
    }
}

Cond parse_cond(const std::string& s) {
    if (s == "BIO") return Cond::BIO;
    if (s == "SCRAM") return Cond::SCRAM;
    if (s == "REST") return Cond::REST;
    throw FormatError("unknown condition tag '" + s + "'");
}

void VolumeSequence::validate() const {
    if (t < 1 || d < 1 || h < 1 || w < 1)
        throw ValidationError("sequence dims must all be >= 1, got [" + std::to_string(t) + "," +
                              std::to_string(d) + "," + std::to_string(h) + "," +
                              std::to_string(w) + "]");
    if (static_cast<int64_t>(data.size()) != total())
        throw ValidationError("sequence data length " + std::to_string(data.size()) +
                              " does not match dims (expect " + std::to_string(total()) + ")");
    for (const auto& s : voxel_size_mm)
        if (!(s > 0.0)) throw ValidationError("voxel_size_mm must be positive");
    if (!(frame_interval_s > 0.0)) throw ValidationError("frame_interval_s must be positive");
    for (float x : data)
        if (!std::isfinite(x)) throw ValidationError("sequence contains non-finite values");
}

void StimulusSchedule::validate() const {
    if (conditions.empty()) throw ValidationError("schedule must cover at least one frame");
    if (lag_frames < 0) throw ValidationError("lag_frames must be non-negative");
}

std::vector<int> condition_frames(const StimulusSchedule& s, Cond c) {
    std::vector<int> out;
    const int T = s.t();
    for (int i = 0; i < T; ++i) {
        if (s.conditions[static_cast<size_t>(i)] != c) continue;
        const int j = i + s.lag_frames;
        if (j < T) out.push_back(j);
    }
    return out;
}

void Parcellation::validate() const {
    if (d < 1 || h < 1 || w < 1) throw ValidationError("parcellation dims must be >= 1");
    if (static_cast<int64_t>(labels.size()) != total())
        throw ValidationError("parcellation label count does not match dims");
    std::set<int32_t> present;
    for (int32_t v : labels) {
        if (v < 0) throw ValidationError("parcellation labels must be non-negative");
        if (v > 0) present.insert(v);
    }
    for (const auto& [id, name] : region_names) {
        if (id <= 0) throw ValidationError("region ids must be positive");
        if (!present.count(id))
            throw ValidationError("region id " + std::to_string(id) + " ('" + name +
                                  "') does not occur in labels");
    }
}

void PhantomSpec::validate() const {
    if (t < 1 || d < 1 || h < 1 || w < 1) throw ValidationError("phantom dims must be >= 1");
    if (n_subjects_per_class < 1)
        throw ValidationError("phantom needs at least one subject per class");
    if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");
    if (spatial_smooth_fwhm < 0.0) throw ValidationError("spatial_smooth_fwhm must be >= 0");
    if (block_len_frames < 1) throw ValidationError("block_len_frames must be >= 1");
    if (block_order.empty()) throw ValidationError("block_order must be non-empty");
    if (lag_frames < 0) throw ValidationError("lag_frames must be >= 0");
    for (const auto& r : rois) {
        if (!(r.radius >= 0.0) || !std::isfinite(r.radius))
            throw ValidationError("roi radius must be finite and >= 0");
        if (!std::isfinite(r.amplitude_asd) || !std::isfinite(r.amplitude_hc))
            throw ValidationError("roi amplitudes must be finite");
        if (r.active == Cond::REST) throw ValidationError("roi active condition must be BIO or SCRAM");
        const int dims[3] = {d, h, w};
        for (int a = 0; a < 3; ++a) {
            if (r.center[static_cast<size_t>(a)] - r.radius < 0.0 ||
                r.center[static_cast<size_t>(a)] + r.radius > dims[a] - 1)
                throw ValidationError("roi sphere extends outside the grid");
        }
    }
}

} // namespace fmrigen::core
