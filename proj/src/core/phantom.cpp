#include "fmrigen/core/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "fmrigen/util/rng.hpp"

namespace fmrigen::core {

StimulusSchedule build_block_schedule(int t, int block_len_frames, const std::vector<Cond>& order,
                                      int lag_frames) {
    if (t < 1) throw ValidationError("schedule needs T >= 1");
    if (block_len_frames < 1) throw ValidationError("block_len_frames must be >= 1");
    if (order.empty()) throw ValidationError("block order must be non-empty");
    for (Cond c : order)
        if (c == Cond::REST) throw ValidationError("block order must use BIO/SCRAM only");
    if (lag_frames < 0) throw ValidationError("lag_frames must be >= 0");
    StimulusSchedule s;
    s.lag_frames = lag_frames;
    s.conditions.resize(static_cast<size_t>(t));
    for (int i = 0; i < t; ++i)
        s.conditions[static_cast<size_t>(i)] =
            order[static_cast<size_t>((i / block_len_frames) % static_cast<int>(order.size()))];
    return s;
}

namespace {

// One box pass of radius r along the chosen axis, edge windows renormalized
// by their true width so the filter stays mean-preserving.
void box_pass(std::vector<float>& vol, std::vector<float>& tmp, int d, int h, int w, int axis,
              int r) {
    const int n = axis == 0 ? d : axis == 1 ? h : w;
    const int64_t stride = axis == 0 ? static_cast<int64_t>(h) * w : axis == 1 ? w : 1;
    const int64_t lines = static_cast<int64_t>(d) * h * w / n;
    for (int64_t line = 0; line < lines; ++line) {
        // Base offset of this 1-D line within the volume.
        int64_t base;
        if (axis == 0) {
            base = line; // line indexes (h, w)
        } else if (axis == 1) {
            const int64_t di = line / w, wi = line % w;
            base = di * h * w + wi;
        } else {
            base = line * w;
        }
        double run = 0.0;
        for (int i = 0; i < std::min(n, r + 1); ++i) run += vol[base + i * stride];
        int lo = 0, hi = std::min(n, r + 1);
        for (int i = 0; i < n; ++i) {
            tmp[static_cast<size_t>(i)] = static_cast<float>(run / (hi - lo));
            const int add = i + r + 1, drop = i - r;
            if (add < n) {
                run += vol[base + add * stride];
                ++hi;
            }
            if (drop >= lo) {
                run -= vol[base + drop * stride];
                ++lo;
            }
        }
        for (int i = 0; i < n; ++i) vol[base + i * stride] = tmp[static_cast<size_t>(i)];
    }
}

} // namespace

void smooth_volume(std::vector<float>& vol, int d, int h, int w, double fwhm) {
    if (fwhm <= 0.0) return;
    const double sigma = fwhm / 2.3548200450309493; // FWHM of a Gaussian
    // Three box passes of radius r have variance r(r+1) per axis; match it
    // to sigma^2.
    const int r = static_cast<int>(std::lround((-1.0 + std::sqrt(1.0 + 4.0 * sigma * sigma)) / 2.0));
    if (r < 1) return;
    std::vector<float> tmp(static_cast<size_t>(std::max({d, h, w})));
    for (int axis = 0; axis < 3; ++axis)
        for (int pass = 0; pass < 3; ++pass) box_pass(vol, tmp, d, h, w, axis, r);
}

PhantomData make_phantom(const PhantomSpec& spec) {
    spec.validate();
    PhantomData out;
    out.schedule = build_block_schedule(spec.t, spec.block_len_frames, spec.block_order,
                                        spec.lag_frames);

    // Parcellation: ROI k labels voxels with id k+1 (later ROIs win overlaps).
    out.parcellation.d = spec.d;
    out.parcellation.h = spec.h;
    out.parcellation.w = spec.w;
    out.parcellation.labels.assign(static_cast<size_t>(out.parcellation.total()), 0);
    std::vector<std::vector<int64_t>> roi_voxels(spec.rois.size());
    for (size_t k = 0; k < spec.rois.size(); ++k) {
        const auto& roi = spec.rois[k];
        const double r2 = roi.radius * roi.radius;
        const int d0 = std::max(0, static_cast<int>(std::floor(roi.center[0] - roi.radius)));
        const int d1 = std::min(spec.d - 1, static_cast<int>(std::ceil(roi.center[0] + roi.radius)));
        const int h0 = std::max(0, static_cast<int>(std::floor(roi.center[1] - roi.radius)));
        const int h1 = std::min(spec.h - 1, static_cast<int>(std::ceil(roi.center[1] + roi.radius)));
        const int w0 = std::max(0, static_cast<int>(std::floor(roi.center[2] - roi.radius)));
        const int w1 = std::min(spec.w - 1, static_cast<int>(std::ceil(roi.center[2] + roi.radius)));
        for (int di = d0; di <= d1; ++di)
            for (int hi = h0; hi <= h1; ++hi)
                for (int wi = w0; wi <= w1; ++wi) {
                    const double dd = di - roi.center[0], dh = hi - roi.center[1],
                                 dw = wi - roi.center[2];
                    if (dd * dd + dh * dh + dw * dw > r2) continue;
                    const int64_t idx = (static_cast<int64_t>(di) * spec.h + hi) * spec.w + wi;
                    roi_voxels[k].push_back(idx);
                    out.parcellation.labels[static_cast<size_t>(idx)] =
                        static_cast<int32_t>(k + 1);
                }
        if (roi_voxels[k].empty())
            throw ValidationError("roi " + std::to_string(k) + " covers no voxels");
        out.parcellation.region_names[static_cast<int32_t>(k + 1)] = "roi_" + std::to_string(k);
    }

    // Frames that carry each ROI's response, after the hemodynamic shift;
    // the analysis applying the same shift recovers the truth exactly.
    std::vector<std::vector<int>> roi_frames(spec.rois.size());
    for (size_t k = 0; k < spec.rois.size(); ++k)
        roi_frames[k] = condition_frames(out.schedule, spec.rois[k].active);

    const int64_t fvox = static_cast<int64_t>(spec.d) * spec.h * spec.w;
    const int n_total = 2 * spec.n_subjects_per_class;
    out.subjects.reserve(static_cast<size_t>(n_total));
    for (int si = 0; si < n_total; ++si) {
        const Label cls = si < spec.n_subjects_per_class ? Label::ASD : Label::HC;
        const int within = si % spec.n_subjects_per_class;
        VolumeSequence seq;
        seq.t = spec.t;
        seq.d = spec.d;
        seq.h = spec.h;
        seq.w = spec.w;
        seq.voxel_size_mm = {spec.voxel_size_mm, spec.voxel_size_mm, spec.voxel_size_mm};
        seq.frame_interval_s = spec.frame_interval_s;
        seq.label = cls;
        char id[32];
        std::snprintf(id, sizeof id, "%s_%03d", label_name(cls).c_str(), within);
        seq.subject_id = id;
        seq.data.assign(static_cast<size_t>(seq.total()), static_cast<float>(spec.baseline));

        fmrigen::Rng rng(fmrigen::Rng::mix(spec.seed, static_cast<uint64_t>(si)));
        if (spec.noise_sigma > 0.0) {
            std::vector<float> noise(static_cast<size_t>(fvox));
            for (int ti = 0; ti < spec.t; ++ti) {
                for (auto& x : noise) x = static_cast<float>(rng.normal() * spec.noise_sigma);
                smooth_volume(noise, spec.d, spec.h, spec.w, spec.spatial_smooth_fwhm);
                float* frame = seq.data.data() + static_cast<int64_t>(ti) * fvox;
                for (int64_t i = 0; i < fvox; ++i) frame[i] += noise[static_cast<size_t>(i)];
            }
        }
        for (size_t k = 0; k < spec.rois.size(); ++k) {
            const float amp = static_cast<float>(spec.rois[k].amplitude(cls));
            if (amp == 0.0f) continue;
            for (int ti : roi_frames[k]) {
                float* frame = seq.data.data() + static_cast<int64_t>(ti) * fvox;
                for (int64_t idx : roi_voxels[k]) frame[idx] += amp;
            }
        }
        out.subjects.push_back(std::move(seq));
    }
    return out;
}

} // namespace fmrigen::core
