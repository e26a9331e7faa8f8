#include "fmrigen/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "fmrigen/util/error.hpp"

namespace fmrigen::eval {

using core::Cond;
using core::Parcellation;
using core::StimulusSchedule;
using core::VolumeSequence;

std::vector<double> roi_mean_series(const VolumeSequence& seq, const Parcellation& parc,
                                    int region_id) {
    seq.validate();
    parc.validate();
    if (parc.d != seq.d || parc.h != seq.h || parc.w != seq.w)
        throw ValidationError("parcellation grid does not match the sequence grid");
    std::vector<int64_t> voxels;
    for (int64_t i = 0; i < static_cast<int64_t>(parc.labels.size()); ++i)
        if (parc.labels[static_cast<size_t>(i)] == region_id) voxels.push_back(i);
    if (voxels.empty()) {
        auto it = parc.region_names.find(region_id);
        throw ValidationError("region " + std::to_string(region_id) +
                              (it != parc.region_names.end() ? " ('" + it->second + "')" : "") +
                              " has no voxels");
    }
    const int64_t fv = seq.frame_voxels();
    std::vector<double> out(static_cast<size_t>(seq.t));
    for (int t = 0; t < seq.t; ++t) {
        double acc = 0;
        for (int64_t v : voxels) acc += seq.data[static_cast<size_t>(t * fv + v)];
        out[static_cast<size_t>(t)] = acc / static_cast<double>(voxels.size());
    }
    return out;
}

std::vector<double> zscore_series(const std::vector<double>& series) {
    const size_t n = series.size();
    if (n < 2) throw ValidationError("zscore_series needs at least 2 frames");
    double mean = 0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    double var = 0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n); // population variance
    std::vector<double> out(n, 0.0);
    if (var <= 0) return out;
    const double inv = 1.0 / std::sqrt(var);
    for (size_t i = 0; i < n; ++i) out[i] = (series[i] - mean) * inv;
    return out;
}

namespace {

std::string region_label(const Parcellation& parc, int id) {
    auto it = parc.region_names.find(id);
    return it != parc.region_names.end() ? it->second : "region_" + std::to_string(id);
}

struct ConditionFrames {
    std::vector<int> bio, scram;
};

ConditionFrames shifted_frames(const StimulusSchedule& schedule, int t) {
    if (schedule.t() != t)
        throw ValidationError("schedule covers " + std::to_string(schedule.t()) +
                              " frames but sequences have " + std::to_string(t));
    ConditionFrames f{core::condition_frames(schedule, Cond::BIO),
                      core::condition_frames(schedule, Cond::SCRAM)};
    if (f.bio.empty()) throw ValidationError("schedule has no BIO frames after the lag shift");
    if (f.scram.empty()) throw ValidationError("schedule has no SCRAM frames after the lag shift");
    return f;
}

double mean_at(const std::vector<double>& z, const std::vector<int>& idx) {
    double acc = 0;
    for (int i : idx) acc += z[static_cast<size_t>(i)];
    return acc / static_cast<double>(idx.size());
}

} // namespace

ContrastReport condition_mean_z(const std::vector<VolumeSequence>& dataset,
                                const StimulusSchedule& schedule, const Parcellation& parc,
                                const std::vector<int>& region_ids) {
    if (dataset.empty()) throw ValidationError("condition_mean_z: dataset is empty");
    const ConditionFrames f = shifted_frames(schedule, dataset.front().t);
    ContrastReport report;
    for (int id : region_ids) {
        RegionContrast row;
        row.region_id = id;
        row.region_name = region_label(parc, id);
        row.n_bio_frames = static_cast<int>(f.bio.size());
        row.n_scram_frames = static_cast<int>(f.scram.size());
        for (const auto& seq : dataset) {
            const std::vector<double> z = zscore_series(roi_mean_series(seq, parc, id));
            row.mean_z_bio += mean_at(z, f.bio);
            row.mean_z_scram += mean_at(z, f.scram);
        }
        row.mean_z_bio /= static_cast<double>(dataset.size());
        row.mean_z_scram /= static_cast<double>(dataset.size());
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

// Lanczos approximation (g=7, 9 terms), |error| < 1e-13 on the positive axis.
double log_gamma(double x) {
    static const double c[9] = {0.99999999999980993,     676.5203681218851,
                                -1259.1392167224028,     771.32342877765313,
                                -176.61502916214059,     12.507343278686905,
                                -0.13857109526572012,    9.9843695780195716e-6,
                                1.5056327351493116e-7};
    if (x < 0.5) // reflection
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    x -= 1.0;
    double a = c[0];
    const double t = x + 7.5;
    for (int i = 1; i < 9; ++i) a += c[i] / (x + i);
    return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(a);
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-12) break;
    }
    return h;
}

} // namespace

double reg_inc_beta(double a, double b, double x) {
    if (a <= 0 || b <= 0) throw ValidationError("reg_inc_beta: a and b must be positive");
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    const double front =
        std::exp(log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - std::exp(log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                          b * std::log(1.0 - x) + a * std::log(x)) *
                     beta_cf(b, a, 1.0 - x) / b;
}

TtestResult two_sample_ttest(const std::vector<double>& a, const std::vector<double>& b,
                             bool welch) {
    const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
    if (a.size() < 2 || b.size() < 2)
        throw ValidationError("two_sample_ttest needs >= 2 samples per group");
    double m1 = 0, m2 = 0;
    for (double v : a) m1 += v;
    for (double v : b) m2 += v;
    m1 /= n1;
    m2 /= n2;
    double s1 = 0, s2 = 0;
    for (double v : a) s1 += (v - m1) * (v - m1);
    for (double v : b) s2 += (v - m2) * (v - m2);
    s1 /= n1 - 1;
    s2 /= n2 - 1;

    TtestResult r;
    double se2;
    if (welch) {
        se2 = s1 / n1 + s2 / n2;
        r.df = se2 > 0 ? se2 * se2 /
                             ((s1 / n1) * (s1 / n1) / (n1 - 1) + (s2 / n2) * (s2 / n2) / (n2 - 1))
                       : n1 + n2 - 2;
    } else {
        const double sp2 = ((n1 - 1) * s1 + (n2 - 1) * s2) / (n1 + n2 - 2);
        se2 = sp2 * (1.0 / n1 + 1.0 / n2);
        r.df = n1 + n2 - 2;
    }
    if (se2 <= 0) {
        if (m1 == m2) {
            r.t = 0;
            r.p = 1;
        } else {
            r.t = m1 > m2 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
            r.p = 0;
        }
        return r;
    }
    r.t = (m1 - m2) / std::sqrt(se2);
    r.p = reg_inc_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

ContrastReport bio_scram_ttest(const std::vector<VolumeSequence>& dataset,
                               const StimulusSchedule& schedule, const Parcellation& parc,
                               const std::vector<int>& region_ids, bool welch,
                               bool subject_level) {
    if (dataset.empty()) throw ValidationError("bio_scram_ttest: dataset is empty");
    const ConditionFrames f = shifted_frames(schedule, dataset.front().t);
    ContrastReport report;
    for (int id : region_ids) {
        RegionContrast row;
        row.region_id = id;
        row.region_name = region_label(parc, id);
        row.n_bio_frames = static_cast<int>(f.bio.size());
        row.n_scram_frames = static_cast<int>(f.scram.size());
        std::vector<double> bio, scram;
        for (const auto& seq : dataset) {
            const std::vector<double> z = zscore_series(roi_mean_series(seq, parc, id));
            if (subject_level) {
                bio.push_back(mean_at(z, f.bio));
                scram.push_back(mean_at(z, f.scram));
            } else {
                for (int i : f.bio) bio.push_back(z[static_cast<size_t>(i)]);
                for (int i : f.scram) scram.push_back(z[static_cast<size_t>(i)]);
            }
            row.mean_z_bio += mean_at(z, f.bio);
            row.mean_z_scram += mean_at(z, f.scram);
        }
        row.mean_z_bio /= static_cast<double>(dataset.size());
        row.mean_z_scram /= static_cast<double>(dataset.size());
        const TtestResult r = two_sample_ttest(bio, scram, welch);
        row.t_statistic = r.t;
        row.p_value = r.p;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<int> all_region_ids(const Parcellation& parc) {
    std::vector<int> ids;
    for (const auto& [id, name] : parc.region_names) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

void write_contrast_csv(const std::string& path, const ContrastReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write contrast CSV '" + path + "'");
    os << "region_id,region_name,mean_z_bio,mean_z_scram,t_statistic,p_value,"
          "n_bio_frames,n_scram_frames\n";
    char buf[320];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.10g,%.10g,%.10g,%.10g,%d,%d\n", r.region_id,
                      r.region_name.c_str(), r.mean_z_bio, r.mean_z_scram, r.t_statistic,
                      r.p_value, r.n_bio_frames, r.n_scram_frames);
        os << buf;
    }
    if (!os) throw IoError("failed writing contrast CSV '" + path + "'");
}

} // namespace fmrigen::eval
