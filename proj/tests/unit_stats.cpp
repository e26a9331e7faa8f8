#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fmrigen/core/phantom.hpp"
#include "fmrigen/eval/stats.hpp"
#include "fmrigen/util/rng.hpp"

#include "ttest_fixtures.inc"

namespace eval = fmrigen::eval;
namespace fs = std::filesystem;
using fmrigen::ValidationError;
using fmrigen::core::Cond;
using fmrigen::core::Label;
using fmrigen::core::Parcellation;
using fmrigen::core::PhantomSpec;
using fmrigen::core::StimulusSchedule;
using fmrigen::core::VolumeSequence;

namespace {

VolumeSequence single_voxel_seq(const std::vector<float>& series) {
    VolumeSequence s;
    s.t = static_cast<int>(series.size());
    s.d = s.h = s.w = 1;
    s.data = series;
    s.subject_id = "probe";
    s.label = Label::HC;
    return s;
}

Parcellation single_voxel_parc() {
    Parcellation p;
    p.d = p.h = p.w = 1;
    p.labels = {1};
    p.region_names[1] = "probe";
    return p;
}

StimulusSchedule alternating(int t, int lag = 0) {
    StimulusSchedule s;
    for (int i = 0; i < t; ++i) s.conditions.push_back(i % 2 ? Cond::BIO : Cond::SCRAM);
    s.lag_frames = lag;
    return s;
}

PhantomSpec clean_spec() {
    PhantomSpec spec;
    spec.t = 8;
    spec.d = spec.h = spec.w = 8;
    spec.n_subjects_per_class = 1;
    spec.baseline = 100.0;
    spec.noise_sigma = 0.0;
    spec.block_len_frames = 2;
    spec.rois.push_back({{4, 4, 4}, 1.5, Cond::BIO, 3.0, 3.0});
    return spec;
}

} // namespace

TEST_CASE("roi mean averages exactly the labelled voxels") {
    VolumeSequence s;
    s.t = 2;
    s.d = s.h = 1;
    s.w = 3;
    s.data = {1.0f, 3.0f, 50.0f, 5.0f, 7.0f, 60.0f};
    Parcellation p;
    p.d = p.h = 1;
    p.w = 3;
    p.labels = {1, 1, 2};
    p.region_names[1] = "pair";
    p.region_names[2] = "lone";

    auto pair = eval::roi_mean_series(s, p, 1);
    REQUIRE(pair.size() == 2);
    CHECK(pair[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(pair[1] == doctest::Approx(6.0).epsilon(1e-12));

    auto lone = eval::roi_mean_series(s, p, 2);
    CHECK(lone[0] == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(lone[1] == doctest::Approx(60.0).epsilon(1e-12));

    CHECK_THROWS_AS(eval::roi_mean_series(s, p, 9), ValidationError);
    Parcellation wrong = p;
    wrong.w = 2;
    wrong.labels = {1, 1};
    CHECK_THROWS_AS(eval::roi_mean_series(s, wrong, 1), ValidationError);
}

TEST_CASE("roi mean on a noise-free phantom recovers baseline plus amplitude") {
    auto ph = fmrigen::core::make_phantom(clean_spec());
    const auto& seq = ph.subjects.front();
    auto series = eval::roi_mean_series(seq, ph.parcellation, 1);
    auto bio = fmrigen::core::condition_frames(ph.schedule, Cond::BIO);
    REQUIRE_FALSE(bio.empty());
    std::vector<bool> is_bio(static_cast<size_t>(seq.t), false);
    for (int f : bio) is_bio[static_cast<size_t>(f)] = true;
    for (int f = 0; f < seq.t; ++f) {
        const double want = is_bio[static_cast<size_t>(f)] ? 103.0 : 100.0;
        CHECK(series[static_cast<size_t>(f)] == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("z-scoring uses the population std and zeroes constants") {
    auto z = eval::zscore_series({1.0, 3.0, 1.0, 3.0});
    REQUIRE(z.size() == 4);
    CHECK(z[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(z[2] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(z[3] == doctest::Approx(1.0).epsilon(1e-12));

    auto flat = eval::zscore_series({7.5, 7.5, 7.5});
    for (double v : flat) CHECK(v == 0.0);

    CHECK_THROWS_AS(eval::zscore_series({1.0}), ValidationError);

    // Any z-scored series has mean 0 and population variance 1.
    fmrigen::Rng rng(11);
    std::vector<double> raw;
    for (int i = 0; i < 257; ++i) raw.push_back(rng.normal() * 3.0 + 40.0);
    auto zr = eval::zscore_series(raw);
    double mean = 0, var = 0;
    for (double v : zr) mean += v;
    mean /= static_cast<double>(zr.size());
    for (double v : zr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(zr.size());
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-10);
}

TEST_CASE("condition means split the z-scored series by stimulus tag") {
    std::vector<VolumeSequence> ds{single_voxel_seq({0.0f, 2.0f, 0.0f, 2.0f})};
    auto rep = eval::condition_mean_z(ds, alternating(4), single_voxel_parc(), {1});
    REQUIRE(rep.rows.size() == 1);
    const auto& r = rep.rows.front();
    CHECK(r.region_id == 1);
    CHECK(r.region_name == "probe");
    CHECK(r.mean_z_bio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.mean_z_scram == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r.n_bio_frames == 2);
    CHECK(r.n_scram_frames == 2);
}

TEST_CASE("condition means reject schedules missing a condition") {
    std::vector<VolumeSequence> ds{single_voxel_seq({0.0f, 2.0f, 0.0f, 2.0f})};
    StimulusSchedule bio_only;
    bio_only.conditions = {Cond::BIO, Cond::BIO, Cond::BIO, Cond::BIO};
    CHECK_THROWS_WITH_AS(eval::condition_mean_z(ds, bio_only, single_voxel_parc(), {1}),
                         doctest::Contains("no SCRAM frames"), ValidationError);

    StimulusSchedule short_sched = alternating(3);
    CHECK_THROWS_AS(eval::condition_mean_z(ds, short_sched, single_voxel_parc(), {1}),
                    ValidationError);
}

TEST_CASE("condition means respect the hemodynamic lag") {
    // Signal shifted one frame after its stimulus: lag 1 realigns them.
    std::vector<VolumeSequence> ds{single_voxel_seq({0.0f, 0.0f, 2.0f, 0.0f, 2.0f, 0.0f})};
    StimulusSchedule sched;
    sched.conditions = {Cond::SCRAM, Cond::BIO, Cond::SCRAM, Cond::BIO, Cond::SCRAM, Cond::BIO};
    sched.lag_frames = 1;
    auto rep = eval::condition_mean_z(ds, sched, single_voxel_parc(), {1});
    CHECK(rep.rows[0].mean_z_bio > 0.9);
    CHECK(rep.rows[0].mean_z_scram < -0.4);
    // Frames 1..5 remain after the shift: 2 BIO, 3 SCRAM.
    CHECK(rep.rows[0].n_bio_frames == 2);
    CHECK(rep.rows[0].n_scram_frames == 3);
}

TEST_CASE("phantom condition contrast carries the sign of the active condition") {
    auto spec = clean_spec();
    spec.noise_sigma = 0.05;
    spec.seed = 3;
    spec.rois.push_back({{10, 10, 10}, 1.5, Cond::SCRAM, 3.0, 3.0});
    spec.d = spec.h = spec.w = 14;
    spec.rois[0].center = {4, 4, 4};
    auto ph = fmrigen::core::make_phantom(spec);

    auto rep = eval::condition_mean_z(ph.subjects, ph.schedule, ph.parcellation,
                                      eval::all_region_ids(ph.parcellation));
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].mean_z_bio > 0.5);
    CHECK(rep.rows[0].mean_z_scram < -0.5);
    CHECK(rep.rows[1].mean_z_bio < -0.5);
    CHECK(rep.rows[1].mean_z_scram > 0.5);
}

TEST_CASE("bio and scram z-means balance when the schedule has no rest") {
    auto spec = clean_spec();
    spec.noise_sigma = 0.4;
    spec.seed = 17;
    spec.n_subjects_per_class = 3;
    auto ph = fmrigen::core::make_phantom(spec);
    auto rep = eval::condition_mean_z(ph.subjects, ph.schedule, ph.parcellation, {1});
    const auto& r = rep.rows.front();
    // Z-scores sum to zero over each series, so condition means weighted by
    // frame counts cancel exactly when every frame is BIO or SCRAM.
    CHECK(std::abs(r.n_bio_frames * r.mean_z_bio + r.n_scram_frames * r.mean_z_scram) < 1e-8);
}

TEST_CASE("rest frames are excluded from the condition means") {
    StimulusSchedule sched;
    sched.conditions = {Cond::BIO, Cond::BIO, Cond::REST, Cond::REST, Cond::SCRAM, Cond::SCRAM,
                        Cond::BIO, Cond::BIO, Cond::REST, Cond::REST, Cond::SCRAM, Cond::SCRAM};
    fmrigen::Rng rng(23);
    std::vector<float> series;
    for (int f = 0; f < 12; ++f) {
        float v = static_cast<float>(rng.normal() * 0.3);
        if (sched.conditions[static_cast<size_t>(f)] == Cond::BIO) v += 2.0f;
        if (sched.conditions[static_cast<size_t>(f)] == Cond::REST) v += 9.0f; // loud outlier
        series.push_back(v);
    }
    std::vector<VolumeSequence> ds{single_voxel_seq(series)};
    auto rep = eval::condition_mean_z(ds, sched, single_voxel_parc(), {1});
    const auto& r = rep.rows.front();
    CHECK(r.n_bio_frames == 4);
    CHECK(r.n_scram_frames == 4);
    // BIO keeps its bump over SCRAM even though REST dominates the series.
    CHECK(r.mean_z_bio > r.mean_z_scram);

    // The rest-frame z-mean closes the weighted sum to zero.
    std::vector<double> raw(series.begin(), series.end());
    auto z = eval::zscore_series(raw);
    auto rest = fmrigen::core::condition_frames(sched, Cond::REST);
    REQUIRE(rest.size() == 4);
    double rest_mean = 0;
    for (int f : rest) rest_mean += z[static_cast<size_t>(f)];
    rest_mean /= static_cast<double>(rest.size());
    const double total = r.n_bio_frames * r.mean_z_bio + r.n_scram_frames * r.mean_z_scram +
                         static_cast<double>(rest.size()) * rest_mean;
    CHECK(std::abs(total) < 1e-8);
}

TEST_CASE("t-test handles identical and degenerate groups") {
    auto same = eval::two_sample_ttest({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, false);
    CHECK(same.t == doctest::Approx(0.0));
    CHECK(same.p == doctest::Approx(1.0));

    auto flat_eq = eval::two_sample_ttest({2.0, 2.0}, {2.0, 2.0}, false);
    CHECK(flat_eq.t == 0.0);
    CHECK(flat_eq.p == 1.0);

    auto flat_ne = eval::two_sample_ttest({1.0, 1.0}, {2.0, 2.0}, false);
    CHECK(std::isinf(flat_ne.t));
    CHECK(flat_ne.t < 0);
    CHECK(flat_ne.p == 0.0);

    CHECK_THROWS_AS(eval::two_sample_ttest({1.0}, {1.0, 2.0}, false), ValidationError);
}

TEST_CASE("t-test matches the frozen spot fixture") {
    auto pooled = eval::two_sample_ttest({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}, false);
    CHECK(pooled.t == doctest::Approx(-1.5491933384829668).epsilon(1e-12));
    CHECK(pooled.p == doctest::Approx(0.19626117814926947).epsilon(1e-12));
    CHECK(pooled.df == doctest::Approx(4.0));

    auto welch = eval::two_sample_ttest({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}, true);
    CHECK(welch.t == doctest::Approx(-1.5491933384829668).epsilon(1e-12));
    CHECK(welch.p == doctest::Approx(0.2208808404940958).epsilon(1e-10));
}

TEST_CASE("t-test agrees with the reference fixtures") {
    REQUIRE(kTtestFixtures.size() == 100);
    for (const auto& fx : kTtestFixtures) {
        auto pooled = eval::two_sample_ttest(fx.a, fx.b, false);
        CHECK(std::abs(pooled.t - fx.t_pooled) < 1e-6);
        CHECK(std::abs(pooled.p - fx.p_pooled) < 1e-6);
        auto welch = eval::two_sample_ttest(fx.a, fx.b, true);
        CHECK(std::abs(welch.t - fx.t_welch) < 1e-6);
        CHECK(std::abs(welch.p - fx.p_welch) < 1e-6);
    }
}

TEST_CASE("regularized incomplete beta matches closed forms") {
    CHECK(eval::reg_inc_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(eval::reg_inc_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1,1) = x.
    CHECK(eval::reg_inc_beta(1.0, 1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    // I_x(1/2,1/2) = (2/pi) asin(sqrt(x)).
    for (double x : {0.1, 0.42, 0.9}) {
        const double want = 2.0 / M_PI * std::asin(std::sqrt(x));
        CHECK(eval::reg_inc_beta(0.5, 0.5, x) == doctest::Approx(want).epsilon(1e-10));
    }
    // I_x(a,b) = 1 - I_{1-x}(b,a).
    CHECK(eval::reg_inc_beta(3.5, 1.25, 0.7) ==
          doctest::Approx(1.0 - eval::reg_inc_beta(1.25, 3.5, 0.3)).epsilon(1e-10));
    CHECK_THROWS_AS(eval::reg_inc_beta(0.0, 1.0, 0.5), ValidationError);
}

TEST_CASE("contrast test separates active from silent regions") {
    int active_hits = 0, null_calm = 0;
    const int trials = 50;
    for (int trial = 0; trial < trials; ++trial) {
        PhantomSpec spec;
        spec.t = 24;
        spec.d = spec.h = spec.w = 12;
        spec.n_subjects_per_class = 2;
        spec.baseline = 10.0;
        spec.noise_sigma = 0.2;
        spec.block_len_frames = 3;
        spec.seed = 1000 + static_cast<uint64_t>(trial);
        spec.rois.push_back({{3, 3, 3}, 1.5, Cond::BIO, 1.0, 1.0});
        spec.rois.push_back({{8, 8, 8}, 1.5, Cond::BIO, 0.0, 0.0});
        auto ph = fmrigen::core::make_phantom(spec);

        auto rep = eval::bio_scram_ttest(ph.subjects, ph.schedule, ph.parcellation, {1, 2});
        REQUIRE(rep.rows.size() == 2);
        if (rep.rows[0].p_value < 0.01) ++active_hits;
        if (rep.rows[1].p_value > 0.05) ++null_calm;
        CHECK(rep.rows[0].mean_z_bio > rep.rows[0].mean_z_scram);
    }
    CHECK(active_hits == trials);
    CHECK(null_calm >= 45);
}

TEST_CASE("subject-level contrast pools one mean per subject") {
    PhantomSpec spec;
    spec.t = 24;
    spec.d = spec.h = spec.w = 10;
    spec.n_subjects_per_class = 3;
    spec.baseline = 10.0;
    spec.noise_sigma = 0.1;
    spec.block_len_frames = 3;
    spec.seed = 77;
    spec.rois.push_back({{5, 5, 5}, 1.5, Cond::BIO, 1.0, 1.0});
    auto ph = fmrigen::core::make_phantom(spec);

    auto frame = eval::bio_scram_ttest(ph.subjects, ph.schedule, ph.parcellation, {1});
    auto subj = eval::bio_scram_ttest(ph.subjects, ph.schedule, ph.parcellation, {1}, false, true);
    CHECK(frame.rows[0].p_value < 0.01);
    CHECK(subj.rows[0].p_value < 0.01);
    // The reported means are the same either way; only the test samples differ.
    CHECK(subj.rows[0].mean_z_bio == doctest::Approx(frame.rows[0].mean_z_bio).epsilon(1e-12));
    CHECK(subj.rows[0].mean_z_scram == doctest::Approx(frame.rows[0].mean_z_scram).epsilon(1e-12));
    CHECK(subj.rows[0].t_statistic != frame.rows[0].t_statistic);
}

TEST_CASE("contrast csv round-trips the report rows") {
    eval::ContrastReport rep;
    rep.rows.push_back({1, "alpha", 0.5, -0.5, 3.25, 0.0125, 12, 12});
    rep.rows.push_back({2, "beta", 0.0, 0.0, 0.0, 1.0, 6, 6});
    const auto path = (fs::temp_directory_path() / "fmrigen_contrast_test.csv").string();
    eval::write_contrast_csv(path, rep);

    std::ifstream is(path);
    REQUIRE(is.good());
    std::string header;
    std::getline(is, header);
    CHECK(header ==
          "region_id,region_name,mean_z_bio,mean_z_scram,t_statistic,p_value,n_bio_frames,"
          "n_scram_frames");
    std::string line;
    std::getline(is, line);
    int id = 0, nb = 0, ns = 0;
    char name[32];
    double zb = 0, zs = 0, t = 0, p = 0;
    REQUIRE(std::sscanf(line.c_str(), "%d,%31[^,],%lf,%lf,%lf,%lf,%d,%d", &id, name, &zb, &zs, &t,
                        &p, &nb, &ns) == 8);
    CHECK(id == 1);
    CHECK(std::string(name) == "alpha");
    CHECK(zb == doctest::Approx(0.5));
    CHECK(p == doctest::Approx(0.0125));
    CHECK(ns == 12);
    std::getline(is, line);
    CHECK(line.substr(0, 7) == "2,beta,");
    fs::remove(path);
}

TEST_CASE("region id listing follows the parcellation") {
    auto ph = fmrigen::core::make_phantom(clean_spec());
    CHECK(eval::all_region_ids(ph.parcellation) == std::vector<int>{1});

    auto spec = clean_spec();
    spec.d = spec.h = spec.w = 14;
    spec.rois.push_back({{10, 10, 10}, 1.5, Cond::SCRAM, 1.0, 1.0});
    auto ph2 = fmrigen::core::make_phantom(spec);
    CHECK(eval::all_region_ids(ph2.parcellation) == std::vector<int>{1, 2});
}
