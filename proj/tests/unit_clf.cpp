#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmrigen/core/normalize.hpp"
#include "fmrigen/core/phantom.hpp"
#include "fmrigen/eval/classify.hpp"
#include "fmrigen/util/rng.hpp"

namespace eval = fmrigen::eval;
namespace core = fmrigen::core;
namespace fs = std::filesystem;
using fmrigen::ConfigError;
using fmrigen::Rng;
using fmrigen::ValidationError;
using core::Cond;
using core::Label;
using core::VolumeSequence;

namespace {

// Trapezoidal area under the ROC curve, ties grouped per threshold. An
// independent route to the same quantity as the pairwise statistic.
double roc_auc(const std::vector<Label>& labels, const std::vector<double>& scores) {
    std::vector<double> thr = scores;
    std::sort(thr.rbegin(), thr.rend());
    thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
    double pos = 0, neg = 0;
    for (Label l : labels) (l == Label::ASD ? pos : neg) += 1;
    double area = 0, tp = 0, fp = 0, prev_tp = 0, prev_fp = 0;
    for (double t : thr) {
        for (size_t i = 0; i < scores.size(); ++i)
            if (scores[i] == t) (labels[i] == Label::ASD ? tp : fp) += 1;
        area += (fp - prev_fp) / neg * (tp + prev_tp) / (2 * pos);
        prev_tp = tp;
        prev_fp = fp;
    }
    return area;
}

// Small separable dataset: class-dependent ROI amplitude, normalized the way
// the training pipeline feeds sequences to models.
std::vector<VolumeSequence> phantom_classes(int per_class, uint64_t seed,
                                            double asd_amp = 1.0, double hc_amp = 0.0) {
    core::PhantomSpec spec;
    spec.t = 6;
    spec.d = spec.h = spec.w = 16;
    spec.n_subjects_per_class = per_class;
    spec.baseline = 10.0;
    spec.noise_sigma = 0.25;
    spec.block_len_frames = 3;
    spec.seed = seed;
    spec.rois.push_back({{8, 8, 8}, 2.5, Cond::BIO, asd_amp, hc_amp});
    auto ph = core::make_phantom(spec);
    for (auto& s : ph.subjects) core::normalize_sequence(s);
    return std::move(ph.subjects);
}

eval::ClfConfig fast_cfg(int epochs = 12) {
    eval::ClfConfig cfg;
    cfg.pool = 2; // 16^3 volumes leave room for exactly two stride-2 convs
    cfg.epochs = epochs;
    return cfg;
}

} // namespace

TEST_CASE("metrics are perfect for perfectly ordered scores") {
    std::vector<Label> labels{Label::ASD, Label::HC, Label::ASD, Label::HC};
    std::vector<double> scores{0.9, 0.1, 0.8, 0.2};
    auto rep = eval::classification_metrics(labels, scores);
    CHECK(rep.accuracy == doctest::Approx(1.0));
    CHECK(rep.f1 == doctest::Approx(1.0));
    REQUIRE(rep.auc.has_value());
    CHECK(*rep.auc == doctest::Approx(1.0));
    CHECK(rep.n == 4);
    CHECK(rep.ce_loss < 0.25);
}

TEST_CASE("auc counts exactly the correctly ordered pairs") {
    std::vector<Label> labels{Label::HC, Label::HC, Label::ASD, Label::ASD};
    std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
    auto rep = eval::classification_metrics(labels, scores);
    REQUIRE(rep.auc.has_value());
    CHECK(*rep.auc == doctest::Approx(0.75).epsilon(1e-12));

    // A fully tied score list gives chance-level AUC.
    std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    auto tied = eval::classification_metrics(labels, flat);
    CHECK(*tied.auc == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("f1 follows precision and recall with ASD positive") {
    std::vector<Label> labels{Label::ASD, Label::HC, Label::ASD};
    std::vector<double> scores{0.9, 0.9, 0.1}; // predicts ASD, ASD, HC
    auto rep = eval::classification_metrics(labels, scores);
    CHECK(rep.f1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // No predicted and no true positives pins F1 at zero.
    std::vector<Label> hc{Label::HC, Label::HC};
    std::vector<double> low{0.1, 0.2};
    CHECK(eval::classification_metrics(hc, low).f1 == 0.0);
}

TEST_CASE("pairwise auc equals the roc-curve area") {
    Rng rng(808);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Label> labels;
        std::vector<double> scores;
        for (int i = 0; i < 25; ++i) {
            labels.push_back(rng.uniform() < 0.5 ? Label::ASD : Label::HC);
            // Quantized scores force ties across rows.
            scores.push_back(std::round(rng.uniform() * 10.0) / 10.0);
        }
        labels[0] = Label::ASD; // both classes always present
        labels[1] = Label::HC;
        auto m = eval::classification_metrics(labels, scores);
        REQUIRE(m.auc.has_value());
        CHECK(std::abs(*m.auc - roc_auc(labels, scores)) < 1e-10);
    }
}

TEST_CASE("single-class labels leave auc undefined") {
    std::vector<Label> labels{Label::HC, Label::HC, Label::HC};
    std::vector<double> scores{0.2, 0.6, 0.4};
    auto rep = eval::classification_metrics(labels, scores);
    CHECK_FALSE(rep.auc.has_value());
    CHECK(rep.n == 3);
}

TEST_CASE("metrics validate their inputs") {
    std::vector<Label> labels{Label::ASD, Label::HC};
    CHECK_THROWS_AS(eval::classification_metrics(labels, {0.5}), ValidationError);
    CHECK_THROWS_AS(eval::classification_metrics({}, {}), ValidationError);
    CHECK_THROWS_AS(eval::classification_metrics(labels, {0.5, 1.5}), ValidationError);
    CHECK_THROWS_AS(eval::classification_metrics(labels, {-0.1, 0.5}), ValidationError);
}

TEST_CASE("gaussian augmentation keeps originals and controls the noise") {
    auto base = phantom_classes(2, 41);
    auto same = eval::augment_gaussian(base, 0.0, 2, 7);
    REQUIRE(same.size() == base.size() * 3);
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(same[i].subject_id == base[i].subject_id);
        CHECK(same[i].data == base[i].data);
        CHECK(same[base.size() + i].data == base[i].data); // sigma 0 copies exactly
        CHECK(same[base.size() + i].subject_id == base[i].subject_id + "-noise1");
        CHECK(same[2 * base.size() + i].subject_id == base[i].subject_id + "-noise2");
        REQUIRE(same[base.size() + i].label.has_value());
        CHECK(*same[base.size() + i].label == *base[i].label);
    }

    auto noisy = eval::augment_gaussian(base, 0.1, 1, 7);
    double acc = 0;
    int64_t count = 0;
    for (size_t i = 0; i < base.size(); ++i) {
        const auto& a = base[i].data;
        const auto& b = noisy[base.size() + i].data;
        for (size_t j = 0; j < a.size(); ++j) {
            const double d = static_cast<double>(b[j]) - a[j];
            acc += d * d;
            ++count;
        }
    }
    const double std_hat = std::sqrt(acc / static_cast<double>(count));
    CHECK(count > 90000);
    CHECK(std_hat == doctest::Approx(0.1).epsilon(0.02));

    // Deterministic in the seed, distinct across copies.
    auto again = eval::augment_gaussian(base, 0.1, 1, 7);
    CHECK(again[base.size()].data == noisy[base.size()].data);
    auto two = eval::augment_gaussian(base, 0.1, 2, 7);
    CHECK(two[base.size()].data != two[2 * base.size()].data);

    CHECK_THROWS_AS(eval::augment_gaussian(base, -0.1, 1, 7), ValidationError);
    CHECK_THROWS_AS(eval::augment_gaussian(base, 0.1, -1, 7), ValidationError);
}

TEST_CASE("classifier config rejects impossible geometry") {
    eval::ClfConfig cfg;
    cfg.pool = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.conv_kernel = 1;
    cfg.conv_stride = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.conv_channels.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lr = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    // Pool 4 on 16^3 volumes kills the second conv layer.
    auto data = phantom_classes(2, 5);
    eval::ClfConfig dead;
    dead.pool = 4;
    dead.epochs = 1;
    CHECK_THROWS_AS(eval::train_classifier(data, data, dead, 1), ConfigError);
}

TEST_CASE("classifier separates phantom classes") {
    auto all = phantom_classes(8, 11);
    // make_phantom orders all ASD then all HC; interleave the split.
    std::vector<VolumeSequence> train, val;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 8; ++i) (i < 6 ? train : val).push_back(all[static_cast<size_t>(c * 8 + i)]);
    auto clf = eval::train_classifier(train, val, fast_cfg(15), 2);

    int correct = 0;
    for (const auto& s : val) {
        const double p = clf.predict(s);
        if ((p >= 0.5) == (*s.label == Label::ASD)) ++correct;
    }
    CHECK(correct >= 4); // 4 of 4 expected; the bound leaves no slack on 4 samples

    // Deterministic retrain gives identical predictions.
    auto clf2 = eval::train_classifier(train, val, fast_cfg(15), 2);
    for (const auto& s : val) CHECK(clf.predict(s) == clf2.predict(s));
}

TEST_CASE("classifier overfits a single pair") {
    auto data = phantom_classes(1, 31);
    REQUIRE(data.size() == 2);
    eval::ClfConfig cfg = fast_cfg(60);
    cfg.lr = 3e-3;
    auto clf = eval::train_classifier(data, data, cfg, 4);
    std::vector<Label> labels;
    std::vector<double> scores;
    for (const auto& s : data) {
        labels.push_back(*s.label);
        scores.push_back(clf.predict(s));
    }
    auto rep = eval::classification_metrics(labels, scores);
    CHECK(rep.ce_loss < 0.05);
    CHECK(rep.accuracy == 1.0);
}

TEST_CASE("label-shuffled training stays at chance on held-out data") {
    auto all = phantom_classes(6, 19);
    std::vector<VolumeSequence> train(all.begin(), all.begin() + 4);
    std::vector<VolumeSequence> test;
    // Balanced held-out set: 2 ASD + 2 HC.
    test.push_back(all[4]);
    test.push_back(all[5]);
    test.push_back(all[10]);
    test.push_back(all[11]);
    // Scramble the training labels so the only signal is noise.
    train.push_back(all[6]);
    train.push_back(all[7]);
    train[0].label = Label::HC;
    train[2].label = Label::ASD;
    train[4].label = Label::ASD;

    auto clf = eval::train_classifier(train, test, fast_cfg(8), 9);
    int correct = 0;
    for (const auto& s : test)
        if ((clf.predict(s) >= 0.5) == (*s.label == Label::ASD)) ++correct;
    const double acc = correct / 4.0;
    CHECK(acc >= 0.25);
    CHECK(acc <= 0.75);
}

TEST_CASE("zero training epochs keep the initialization") {
    auto data = phantom_classes(1, 3);
    auto clf = eval::train_classifier(data, data, fast_cfg(0), 5);
    // Fresh-init output with zeroed final bias behaves like an untrained net.
    const double p = clf.predict(data[0]);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
}

TEST_CASE("unlabeled or empty datasets are rejected") {
    auto data = phantom_classes(1, 3);
    auto un = data;
    un[0].label.reset();
    CHECK_THROWS_AS(eval::train_classifier(un, data, fast_cfg(1), 1), ValidationError);
    CHECK_THROWS_AS(eval::train_classifier({}, data, fast_cfg(1), 1), ValidationError);
    CHECK_THROWS_AS(eval::train_classifier(data, {}, fast_cfg(1), 1), ValidationError);
}

TEST_CASE("augmentation arms compare against an unaugmented baseline") {
    auto all = phantom_classes(7, 23);
    std::vector<VolumeSequence> train, val, test;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 7; ++i) {
            const auto& s = all[static_cast<size_t>(c * 7 + i)];
            (i < 3 ? train : i < 5 ? val : test).push_back(s);
        }

    // Oracle generator: fresh draws from the true class distributions.
    eval::SynthFn oracle = [](int n_per_class, uint64_t seed) {
        auto synth = phantom_classes(n_per_class, 9000 + seed);
        for (size_t i = 0; i < synth.size(); ++i)
            synth[i].subject_id = "synth-" + synth[i].subject_id;
        return synth;
    };

    auto reports = eval::augmentation_experiment(train, val, test, {{"oracle", oracle}}, 10,
                                                 fast_cfg(10), 13);
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].tag == "none");
    CHECK(reports[1].tag == "gaussian");
    CHECK(reports[2].tag == "oracle");
    for (const auto& r : reports) {
        CHECK(r.n == 4);
        REQUIRE(r.auc.has_value());
    }

    // Baseline arm must equal a direct training run at the same seed.
    auto direct = eval::train_classifier(train, val, fast_cfg(10), 13);
    std::vector<Label> labels;
    std::vector<double> scores;
    for (const auto& s : test) {
        labels.push_back(*s.label);
        scores.push_back(direct.predict(s));
    }
    auto base = eval::classification_metrics(labels, scores);
    CHECK(reports[0].ce_loss == doctest::Approx(base.ce_loss).epsilon(1e-12));
    CHECK(reports[0].accuracy == doctest::Approx(base.accuracy));

    // Fresh true-distribution draws cannot hurt on separable classes.
    CHECK(*reports[2].auc >= *reports[0].auc - 0.05);

    // Null generators are skipped, not fatal.
    auto skipped = eval::augmentation_experiment(train, val, test, {{"missing", nullptr}}, 10,
                                                 fast_cfg(10), 13);
    REQUIRE(skipped.size() == 2);
    CHECK(skipped[1].tag == "gaussian");

    CHECK_THROWS_AS(eval::augmentation_experiment(train, val, test, {}, 2, fast_cfg(1), 1),
                    ValidationError);
}

TEST_CASE("classifier csv lists one row per arm") {
    std::vector<eval::ClassifierReport> reports(2);
    reports[0].tag = "none";
    reports[0].ce_loss = 0.5;
    reports[0].accuracy = 0.75;
    reports[0].f1 = 0.8;
    reports[0].auc = 0.9;
    reports[0].n = 8;
    reports[1].tag = "gaussian";
    reports[1].ce_loss = 0.6;
    reports[1].accuracy = 0.5;
    reports[1].f1 = 0.4;
    reports[1].n = 8; // auc absent

    const auto path = (fs::temp_directory_path() / "fmrigen_clf_test.csv").string();
    eval::write_classifier_csv(path, reports);
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line);
    CHECK(line == "augmentation,ce_loss,accuracy,f1,auc,n_test");
    std::getline(is, line);
    CHECK(line == "none,0.5,0.75,0.8,0.9,8");
    std::getline(is, line);
    CHECK(line == "gaussian,0.6,0.5,0.4,,8");
    fs::remove(path);
}
