#include "fmrigen/eval/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "fmrigen/ad/ops.hpp"
#include "fmrigen/nets/forward.hpp"
#include "fmrigen/train/losses.hpp"
#include "fmrigen/train/optim.hpp"
#include "fmrigen/util/error.hpp"
#include "fmrigen/util/rng.hpp"

namespace fmrigen::eval {

namespace ad = fmrigen::ad;
using core::Label;
using core::VolumeSequence;

void ClfConfig::validate() const {
    if (pool < 1) throw ConfigError("classifier: pool must be >= 1");
    if (conv_kernel < 1 || conv_stride < 1 || conv_kernel < conv_stride)
        throw ConfigError("classifier: conv kernel/stride invalid");
    if (conv_channels.empty()) throw ConfigError("classifier: need at least one conv layer");
    for (int c : conv_channels)
        if (c < 1) throw ConfigError("classifier: conv channels must be >= 1");
    if (mlp_width < 1) throw ConfigError("classifier: mlp_width must be >= 1");
    if (epochs < 0) throw ConfigError("classifier: epochs must be >= 0");
    if (lr <= 0) throw ConfigError("classifier: lr must be > 0");
}

namespace {

int pooled_len(int in, int f) { return (in + f - 1) / f; }

// Conv trace after pooling; throws when a layer would collapse to nothing.
struct ClfTrace {
    std::array<int, 3> in{};
    std::vector<std::array<int, 3>> spatial;
    int feat_dim = 0;
};

ClfTrace clf_trace(const ClfConfig& cfg, int d, int h, int w) {
    cfg.validate();
    ClfTrace tr;
    tr.in = {pooled_len(d, cfg.pool), pooled_len(h, cfg.pool), pooled_len(w, cfg.pool)};
    std::array<int, 3> cur = tr.in;
    for (size_t l = 0; l < cfg.conv_channels.size(); ++l) {
        for (int a = 0; a < 3; ++a)
            cur[static_cast<size_t>(a)] =
                nets::conv_out_len(cur[static_cast<size_t>(a)], cfg.conv_kernel, cfg.conv_stride,
                                   0, "classifier conv layer " + std::to_string(l));
        tr.spatial.push_back(cur);
    }
    tr.feat_dim = cfg.conv_channels.back() * cur[0] * cur[1] * cur[2];
    return tr;
}

std::vector<nets::ParamSpec> clf_specs(const ClfConfig& cfg, int d, int h, int w) {
    const ClfTrace tr = clf_trace(cfg, d, h, w);
    std::vector<nets::ParamSpec> specs;
    int ci = 1;
    const int k = cfg.conv_kernel;
    for (size_t l = 0; l < cfg.conv_channels.size(); ++l) {
        const int co = cfg.conv_channels[l];
        specs.push_back({"clf.conv" + std::to_string(l) + ".w", {co, ci, k, k, k}, ci * k * k * k});
        specs.push_back({"clf.conv" + std::to_string(l) + ".b", {co}, 0});
        ci = co;
    }
    specs.push_back({"clf.mlp.w", {tr.feat_dim, cfg.mlp_width}, tr.feat_dim});
    specs.push_back({"clf.mlp.b", {1, cfg.mlp_width}, 0});
    specs.push_back({"clf.out.w", {cfg.mlp_width, 1}, cfg.mlp_width});
    specs.push_back({"clf.out.b", {1, 1}, 0});
    return specs;
}

ad::Var<float> clf_forward(const nets::ParamStore<float>& ps, const ClfConfig& cfg, int t,
                           ad::Var<float> x) {
    ad::Var<float> cur = cfg.pool > 1 ? ad::avg_pool3d(x, cfg.pool) : x;
    for (size_t l = 0; l < cfg.conv_channels.size(); ++l) {
        const std::string base = "clf.conv" + std::to_string(l);
        cur = ad::leaky_relu(ad::conv3d(cur, ps.at(base + ".w"), ps.at(base + ".b"),
                                        cfg.conv_stride, 0));
    }
    const int feat = static_cast<int>(cur->val.size() / t);
    cur = ad::mean_over_rows(ad::reshape(cur, {t, feat}));
    cur = ad::leaky_relu(ad::linear(cur, ps.at("clf.mlp.w"), ps.at("clf.mlp.b")));
    return ad::sigmoid_op(ad::linear(cur, ps.at("clf.out.w"), ps.at("clf.out.b")));
}

double bce(double target, double p) {
    const double eps = train::kProbClampEps;
    const double q = std::min(std::max(p, eps), 1.0 - eps);
    return -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
}

void check_labeled(const std::vector<VolumeSequence>& data, const char* what) {
    if (data.empty()) throw ValidationError(std::string(what) + " set is empty");
    for (const auto& s : data)
        if (!s.label) throw ValidationError(std::string(what) + " sequence '" + s.subject_id +
                                            "' is unlabeled");
}

double validation_ce(const nets::ParamStore<float>& ps, const ClfConfig& cfg,
                     const std::vector<VolumeSequence>& val) {
    ad::NoGradGuard ng;
    double acc = 0;
    for (const auto& s : val) {
        ad::Var<float> p = clf_forward(ps, cfg, s.t, ad::make_const(nets::seq_to_tensor(s)));
        acc += bce(*s.label == Label::ASD ? 1.0 : 0.0, p->val.v[0]);
    }
    return acc / static_cast<double>(val.size());
}

} // namespace

double Classifier::predict(const VolumeSequence& seq) const {
    if (seq.t != t || seq.d != d || seq.h != h || seq.w != w)
        throw ValidationError("classifier was trained for [" + std::to_string(t) + "," +
                              std::to_string(d) + "," + std::to_string(h) + "," +
                              std::to_string(w) + "] sequences");
    ad::NoGradGuard ng;
    ad::Var<float> p = clf_forward(params, cfg, seq.t, ad::make_const(nets::seq_to_tensor(seq)));
    return p->val.v[0];
}

Classifier train_classifier(const std::vector<VolumeSequence>& train_set,
                            const std::vector<VolumeSequence>& val_set, const ClfConfig& cfg,
                            uint64_t seed) {
    check_labeled(train_set, "training");
    check_labeled(val_set, "validation");
    const auto& f = train_set.front();

    Classifier clf;
    clf.cfg = cfg;
    clf.t = f.t;
    clf.d = f.d;
    clf.h = f.h;
    clf.w = f.w;
    clf.params = nets::init_store<float>(clf_specs(cfg, f.d, f.h, f.w), seed);

    train::AdamOptimizer opt(clf.params, [](const std::string&) { return true; },
                             {cfg.lr, 0.9, 0.999, 1e-8});
    Rng order_rng(Rng::mix(seed, 0xc1a55ULL));

    std::vector<std::vector<float>> best;
    double best_ce = std::numeric_limits<double>::infinity();
    auto snapshot = [&]() {
        best.clear();
        for (const auto& v : clf.params.vars) best.push_back(v->val.v);
    };

    std::vector<size_t> idx(train_set.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(idx);
        for (size_t i : idx) {
            const auto& s = train_set[i];
            for (auto& v : clf.params.vars) v->zero_grad();
            ad::Var<float> p =
                clf_forward(clf.params, cfg, s.t, ad::make_const(nets::seq_to_tensor(s)));
            ad::Var<float> loss = *s.label == Label::ASD ? train::neg_log(p) : train::neg_log1m(p);
            if (!std::isfinite(static_cast<double>(loss->val.v[0])))
                throw TrainingDiverged("classifier loss became non-finite at epoch " +
                                       std::to_string(epoch));
            ad::backward(loss);
            opt.step(clf.params);
        }
        const double ce = validation_ce(clf.params, cfg, val_set);
        if (ce < best_ce) {
            best_ce = ce;
            snapshot();
        }
    }
    if (best.empty()) snapshot(); // zero-epoch run keeps the initialization
    for (size_t i = 0; i < clf.params.count(); ++i) clf.params.vars[i]->val.v = best[i];
    return clf;
}

ClassifierReport classification_metrics(const std::vector<Label>& labels,
                                        const std::vector<double>& scores, double threshold) {
    if (labels.size() != scores.size())
        throw ValidationError("classification_metrics: labels and scores differ in length");
    if (labels.empty()) throw ValidationError("classification_metrics: empty input");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0))
            throw ValidationError("classification_metrics: scores must lie in [0,1]");

    ClassifierReport rep;
    rep.n = static_cast<int>(labels.size());
    int tp = 0, fp = 0, fn = 0, correct = 0, npos = 0, nneg = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const bool pos = labels[i] == Label::ASD;
        const bool pred = scores[i] >= threshold;
        rep.ce_loss += bce(pos ? 1.0 : 0.0, scores[i]);
        if (pred == pos) ++correct;
        if (pred && pos) ++tp;
        if (pred && !pos) ++fp;
        if (!pred && pos) ++fn;
        (pos ? npos : nneg)++;
    }
    rep.ce_loss /= static_cast<double>(labels.size());
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    const double prec = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    rep.f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;

    if (npos == 0 || nneg == 0) {
        std::cerr << "[metrics] AUC undefined: labels contain a single class\n";
        rep.auc.reset();
        return rep;
    }
    double wins = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != Label::ASD) continue;
        for (size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] == Label::ASD) continue;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    rep.auc = wins / (static_cast<double>(npos) * nneg);
    return rep;
}

std::vector<VolumeSequence> augment_gaussian(const std::vector<VolumeSequence>& dataset,
                                             double sigma, int copies, uint64_t seed) {
    if (sigma < 0) throw ValidationError("augment_gaussian: sigma must be >= 0");
    if (copies < 0) throw ValidationError("augment_gaussian: copies must be >= 0");
    std::vector<VolumeSequence> out = dataset;
    for (int c = 0; c < copies; ++c) {
        for (size_t i = 0; i < dataset.size(); ++i) {
            VolumeSequence s = dataset[i];
            Rng rng(Rng::mix(seed, static_cast<uint64_t>(c) * dataset.size() + i));
            for (auto& v : s.data) v += static_cast<float>(rng.normal() * sigma);
            s.subject_id += "-noise" + std::to_string(c + 1);
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

std::vector<VolumeSequence> build_arm(const std::vector<VolumeSequence>& train,
                                      const std::string& name, const SynthFn& synth,
                                      int target_size, uint64_t seed) {
    const int n = static_cast<int>(train.size());
    const int need = target_size - n;
    if (need == 0 || name == "none") return train;
    std::vector<VolumeSequence> out = train;
    if (name == "gaussian") {
        const int copies = (need + n - 1) / n;
        auto aug = augment_gaussian(train, 0.1, copies, seed);
        out.assign(aug.begin(), aug.begin() + target_size);
        return out;
    }
    const int asd_n = (need + 1) / 2, hc_n = need / 2;
    auto synth_set = synth(std::max(asd_n, hc_n), seed);
    int took_asd = 0, took_hc = 0;
    for (auto& s : synth_set) {
        if (*s.label == Label::ASD && took_asd < asd_n) {
            out.push_back(std::move(s));
            ++took_asd;
        } else if (*s.label == Label::HC && took_hc < hc_n) {
            out.push_back(std::move(s));
            ++took_hc;
        }
    }
    if (took_asd != asd_n || took_hc != hc_n)
        throw ValidationError("augmentation arm '" + name +
                              "': generator returned too few sequences");
    return out;
}

} // namespace

std::vector<ClassifierReport> augmentation_experiment(
    const std::vector<VolumeSequence>& train, const std::vector<VolumeSequence>& val,
    const std::vector<VolumeSequence>& test,
    const std::vector<std::pair<std::string, SynthFn>>& generators, int target_size,
    const ClfConfig& cfg, uint64_t seed) {
    check_labeled(train, "training");
    check_labeled(val, "validation");
    check_labeled(test, "test");
    if (target_size < static_cast<int>(train.size()))
        throw ValidationError("augmentation_experiment: target_size below the training size");

    std::vector<std::pair<std::string, SynthFn>> arms;
    arms.emplace_back("none", nullptr);
    arms.emplace_back("gaussian", nullptr);
    for (const auto& g : generators) arms.push_back(g);

    std::vector<ClassifierReport> reports;
    for (size_t a = 0; a < arms.size(); ++a) {
        const auto& [name, synth] = arms[a];
        if (a >= 2 && !synth) {
            std::cerr << "[augment] arm '" << name << "' has no trained generator, skipping\n";
            continue;
        }
        const auto arm_train = build_arm(train, name, synth, target_size, Rng::mix(seed, a));
        Classifier clf = train_classifier(arm_train, val, cfg, seed);
        std::vector<Label> labels;
        std::vector<double> scores;
        for (const auto& s : test) {
            labels.push_back(*s.label);
            scores.push_back(clf.predict(s));
        }
        ClassifierReport rep = classification_metrics(labels, scores);
        rep.tag = name;
        reports.push_back(std::move(rep));
    }
    return reports;
}

void write_classifier_csv(const std::string& path, const std::vector<ClassifierReport>& reports) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write classifier CSV '" + path + "'");
    os << "augmentation,ce_loss,accuracy,f1,auc,n_test\n";
    char buf[256];
    for (const auto& r : reports) {
        if (r.auc)
            std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%d\n", r.tag.c_str(),
                          r.ce_loss, r.accuracy, r.f1, *r.auc, r.n);
        else
            std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,,%d\n", r.tag.c_str(), r.ce_loss,
                          r.accuracy, r.f1, r.n);
        os << buf;
    }
    if (!os) throw IoError("failed writing classifier CSV '" + path + "'");
}

} // namespace fmrigen::eval
