#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "fmrigen/core/normalize.hpp"
#include "fmrigen/core/phantom.hpp"
#include "fmrigen/train/losses.hpp"
#include "fmrigen/train/trainer.hpp"

namespace ad = fmrigen::ad;
namespace nets = fmrigen::nets;
namespace train = fmrigen::train;
namespace fs = std::filesystem;
using fmrigen::Rng;
using fmrigen::TrainingDiverged;
using fmrigen::ValidationError;
using fmrigen::core::Label;
using fmrigen::core::VolumeSequence;
using nets::ArchConfig;
using nets::TemporalKind;

namespace {

ArchConfig tiny_arch(TemporalKind k = TemporalKind::CONV1D) {
    ArchConfig c;
    c.t = 4;
    c.d = c.h = c.w = 8;
    c.encoder_conv = {{2, 2, 2}, {2, 2, 4}};
    c.disc_conv = {{2, 2, 2}, {2, 1, 4}};
    c.z_dim = 8;
    c.temporal_kind = k;
    c.conv1d_kernel = 2;
    c.conv1d_stride = 2;
    c.disc_mlp = {8};
    c.code_mlp = {8};
    return c;
}

std::vector<VolumeSequence> tiny_dataset(const ArchConfig& c, int n, uint64_t seed) {
    std::vector<VolumeSequence> out;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        VolumeSequence s;
        s.t = c.t;
        s.d = c.d;
        s.h = c.h;
        s.w = c.w;
        s.data.resize(static_cast<size_t>(c.t) * c.d * c.h * c.w);
        for (auto& v : s.data) v = static_cast<float>(rng.uniform(-0.8, 0.8));
        s.label = i % 2 == 0 ? Label::ASD : Label::HC;
        s.subject_id = "tiny_" + std::to_string(i);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::vector<float>> snapshot(const nets::ParamStore<float>& ps) {
    std::vector<std::vector<float>> out;
    for (const auto& v : ps.vars) out.push_back(v->val.v);
    return out;
}

ad::Var<double> prob_leaf(double p) {
    return ad::make_leaf(ad::Tensor<double>({1, 1}, {p}), true);
}

fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "fmrigen_train_tests";
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("loss values at the analytic spot points") {
    auto at = [](double dr, double drec, double df, double cr, double crand, double mae,
                 double lambda) {
        ad::NoGradGuard ng;
        auto l = train::alpha_gan_losses(ad::make_const(ad::Tensor<double>({1, 1}, {dr})),
                                         ad::make_const(ad::Tensor<double>({1, 1}, {drec})),
                                         ad::make_const(ad::Tensor<double>({1, 1}, {df})),
                                         ad::make_const(ad::Tensor<double>({1, 1}, {cr})),
                                         ad::make_const(ad::Tensor<double>({1, 1}, {crand})),
                                         ad::make_const(ad::Tensor<double>({1, 1}, {mae})),
                                         lambda);
        return std::array<double, 3>{l.eg->val.v[0], l.d->val.v[0], l.c->val.v[0]};
    };

    auto mid = at(0.5, 0.5, 0.5, 0.5, 0.5, 0.2, 10.0);
    CHECK(mid[0] == doctest::Approx(4.0794415416798357).epsilon(1e-12));
    CHECK(mid[1] == doctest::Approx(2.0794415416798357).epsilon(1e-12));
    CHECK(mid[2] == doctest::Approx(1.3862943611198906).epsilon(1e-12));

    // The perfect-discriminator limit: clamping keeps everything finite and
    // the satisfied objectives sit at ~0.
    const double e = 1e-7;
    auto lim = at(1 - e, e, e, 1 - e, e, 0.0, 10.0);
    CHECK(lim[1] == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(lim[2] == doctest::Approx(0.0).epsilon(1e-5));

    // Probabilities at the extremes stay finite thanks to the clamp.
    auto hard = at(0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 10.0);
    for (double v : hard) CHECK(std::isfinite(v));
}

TEST_CASE("loss gradients match the closed forms") {
    for (double p : {0.3, 0.5, 0.9}) {
        CAPTURE(p);
        auto d_real = prob_leaf(p), d_recon = prob_leaf(p), d_fake = prob_leaf(p),
             c_real = prob_leaf(p), c_rand = prob_leaf(p), mae = prob_leaf(0.4);
        const double lambda = 10.0;
        auto l = train::alpha_gan_losses(d_real, d_recon, d_fake, c_real, c_rand, mae, lambda);

        ad::backward(l.eg);
        CHECK(mae->ensure_grad().v[0] == doctest::Approx(lambda).epsilon(1e-9));
        CHECK(d_recon->ensure_grad().v[0] == doctest::Approx(-1.0 / p).epsilon(1e-9));
        CHECK(d_fake->ensure_grad().v[0] == doctest::Approx(-1.0 / p).epsilon(1e-9));
        CHECK(c_real->ensure_grad().v[0] == doctest::Approx(1.0 / (1.0 - p)).epsilon(1e-9));
        CHECK(d_real->ensure_grad().v[0] == 0.0);

        for (auto& v : {d_real, d_recon, d_fake, c_real, c_rand, mae}) v->zero_grad();
        ad::backward(l.d);
        CHECK(d_real->ensure_grad().v[0] == doctest::Approx(-1.0 / p).epsilon(1e-9));
        CHECK(d_recon->ensure_grad().v[0] == doctest::Approx(1.0 / (1.0 - p)).epsilon(1e-9));
        CHECK(d_fake->ensure_grad().v[0] == doctest::Approx(1.0 / (1.0 - p)).epsilon(1e-9));

        for (auto& v : {d_real, d_recon, d_fake, c_real, c_rand, mae}) v->zero_grad();
        ad::backward(l.c);
        CHECK(c_real->ensure_grad().v[0] == doctest::Approx(-1.0 / p).epsilon(1e-9));
        CHECK(c_rand->ensure_grad().v[0] == doctest::Approx(1.0 / (1.0 - p)).epsilon(1e-9));
    }
}

TEST_CASE("adam: zero gradient, first-step size, and scalar quadratic descent") {
    train::AdamParams hp;
    hp.lr = 1e-3;
    ad::Tensor<float> p({1}, {0.7f});
    train::AdamState st{ad::Tensor<float>({1}), ad::Tensor<float>({1})};
    train::adam_step(p, ad::Tensor<float>({1}, {0.0f}), st, hp, 1);
    CHECK(p.v[0] == 0.7f);

    p.v[0] = 0.7f;
    st = {ad::Tensor<float>({1}), ad::Tensor<float>({1})};
    train::adam_step(p, ad::Tensor<float>({1}, {1.0f}), st, hp, 1);
    CHECK(p.v[0] == doctest::Approx(0.7 - 1e-3).epsilon(1e-6));

    train::AdamParams quad;
    quad.lr = 0.1;
    ad::Tensor<float> w({1}, {1.0f});
    train::AdamState qst{ad::Tensor<float>({1}), ad::Tensor<float>({1})};
    for (int t = 1; t <= 100; ++t)
        train::adam_step(w, ad::Tensor<float>({1}, {2.0f * w.v[0]}), qst, quad, t);
    CHECK(std::abs(w.v[0]) < 0.1f);
}

TEST_CASE("optimizer groups partition the parameters and updates stay isolated") {
    ArchConfig c = tiny_arch();
    auto ps = nets::init_params<float>(c, 11);
    auto in_eg = [](const std::string& n) {
        return n.rfind("enc.", 0) == 0 || n.rfind("gen.", 0) == 0;
    };
    auto in_d = [](const std::string& n) { return n.rfind("disc.", 0) == 0; };
    auto in_c = [](const std::string& n) { return n.rfind("code.", 0) == 0; };
    train::AdamOptimizer oe(ps, in_eg, {}), od(ps, in_d, {}), oc(ps, in_c, {});
    CHECK(oe.indices().size() + od.indices().size() + oc.indices().size() == ps.count());

    // Substep 1 in miniature: loss_eg's graph reaches D and C parameters, but
    // stepping the encoder-generator optimizer must leave them untouched.
    ad::Tensor<float> xt({c.t, 1, c.d, c.h, c.w});
    Rng r(12);
    for (auto& e : xt.v) e = static_cast<float>(r.uniform(-1.0, 1.0));
    ad::Var<float> x = ad::make_const(std::move(xt));
    ad::Var<float> z = nets::encode(ps, c, x);
    ad::Var<float> recon = nets::generate(ps, c, z, Label::ASD);
    ad::Var<float> loss =
        ad::add(ad::scale(train::mean_abs_error(x, recon), 10.0),
                ad::add(train::neg_log(nets::discriminate(ps, c, recon)),
                        train::neg_log1m(nets::code_discriminate(ps, c, z))));
    ad::backward(loss);
    auto before = snapshot(ps);
    oe.step(ps);
    bool eg_moved = false;
    for (size_t i = 0; i < ps.count(); ++i) {
        if (in_eg(ps.specs[i].name)) {
            if (ps.vars[i]->val.v != before[i]) eg_moved = true;
        } else {
            CHECK(ps.vars[i]->val.v == before[i]);
        }
    }
    CHECK(eg_moved);
}

TEST_CASE("prior sampling is deterministic with the right moments") {
    ad::Tensor<float> a = train::sample_prior(100, 40, 7);
    ad::Tensor<float> b = train::sample_prior(100, 40, 7);
    CHECK(a.v == b.v);

    ad::Tensor<float> big = train::sample_prior(1000, 100, 8);
    REQUIRE(big.size() == 100000);
    double mean = 0;
    for (float v : big.v) mean += v;
    mean /= static_cast<double>(big.size());
    CHECK(std::abs(mean) < 4.0 / std::sqrt(100000.0));
    double var = 0;
    for (float v : big.v) var += (v - mean) * (v - mean);
    var /= static_cast<double>(big.size() - 1);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("zero-epoch runs change nothing") {
    ArchConfig c = tiny_arch();
    train::TrainConfig tc;
    tc.seed = 21;
    train::Trainer tr(c, tc);
    auto before = snapshot(tr.params());
    auto data = tiny_dataset(c, 3, 22);
    CHECK(tr.pretrain(data, 0).rows.empty());
    CHECK(tr.train_gan(data, 0).rows.empty());
    auto after = snapshot(tr.params());
    CHECK(before == after);
}

TEST_CASE("pretraining is deterministic and halves the reconstruction error") {
    fmrigen::core::PhantomSpec spec;
    spec.n_subjects_per_class = 8; // 16 subjects at desk scale
    spec.seed = 31;
    auto phantom = fmrigen::core::make_phantom(spec);
    std::vector<VolumeSequence> data;
    for (auto& s : phantom.subjects) {
        fmrigen::core::normalize_sequence(s);
        data.push_back(s);
    }

    ArchConfig c; // desk-scale default, 24 frames of 16^3
    train::TrainConfig tc;
    tc.seed = 32;
    tc.lr_eg = 1e-3;

    train::Trainer tr(c, tc);
    const int epochs = 12; // 192 steps of 16 subjects each
    train::TrainHistory h = tr.pretrain(data, epochs);
    REQUIRE(h.rows.size() == 192);
    for (const auto& r : h.rows) CHECK(std::isfinite(r.loss_eg));
    double first_epoch = 0, last_epoch = 0;
    for (int i = 0; i < 16; ++i) {
        first_epoch += h.rows[static_cast<size_t>(i)].loss_eg;
        last_epoch += h.rows[h.rows.size() - 16 + static_cast<size_t>(i)].loss_eg;
    }
    CHECK(last_epoch < 0.5 * first_epoch);

    train::Trainer tr2(c, tc);
    train::TrainHistory h2 = tr2.pretrain(data, epochs);
    for (size_t i = 0; i < tr.params().count(); ++i)
        CHECK(tr.params().vars[i]->val.v == tr2.params().vars[i]->val.v);
    REQUIRE(h2.rows.size() == h.rows.size());
    for (size_t i = 0; i < h.rows.size(); ++i) {
        CHECK(h.rows[i].loss_eg == h2.rows[i].loss_eg);
        CHECK(h.rows[i].mae == h2.rows[i].mae);
    }
}

TEST_CASE("a short adversarial run keeps every logged loss finite") {
    ArchConfig c = tiny_arch();
    train::TrainConfig tc;
    tc.seed = 41;
    train::Trainer tr(c, tc);
    auto data = tiny_dataset(c, 5, 42);
    tr.pretrain(data, 2);
    train::TrainHistory h = tr.train_gan(data, 10); // 50 steps
    REQUIRE(h.rows.size() == 50);
    for (const auto& r : h.rows) {
        CHECK(std::isfinite(r.loss_eg));
        CHECK(std::isfinite(r.loss_d));
        CHECK(std::isfinite(r.loss_c));
        CHECK(std::isfinite(r.mae));
    }
    ad::NoGradGuard ng;
    ad::Var<float> p =
        nets::discriminate(tr.params(), c, ad::make_const(nets::seq_to_tensor(data[0])));
    CHECK(p->val.v[0] > 0.0f);
    CHECK(p->val.v[0] < 1.0f);
}

TEST_CASE("with discriminators frozen, loss_eg moves with the reconstruction error") {
    ArchConfig c = tiny_arch();
    auto ps = nets::init_params<float>(c, 51);
    // A target with strong low-frequency structure that a small generator can
    // actually approach, so the MAE term has room to fall.
    ad::Tensor<float> xt({c.t, 1, c.d, c.h, c.w});
    Rng xr(52);
    for (auto& e : xt.v) e = static_cast<float>(0.5 + xr.uniform(-0.05, 0.05));
    ad::Var<float> x = ad::make_const(std::move(xt));
    auto in_eg = [](const std::string& n) {
        return n.rfind("enc.", 0) == 0 || n.rfind("gen.", 0) == 0;
    };
    train::AdamParams hp;
    hp.lr = 1e-3;
    train::AdamOptimizer oe(ps, in_eg, hp);

    const double lambda = 100.0;
    std::vector<double> loss_hist, mae_hist;
    for (int step = 0; step < 150; ++step) {
        for (auto& v : ps.vars) v->zero_grad();
        ad::Var<float> z = nets::encode(ps, c, x);
        ad::Var<float> recon = nets::generate(ps, c, z, Label::ASD);
        ad::Var<float> mae = train::mean_abs_error(x, recon);
        ad::Var<float> loss =
            ad::add(ad::scale(mae, lambda),
                    ad::add(ad::add(train::neg_log(nets::discriminate(ps, c, recon)),
                                    train::neg_log(nets::discriminate(
                                        ps, c, nets::generate(ps, c, z, Label::HC)))),
                            train::neg_log1m(nets::code_discriminate(ps, c, z))));
        loss_hist.push_back(loss->val.v[0]);
        mae_hist.push_back(mae->val.v[0]);
        ad::backward(loss);
        oe.step(ps);
    }
    // The frozen discriminators contribute a near-constant term, so the loss
    // drop must be dominated by the weighted MAE drop.
    const double mae_gain = lambda * (mae_hist.front() - mae_hist.back());
    CHECK(mae_hist.back() < mae_hist.front());
    std::vector<double> adv;
    for (size_t i = 0; i < loss_hist.size(); ++i)
        adv.push_back(loss_hist[i] - lambda * mae_hist[i]);
    double drift = 0;
    for (double a : adv) drift = std::max(drift, std::abs(a - adv.front()));
    CHECK(drift < 0.2 * mae_gain);
    CHECK(loss_hist.back() < loss_hist.front());
}

TEST_CASE("divergence raises a diagnostic instead of logging non-finite rows") {
    ArchConfig c = tiny_arch();
    train::TrainConfig tc;
    tc.seed = 61;
    train::Trainer tr(c, tc);
    auto data = tiny_dataset(c, 2, 62);
    tr.params().at("enc.out.w")->val.fill(std::numeric_limits<float>::quiet_NaN());
    CHECK_THROWS_WITH_AS(tr.pretrain(data, 1), doctest::Contains("step 1"), TrainingDiverged);
    CHECK_THROWS_AS(tr.train_gan(data, 1), TrainingDiverged);
}

TEST_CASE("synthesis emits balanced labeled sequences in range") {
    ArchConfig c = tiny_arch();
    auto ps = nets::init_params<float>(c, 71);
    CHECK(train::synthesize_dataset(ps, c, 0, 72).empty());
    auto out = train::synthesize_dataset(ps, c, 100, 72);
    REQUIRE(out.size() == 200);
    int asd = 0, hc = 0;
    for (const auto& s : out) {
        REQUIRE(s.label.has_value());
        (*s.label == Label::ASD ? asd : hc)++;
        s.validate();
        for (float v : s.data) {
            CHECK(v >= -1.0f);
            CHECK(v <= 1.0f);
        }
    }
    CHECK(asd == 100);
    CHECK(hc == 100);
    CHECK(out[0].subject_id == "synth-ASD_000");
    CHECK(out[199].subject_id == "synth-HC_099");

    auto again = train::synthesize_dataset(ps, c, 100, 72);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i].data == again[i].data);
}

TEST_CASE("checkpoints round-trip bit-exactly and support exact resume") {
    ArchConfig c = tiny_arch(TemporalKind::LSTM);
    train::TrainConfig tc;
    tc.seed = 81;
    auto data = tiny_dataset(c, 5, 82);
    const std::string stem = (temp_dir() / "ckpt_roundtrip").string();

    train::Trainer cont(c, tc);
    cont.pretrain(data, 1);
    cont.train_gan(data, 1); // 5 steps

    train::Trainer half(c, tc);
    half.pretrain(data, 1);
    half.save_checkpoint(stem);

    train::Trainer restored = train::Trainer::load_checkpoint(stem);
    CHECK(restored.pretrain_step() == half.pretrain_step());
    for (size_t i = 0; i < half.params().count(); ++i)
        CHECK(restored.params().vars[i]->val.v == half.params().vars[i]->val.v);

    restored.train_gan(data, 1);
    for (size_t i = 0; i < cont.params().count(); ++i)
        CHECK(restored.params().vars[i]->val.v == cont.params().vars[i]->val.v);
}

TEST_CASE("mid-stage resume matches the uninterrupted run") {
    ArchConfig c = tiny_arch();
    train::TrainConfig tc;
    tc.seed = 91;
    auto data = tiny_dataset(c, 5, 92);
    const std::string stem = (temp_dir() / "ckpt_mid").string();

    train::Trainer cont(c, tc);
    cont.train_gan(data, 2); // 10 steps straight through

    train::Trainer part(c, tc);
    part.train_gan(data, 1); // 5 steps
    part.save_checkpoint(stem);
    train::Trainer resumed = train::Trainer::load_checkpoint(stem);
    resumed.train_gan(data, 1); // 5 more

    for (size_t i = 0; i < cont.params().count(); ++i)
        CHECK(resumed.params().vars[i]->val.v == cont.params().vars[i]->val.v);
}

TEST_CASE("loading against a mismatched architecture names the first bad array") {
    ArchConfig c = tiny_arch();
    train::TrainConfig tc;
    tc.seed = 101;
    train::Trainer tr(c, tc);
    const std::string stem = (temp_dir() / "ckpt_mismatch").string();
    tr.save_checkpoint(stem);

    ArchConfig other = c;
    other.encoder_conv[0].channels = 3;
    CHECK_THROWS_WITH_AS(train::Trainer::load_checkpoint(stem, other),
                         doctest::Contains("enc.conv0.w"), ValidationError);

    // Matching architecture passes the same gate.
    train::Trainer ok = train::Trainer::load_checkpoint(stem, c);
    CHECK(ok.params().count() == tr.params().count());
}

TEST_CASE("history CSV round-trips every recorded field") {
    train::TrainHistory h;
    h.rows.push_back({1, 4.5, 2.25, 1.125, 0.33203125, 0.5});
    h.rows.push_back({2, 3.875, 2.0, 1.0, 0.25, 1.0});
    const std::string path = (temp_dir() / "hist.csv").string();
    train::write_history_csv(path, h);
    train::TrainHistory back = train::read_history_csv(path);
    REQUIRE(back.rows.size() == 2);
    for (size_t i = 0; i < h.rows.size(); ++i) {
        CHECK(back.rows[i].step == h.rows[i].step);
        CHECK(back.rows[i].loss_eg == h.rows[i].loss_eg);
        CHECK(back.rows[i].loss_d == h.rows[i].loss_d);
        CHECK(back.rows[i].loss_c == h.rows[i].loss_c);
        CHECK(back.rows[i].mae == h.rows[i].mae);
    }
}

TEST_CASE("train config validation") {
    train::TrainConfig tc;
    tc.lr_d = 0.0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = train::TrainConfig{};
    tc.lambda = -1.0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = train::TrainConfig{};
    tc.batch_size = 0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = train::TrainConfig{};
    CHECK_NOTHROW(tc.validate());

    ArchConfig c = tiny_arch();
    train::Trainer tr(c, train::TrainConfig{});
    std::vector<VolumeSequence> empty;
    CHECK_THROWS_AS(tr.pretrain(empty, 1), ValidationError);
    auto unlabeled = tiny_dataset(c, 2, 1);
    unlabeled[1].label.reset();
    CHECK_THROWS_AS(tr.train_gan(unlabeled, 1), ValidationError);
}
