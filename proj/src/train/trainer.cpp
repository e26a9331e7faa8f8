#include "fmrigen/train/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fmrigen/nets/serialize.hpp"
#include "fmrigen/train/losses.hpp"
#include "fmrigen/util/error.hpp"

namespace fmrigen::train {

namespace fs = std::filesystem;
using nlohmann::json;
using core::Label;
using core::VolumeSequence;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

void TrainConfig::validate() const {
    if (pretrain_epochs < 0 || gan_epochs < 0)
        throw ValidationError("train config: epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (lr_eg <= 0 || lr_d <= 0 || lr_c <= 0)
        throw ValidationError("train config: learning rates must be > 0");
    if (lambda < 0) throw ValidationError("train config: lambda must be >= 0");
    if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
        throw ValidationError("train config: betas must lie in (0,1)");
    if (eps <= 0) throw ValidationError("train config: eps must be > 0");
    if (checkpoint_every < 0) throw ValidationError("train config: checkpoint_every must be >= 0");
}

void write_history_csv(const std::string& path, const TrainHistory& h) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write history CSV '" + path + "'");
    os << "step,loss_eg,loss_d,loss_c,mae,seconds\n";
    char buf[256];
    for (const auto& r : h.rows) {
        std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.6f\n",
                      static_cast<long long>(r.step), r.loss_eg, r.loss_d, r.loss_c, r.mae,
                      r.seconds);
        os << buf;
    }
    if (!os) throw IoError("failed writing history CSV '" + path + "'");
}

TrainHistory read_history_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read history CSV '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line.rfind("step,", 0) != 0)
        throw FormatError("history CSV '" + path + "' lacks the expected header");
    TrainHistory h;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        HistoryRow r;
        long long step = 0;
        if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%lf", &step, &r.loss_eg, &r.loss_d,
                        &r.loss_c, &r.mae, &r.seconds) != 6)
            throw FormatError("history CSV '" + path + "': malformed row '" + line + "'");
        r.step = step;
        h.rows.push_back(r);
    }
    return h;
}

ad::Tensor<float> sample_prior(int n, int z_dim, uint64_t seed) {
    if (n < 1 || z_dim < 1) throw ValidationError("sample_prior: n and z_dim must be >= 1");
    ad::Tensor<float> z({n, z_dim});
    Rng rng(seed);
    for (auto& e : z.v) e = static_cast<float>(rng.normal());
    return z;
}

namespace {

bool starts_with(const std::string& s, const char* p) { return s.rfind(p, 0) == 0; }

bool in_eg_group(const std::string& n) { return starts_with(n, "enc.") || starts_with(n, "gen."); }
bool in_d_group(const std::string& n) { return starts_with(n, "disc."); }
bool in_c_group(const std::string& n) { return starts_with(n, "code."); }

double value_of(const ad::Var<float>& v) { return v->val.v[0]; }

// Per-sequence shape/label screening with subject-aware messages.
void check_dataset(const std::vector<VolumeSequence>& data, const nets::ArchConfig& arch) {
    if (data.empty()) throw ValidationError("training dataset is empty");
    for (const auto& s : data) {
        if (s.t != arch.t || s.d != arch.d || s.h != arch.h || s.w != arch.w)
            throw ValidationError("sequence '" + s.subject_id + "' has dims [" +
                                  std::to_string(s.t) + "," + std::to_string(s.d) + "," +
                                  std::to_string(s.h) + "," + std::to_string(s.w) +
                                  "] but the architecture expects [" + std::to_string(arch.t) +
                                  "," + std::to_string(arch.d) + "," + std::to_string(arch.h) +
                                  "," + std::to_string(arch.w) + "]");
        if (!s.label) throw ValidationError("sequence '" + s.subject_id + "' is unlabeled");
    }
}

int64_t steps_per_epoch(size_t n, int batch) {
    return static_cast<int64_t>((n + static_cast<size_t>(batch) - 1) / static_cast<size_t>(batch));
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"pretrain_epochs", c.pretrain_epochs},
                {"gan_epochs", c.gan_epochs},
                {"batch_size", c.batch_size},
                {"lr_eg", c.lr_eg},
                {"lr_d", c.lr_d},
                {"lr_c", c.lr_c},
                {"lambda", c.lambda},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"eps", c.eps},
                {"seed", c.seed},
                {"checkpoint_every", c.checkpoint_every},
                {"checkpoint_dir", c.checkpoint_dir}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    try {
        c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
        c.gan_epochs = j.at("gan_epochs").get<int>();
        c.batch_size = j.at("batch_size").get<int>();
        c.lr_eg = j.at("lr_eg").get<double>();
        c.lr_d = j.at("lr_d").get<double>();
        c.lr_c = j.at("lr_c").get<double>();
        c.lambda = j.at("lambda").get<double>();
        c.beta1 = j.at("beta1").get<double>();
        c.beta2 = j.at("beta2").get<double>();
        c.eps = j.at("eps").get<double>();
        c.seed = j.at("seed").get<uint64_t>();
        c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
        c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint train config: ") + e.what());
    }
    return c;
}

double elapsed_s(std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

} // namespace

Trainer::Trainer(const nets::ArchConfig& arch, const TrainConfig& cfg)
    : arch_(arch),
      cfg_(cfg),
      params_((cfg.validate(), nets::init_params<float>(arch, cfg.seed))),
      opt_pre_(params_, in_eg_group, {cfg.lr_eg, cfg.beta1, cfg.beta2, cfg.eps}),
      opt_eg_(params_, in_eg_group, {cfg.lr_eg, cfg.beta1, cfg.beta2, cfg.eps}),
      opt_d_(params_, in_d_group, {cfg.lr_d, cfg.beta1, cfg.beta2, cfg.eps}),
      opt_c_(params_, in_c_group, {cfg.lr_c, cfg.beta1, cfg.beta2, cfg.eps}),
      rng_(Rng::mix(cfg.seed, 0x747261696eULL)) {}

void Trainer::zero_all_grads() {
    for (auto& v : params_.vars) v->zero_grad();
}

void Trainer::maybe_checkpoint(const std::string& stage, int64_t step) {
    if (cfg_.checkpoint_dir.empty() || cfg_.checkpoint_every <= 0) return;
    if (step % cfg_.checkpoint_every != 0) return;
    fs::create_directories(cfg_.checkpoint_dir);
    const std::string stem = cfg_.checkpoint_dir + "/ckpt_" + stage + "_" + std::to_string(step);
    save_checkpoint(stem);
}

std::string Trainer::param_norms() const {
    double sq[4] = {0, 0, 0, 0};
    for (size_t i = 0; i < params_.count(); ++i) {
        const auto& n = params_.specs[i].name;
        const int g = starts_with(n, "enc.") ? 0 : starts_with(n, "gen.") ? 1
                                              : starts_with(n, "disc.")  ? 2
                                                                         : 3;
        for (float x : params_.vars[i]->val.v) sq[g] += static_cast<double>(x) * x;
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "param norms enc=%.6g gen=%.6g disc=%.6g code=%.6g",
                  std::sqrt(sq[0]), std::sqrt(sq[1]), std::sqrt(sq[2]), std::sqrt(sq[3]));
    return buf;
}

void Trainer::diverged(const std::string& stage, int64_t step, const std::string& losses) const {
    throw TrainingDiverged(
        "training diverged at " + stage + " step " + std::to_string(step) + ": " + losses + "; " +
        param_norms() +
        (last_checkpoint_.empty() ? "; no checkpoint written yet"
                                  : "; last checkpoint: " + last_checkpoint_));
}

TrainHistory Trainer::pretrain(const std::vector<VolumeSequence>& data, int epochs) {
    if (epochs < 0) throw ValidationError("pretrain: epochs must be >= 0");
    check_dataset(data, arch_);
    TrainHistory hist;
    if (epochs == 0) return hist;
    const auto t0 = std::chrono::steady_clock::now();
    const int64_t per = steps_per_epoch(data.size(), cfg_.batch_size);
    const int64_t total = per * epochs;
    for (int64_t s = 0; s < total; ++s) {
        zero_all_grads();
        ad::Var<float> loss;
        double mae_val = 0;
        for (int b = 0; b < cfg_.batch_size; ++b) {
            const auto& item =
                data[static_cast<size_t>((pretrain_step_ * cfg_.batch_size + b) %
                                         static_cast<int64_t>(data.size()))];
            ad::Var<float> x = ad::make_const(nets::seq_to_tensor(item));
            ad::Var<float> z = nets::encode(params_, arch_, x);
            ad::Var<float> recon = nets::generate(params_, arch_, z, *item.label);
            ad::Var<float> mse = mean_sq_error(x, recon);
            loss = loss ? ad::add(loss, mse) : mse;
            double acc = 0;
            for (int64_t i = 0; i < x->val.size(); ++i)
                acc += std::abs(static_cast<double>(x->val.v[i]) - recon->val.v[i]);
            mae_val += acc / static_cast<double>(x->val.size());
        }
        loss = ad::scale(loss, 1.0 / cfg_.batch_size);
        mae_val /= cfg_.batch_size;
        const double mse_val = value_of(loss);
        if (!std::isfinite(mse_val) || !std::isfinite(mae_val))
            diverged("pretrain", pretrain_step_ + 1, "mse=" + std::to_string(mse_val));
        ad::backward(loss);
        opt_pre_.step(params_);
        ++pretrain_step_;
        hist.rows.push_back({pretrain_step_, mse_val, 0.0, 0.0, mae_val, elapsed_s(t0)});
        maybe_checkpoint("pretrain", pretrain_step_);
    }
    return hist;
}

TrainHistory Trainer::train_gan(const std::vector<VolumeSequence>& data, int epochs) {
    if (epochs < 0) throw ValidationError("train_gan: epochs must be >= 0");
    check_dataset(data, arch_);
    TrainHistory hist;
    if (epochs == 0) return hist;
    const auto t0 = std::chrono::steady_clock::now();
    const int64_t per = steps_per_epoch(data.size(), cfg_.batch_size);
    const int64_t total = per * epochs;
    const int bsz = cfg_.batch_size;
    for (int64_t s = 0; s < total; ++s) {
        // One prior batch and one set of fake labels serve all three substeps.
        ad::Tensor<float> z_rand({bsz, arch_.z_dim});
        for (auto& e : z_rand.v) e = static_cast<float>(rng_.normal());
        std::vector<Label> fake_labels(static_cast<size_t>(bsz));
        for (auto& l : fake_labels) l = rng_.below(2) == 0 ? Label::ASD : Label::HC;

        std::vector<const VolumeSequence*> batch;
        for (int b = 0; b < bsz; ++b)
            batch.push_back(&data[static_cast<size_t>((gan_step_ * bsz + b) %
                                                      static_cast<int64_t>(data.size()))]);
        auto z_row = [&](int b) {
            ad::Tensor<float> row({1, arch_.z_dim});
            std::copy_n(z_rand.data() + static_cast<int64_t>(b) * arch_.z_dim, arch_.z_dim,
                        row.data());
            return ad::make_const(std::move(row));
        };

        // Substep 1: encoder-generator on loss_eg.
        ad::Var<float> loss_eg;
        double mae_val = 0;
        for (int b = 0; b < bsz; ++b) {
            ad::Var<float> x = ad::make_const(nets::seq_to_tensor(*batch[static_cast<size_t>(b)]));
            ad::Var<float> z_real = nets::encode(params_, arch_, x);
            ad::Var<float> recon =
                nets::generate(params_, arch_, z_real, *batch[static_cast<size_t>(b)]->label);
            ad::Var<float> mae = mean_abs_error(x, recon);
            ad::Var<float> d_recon = nets::discriminate(params_, arch_, recon);
            ad::Var<float> x_fake =
                nets::generate(params_, arch_, z_row(b), fake_labels[static_cast<size_t>(b)]);
            ad::Var<float> d_fake = nets::discriminate(params_, arch_, x_fake);
            ad::Var<float> c_real = nets::code_discriminate(params_, arch_, z_real);
            ad::Var<float> item =
                ad::add(ad::scale(mae, cfg_.lambda),
                        ad::add(ad::add(neg_log(d_recon), neg_log(d_fake)), neg_log1m(c_real)));
            loss_eg = loss_eg ? ad::add(loss_eg, item) : item;
            mae_val += value_of(mae);
        }
        loss_eg = ad::scale(loss_eg, 1.0 / bsz);
        mae_val /= bsz;
        const double eg_val = value_of(loss_eg);
        if (!std::isfinite(eg_val))
            diverged("gan", gan_step_ + 1, "loss_eg=" + std::to_string(eg_val));
        ad::backward(loss_eg);
        opt_eg_.step(params_);

        // Reconstructions and fakes for the discriminator substeps come from
        // the just-updated encoder and generator, with no gradient back into
        // them.
        std::vector<ad::Var<float>> x_in, recon_c, fake_c, z_real_c;
        {
            ad::NoGradGuard ng;
            for (int b = 0; b < bsz; ++b) {
                ad::Var<float> x =
                    ad::make_const(nets::seq_to_tensor(*batch[static_cast<size_t>(b)]));
                ad::Var<float> z_real = nets::encode(params_, arch_, x);
                x_in.push_back(x);
                z_real_c.push_back(ad::make_const(z_real->val));
                recon_c.push_back(ad::make_const(
                    nets::generate(params_, arch_, z_real,
                                   *batch[static_cast<size_t>(b)]->label)
                        ->val));
                fake_c.push_back(ad::make_const(
                    nets::generate(params_, arch_, z_row(b), fake_labels[static_cast<size_t>(b)])
                        ->val));
            }
        }

        // Substep 2: discriminator on loss_d.
        zero_all_grads();
        ad::Var<float> loss_d;
        for (int b = 0; b < bsz; ++b) {
            ad::Var<float> d_real =
                nets::discriminate(params_, arch_, x_in[static_cast<size_t>(b)]);
            ad::Var<float> d_recon =
                nets::discriminate(params_, arch_, recon_c[static_cast<size_t>(b)]);
            ad::Var<float> d_fake =
                nets::discriminate(params_, arch_, fake_c[static_cast<size_t>(b)]);
            ad::Var<float> item =
                ad::add(ad::add(neg_log(d_real), neg_log1m(d_recon)), neg_log1m(d_fake));
            loss_d = loss_d ? ad::add(loss_d, item) : item;
        }
        loss_d = ad::scale(loss_d, 1.0 / bsz);
        const double d_val = value_of(loss_d);
        if (!std::isfinite(d_val))
            diverged("gan", gan_step_ + 1, "loss_d=" + std::to_string(d_val));
        ad::backward(loss_d);
        opt_d_.step(params_);

        // Substep 3: code discriminator on loss_c.
        zero_all_grads();
        ad::Var<float> loss_c;
        for (int b = 0; b < bsz; ++b) {
            ad::Var<float> c_real =
                nets::code_discriminate(params_, arch_, z_real_c[static_cast<size_t>(b)]);
            ad::Var<float> c_rand = nets::code_discriminate(params_, arch_, z_row(b));
            ad::Var<float> item = ad::add(neg_log(c_real), neg_log1m(c_rand));
            loss_c = loss_c ? ad::add(loss_c, item) : item;
        }
        loss_c = ad::scale(loss_c, 1.0 / bsz);
        const double c_val = value_of(loss_c);
        if (!std::isfinite(c_val))
            diverged("gan", gan_step_ + 1, "loss_c=" + std::to_string(c_val));
        ad::backward(loss_c);
        opt_c_.step(params_);

        ++gan_step_;
        hist.rows.push_back({gan_step_, eg_val, d_val, c_val, mae_val, elapsed_s(t0)});
        maybe_checkpoint("gan", gan_step_);
    }
    return hist;
}

namespace {

void append_payload(std::vector<float>& out, const ad::Tensor<float>& t) {
    out.insert(out.end(), t.v.begin(), t.v.end());
}

} // namespace

void Trainer::save_checkpoint(const std::string& stem) const {
    json header;
    header["format_version"] = 1;
    header["kind"] = "alpha-gan-checkpoint";
    header["pretrain_step"] = pretrain_step_;
    header["gan_step"] = gan_step_;
    header["arch"] = nets::arch_to_json(arch_);
    header["train"] = train_config_to_json(cfg_);
    header["rng"] = rng_.state();
    json plist = json::array();
    for (const auto& sp : params_.specs) plist.push_back({{"name", sp.name}, {"shape", sp.shape}});
    header["params"] = plist;
    const AdamOptimizer* opts[4] = {&opt_pre_, &opt_eg_, &opt_d_, &opt_c_};
    const char* gnames[4] = {"pre", "eg", "d", "c"};
    json og;
    for (int g = 0; g < 4; ++g) og[gnames[g]] = {{"t", opts[g]->t()}};
    header["optimizers"] = og;

    std::vector<float> payload;
    for (const auto& v : params_.vars) append_payload(payload, v->val);
    for (int g = 0; g < 4; ++g)
        for (size_t s = 0; s < opts[g]->indices().size(); ++s) {
            append_payload(payload, opts[g]->state(s).m);
            append_payload(payload, opts[g]->state(s).v);
        }

    std::ofstream js(stem + ".json");
    if (!js) throw IoError("cannot write checkpoint header '" + stem + ".json'");
    js << header.dump(2) << "\n";
    if (!js) throw IoError("failed writing checkpoint header '" + stem + ".json'");
    js.close();
    std::ofstream bs(stem + ".f32", std::ios::binary);
    if (!bs) throw IoError("cannot write checkpoint payload '" + stem + ".f32'");
    bs.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!bs) throw IoError("failed writing checkpoint payload '" + stem + ".f32'");
}

namespace {

struct HeaderParam {
    std::string name;
    std::vector<int> shape;
};

json read_header(const std::string& stem) {
    std::ifstream is(stem + ".json");
    if (!is) throw IoError("cannot read checkpoint header '" + stem + ".json'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint header '" + stem + ".json': " + e.what());
    }
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
        throw FormatError("checkpoint '" + stem + "': unsupported format_version");
    if (j.value("kind", "") != std::string("alpha-gan-checkpoint"))
        throw FormatError("checkpoint '" + stem + "': not a model checkpoint");
    return j;
}

std::vector<HeaderParam> header_params(const json& j, const std::string& stem) {
    std::vector<HeaderParam> out;
    try {
        for (const auto& e : j.at("params"))
            out.push_back({e.at("name").get<std::string>(), e.at("shape").get<std::vector<int>>()});
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + stem + "': bad parameter list: " + e.what());
    }
    return out;
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

} // namespace

Trainer Trainer::load_checkpoint(const std::string& stem) {
    const json j = read_header(stem);
    nets::ArchConfig arch;
    TrainConfig tcfg;
    try {
        arch = nets::arch_from_json(j.at("arch"));
        tcfg = train_config_from_json(j.at("train"));
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + stem + "': " + e.what());
    }
    Trainer tr(arch, tcfg);

    const auto hps = header_params(j, stem);
    if (hps.size() != tr.params_.count())
        throw FormatError("checkpoint '" + stem + "': parameter count " +
                          std::to_string(hps.size()) + " does not match the stored architecture");
    int64_t total = 0;
    for (size_t i = 0; i < hps.size(); ++i) {
        if (hps[i].name != tr.params_.specs[i].name || hps[i].shape != tr.params_.specs[i].shape)
            throw FormatError("checkpoint '" + stem + "': parameter '" + hps[i].name +
                              "' disagrees with the stored architecture");
        int64_t n = 1;
        for (int d : hps[i].shape) n *= d;
        total += n;
    }
    AdamOptimizer* opts[4] = {&tr.opt_pre_, &tr.opt_eg_, &tr.opt_d_, &tr.opt_c_};
    int64_t moments = 0;
    for (auto* o : opts)
        for (size_t s = 0; s < o->indices().size(); ++s) moments += 2 * o->state(s).m.size();

    std::ifstream bs(stem + ".f32", std::ios::binary);
    if (!bs) throw IoError("cannot read checkpoint payload '" + stem + ".f32'");
    std::vector<float> payload(static_cast<size_t>(total + moments));
    bs.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (bs.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(float)) ||
        bs.peek() != std::ifstream::traits_type::eof())
        throw FormatError("checkpoint payload '" + stem + ".f32' has the wrong size (expected " +
                          std::to_string((total + moments) * sizeof(float)) + " bytes)");

    size_t off = 0;
    auto take = [&](ad::Tensor<float>& t) {
        std::copy_n(payload.data() + off, t.size(), t.data());
        off += static_cast<size_t>(t.size());
    };
    for (auto& v : tr.params_.vars) take(v->val);
    const char* gnames[4] = {"pre", "eg", "d", "c"};
    for (int g = 0; g < 4; ++g) {
        for (size_t s = 0; s < opts[g]->indices().size(); ++s) {
            take(opts[g]->state(s).m);
            take(opts[g]->state(s).v);
        }
        try {
            opts[g]->restore(j.at("optimizers").at(gnames[g]).at("t").get<int64_t>());
        } catch (const json::exception& e) {
            throw FormatError("checkpoint '" + stem + "': optimizer state: " + e.what());
        }
    }
    try {
        tr.rng_.set_state(j.at("rng").get<std::string>());
        tr.pretrain_step_ = j.at("pretrain_step").get<int64_t>();
        tr.gan_step_ = j.at("gan_step").get<int64_t>();
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + stem + "': " + e.what());
    }
    tr.last_checkpoint_ = stem;
    return tr;
}

Trainer Trainer::load_checkpoint(const std::string& stem, const nets::ArchConfig& expect) {
    const json j = read_header(stem);
    const auto hps = header_params(j, stem);
    const auto want = nets::param_specs(expect);
    const size_t n = std::min(hps.size(), want.size());
    for (size_t i = 0; i < n; ++i) {
        if (hps[i].name != want[i].name || hps[i].shape != want[i].shape)
            throw ValidationError("checkpoint parameter '" + hps[i].name + "' " +
                                  shape_str(hps[i].shape) +
                                  " does not match the configured architecture ('" +
                                  want[i].name + "' " + shape_str(want[i].shape) + ")");
    }
    if (hps.size() != want.size())
        throw ValidationError(
            "checkpoint holds " + std::to_string(hps.size()) + " parameter arrays but the " +
            "configured architecture expects " + std::to_string(want.size()) + "; first extra: '" +
            (hps.size() > want.size() ? hps[want.size()].name : want[hps.size()].name) + "'");
    return load_checkpoint(stem);
}

std::vector<VolumeSequence> synthesize_dataset(const nets::ParamStore<float>& params,
                                               const nets::ArchConfig& arch, int n_per_class,
                                               uint64_t seed,
                                               const std::array<double, 3>& voxel_size_mm,
                                               double frame_interval_s) {
    if (n_per_class < 0) throw ValidationError("synthesize_dataset: n_per_class must be >= 0");
    std::vector<VolumeSequence> out;
    if (n_per_class == 0) return out;
    const ad::Tensor<float> zs = sample_prior(2 * n_per_class, arch.z_dim, seed);
    ad::NoGradGuard ng;
    for (int i = 0; i < 2 * n_per_class; ++i) {
        const Label label = i < n_per_class ? Label::ASD : Label::HC;
        ad::Tensor<float> z({1, arch.z_dim});
        std::copy_n(zs.data() + static_cast<int64_t>(i) * arch.z_dim, arch.z_dim, z.data());
        ad::Var<float> vol = nets::generate(params, arch, ad::make_const(std::move(z)), label);
        VolumeSequence seq = nets::tensor_to_seq(vol->val, arch);
        seq.voxel_size_mm = voxel_size_mm;
        seq.frame_interval_s = frame_interval_s;
        seq.label = label;
        char id[64];
        std::snprintf(id, sizeof id, "synth-%s_%03d", core::label_name(label).c_str(),
                      i % n_per_class);
        seq.subject_id = id;
        out.push_back(std::move(seq));
    }
    return out;
}

} // namespace fmrigen::train
