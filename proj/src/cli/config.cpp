#include "fmrigen/cli/config.hpp"

#include <fstream>

#include "fmrigen/nets/serialize.hpp"
#include "fmrigen/util/error.hpp"
#include "fmrigen/util/rng.hpp"

namespace fmrigen::cli {

using nlohmann::json;

namespace {

// Missing/ill-typed fields report their dot path.
template <class T>
T field(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key))
        throw ConfigError("config: missing field '" + path + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + path + key + "' has the wrong type");
    }
}

json phantom_to_json(const core::PhantomSpec& p) {
    json rois = json::array();
    for (const auto& r : p.rois)
        rois.push_back({{"center", r.center},
                        {"radius", r.radius},
                        {"active", core::cond_name(r.active)},
                        {"amplitude_asd", r.amplitude_asd},
                        {"amplitude_hc", r.amplitude_hc}});
    json order = json::array();
    for (auto c : p.block_order) order.push_back(core::cond_name(c));
    return {{"t", p.t},
            {"d", p.d},
            {"h", p.h},
            {"w", p.w},
            {"n_subjects_per_class", p.n_subjects_per_class},
            {"rois", rois},
            {"baseline", p.baseline},
            {"noise_sigma", p.noise_sigma},
            {"spatial_smooth_fwhm", p.spatial_smooth_fwhm},
            {"seed", p.seed},
            {"block_len_frames", p.block_len_frames},
            {"block_order", order},
            {"lag_frames", p.lag_frames},
            {"voxel_size_mm", p.voxel_size_mm},
            {"frame_interval_s", p.frame_interval_s}};
}

core::PhantomSpec phantom_from_json(const json& j) {
    const std::string at = "phantom.";
    core::PhantomSpec p;
    p.t = field<int>(j, at, "t");
    p.d = field<int>(j, at, "d");
    p.h = field<int>(j, at, "h");
    p.w = field<int>(j, at, "w");
    p.n_subjects_per_class = field<int>(j, at, "n_subjects_per_class");
    for (const auto& rj : field<json>(j, at, "rois")) {
        core::PhantomRoi r;
        r.center = rj.at("center").get<std::array<int, 3>>();
        r.radius = rj.at("radius").get<double>();
        r.active = core::parse_cond(rj.at("active").get<std::string>());
        r.amplitude_asd = rj.at("amplitude_asd").get<double>();
        r.amplitude_hc = rj.at("amplitude_hc").get<double>();
        p.rois.push_back(r);
    }
    p.baseline = field<double>(j, at, "baseline");
    p.noise_sigma = field<double>(j, at, "noise_sigma");
    p.spatial_smooth_fwhm = field<double>(j, at, "spatial_smooth_fwhm");
    p.seed = field<uint64_t>(j, at, "seed");
    p.block_len_frames = field<int>(j, at, "block_len_frames");
    p.block_order.clear();
    for (const auto& c : field<json>(j, at, "block_order"))
        p.block_order.push_back(core::parse_cond(c.get<std::string>()));
    p.lag_frames = field<int>(j, at, "lag_frames");
    p.voxel_size_mm = field<double>(j, at, "voxel_size_mm");
    p.frame_interval_s = field<double>(j, at, "frame_interval_s");
    return p;
}

json train_to_json(const train::TrainConfig& t) {
    return {{"pretrain_epochs", t.pretrain_epochs},
            {"gan_epochs", t.gan_epochs},
            {"batch_size", t.batch_size},
            {"lr_eg", t.lr_eg},
            {"lr_d", t.lr_d},
            {"lr_c", t.lr_c},
            {"lambda", t.lambda},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"eps", t.eps},
            {"seed", t.seed},
            {"checkpoint_every", t.checkpoint_every},
            {"checkpoint_dir", t.checkpoint_dir}};
}

train::TrainConfig train_from_json(const json& j) {
    const std::string at = "train.";
    train::TrainConfig t;
    t.pretrain_epochs = field<int>(j, at, "pretrain_epochs");
    t.gan_epochs = field<int>(j, at, "gan_epochs");
    t.batch_size = field<int>(j, at, "batch_size");
    t.lr_eg = field<double>(j, at, "lr_eg");
    t.lr_d = field<double>(j, at, "lr_d");
    t.lr_c = field<double>(j, at, "lr_c");
    t.lambda = field<double>(j, at, "lambda");
    t.beta1 = field<double>(j, at, "beta1");
    t.beta2 = field<double>(j, at, "beta2");
    t.eps = field<double>(j, at, "eps");
    t.seed = field<uint64_t>(j, at, "seed");
    t.checkpoint_every = field<int64_t>(j, at, "checkpoint_every");
    t.checkpoint_dir = field<std::string>(j, at, "checkpoint_dir");
    return t;
}

json eval_to_json(const EvalSettings& e) {
    return {{"regions", e.regions},
            {"welch", e.welch},
            {"subject_level", e.subject_level},
            {"pca_k", e.pca_k},
            {"tsne",
             {{"out_dim", e.tsne.out_dim},
              {"perplexity", e.tsne.perplexity},
              {"iters", e.tsne.iters},
              {"seed", e.tsne.seed}}},
            {"classifier",
             {{"pool", e.classifier.pool},
              {"conv_kernel", e.classifier.conv_kernel},
              {"conv_stride", e.classifier.conv_stride},
              {"conv_channels", e.classifier.conv_channels},
              {"mlp_width", e.classifier.mlp_width},
              {"epochs", e.classifier.epochs},
              {"lr", e.classifier.lr}}},
            {"classifier_seed", e.classifier_seed},
            {"arms", e.arms},
            {"generator_checkpoints", e.generator_checkpoints},
            {"target_size", e.target_size},
            {"synth_per_class", e.synth_per_class}};
}

EvalSettings eval_from_json(const json& j) {
    const std::string at = "eval.";
    EvalSettings e;
    e.regions = field<std::vector<int>>(j, at, "regions");
    e.welch = field<bool>(j, at, "welch");
    e.subject_level = field<bool>(j, at, "subject_level");
    e.pca_k = field<int>(j, at, "pca_k");
    const json tj = field<json>(j, at, "tsne");
    e.tsne.out_dim = field<int>(tj, at + "tsne.", "out_dim");
    e.tsne.perplexity = field<double>(tj, at + "tsne.", "perplexity");
    e.tsne.iters = field<int>(tj, at + "tsne.", "iters");
    e.tsne.seed = field<uint64_t>(tj, at + "tsne.", "seed");
    const json cj = field<json>(j, at, "classifier");
    e.classifier.pool = field<int>(cj, at + "classifier.", "pool");
    e.classifier.conv_kernel = field<int>(cj, at + "classifier.", "conv_kernel");
    e.classifier.conv_stride = field<int>(cj, at + "classifier.", "conv_stride");
    e.classifier.conv_channels = field<std::vector<int>>(cj, at + "classifier.", "conv_channels");
    e.classifier.mlp_width = field<int>(cj, at + "classifier.", "mlp_width");
    e.classifier.epochs = field<int>(cj, at + "classifier.", "epochs");
    e.classifier.lr = field<double>(cj, at + "classifier.", "lr");
    e.classifier_seed = field<uint64_t>(j, at, "classifier_seed");
    e.arms = field<std::vector<std::string>>(j, at, "arms");
    e.generator_checkpoints =
        field<std::map<std::string, std::string>>(j, at, "generator_checkpoints");
    e.target_size = field<int>(j, at, "target_size");
    e.synth_per_class = field<int>(j, at, "synth_per_class");
    return e;
}

json desk_profile() {
    RunConfig c; // struct defaults are the desk profile
    c.phantom.t = 24;
    c.phantom.d = c.phantom.h = c.phantom.w = 16;
    c.phantom.n_subjects_per_class = 8;
    c.phantom.baseline = 10.0;
    c.phantom.noise_sigma = 0.25;
    c.phantom.block_len_frames = 3;
    c.phantom.rois.push_back({{5, 5, 5}, 2.0, core::Cond::BIO, 1.0, 0.25});
    c.phantom.rois.push_back({{11, 11, 11}, 2.0, core::Cond::SCRAM, 0.7, 0.7});
    c.train.pretrain_epochs = 12;
    c.train.gan_epochs = 25;
    c.eval.pca_k = 10;
    c.eval.tsne.perplexity = 5.0;
    c.eval.tsne.iters = 500;
    c.eval.classifier.pool = 2;
    c.eval.classifier.epochs = 15;
    c.eval.synth_per_class = 8;
    json j = config_to_json(c);
    // Seeds resolve from the global seed unless the user pins them.
    j["phantom"].erase("seed");
    j["train"].erase("seed");
    j["eval"]["tsne"].erase("seed");
    j["eval"].erase("classifier_seed");
    return j;
}

json paper_profile() {
    json j = desk_profile();
    j["profile"] = "paper";
    j["arch"] = nets::arch_to_json(nets::paper_arch());
    j["train"]["pretrain_epochs"] = 20;
    j["train"]["gan_epochs"] = 100;
    j["train"]["batch_size"] = 1;
    const auto pa = nets::paper_arch();
    j["phantom"]["t"] = pa.t;
    j["phantom"]["d"] = pa.d;
    j["phantom"]["h"] = pa.h;
    j["phantom"]["w"] = pa.w;
    j["eval"]["pca_k"] = 100;
    j["eval"]["tsne"]["perplexity"] = 30.0;
    j["eval"]["tsne"]["iters"] = 1000;
    j["eval"]["classifier"]["pool"] = 4;
    j["eval"]["classifier"]["epochs"] = 30;
    j["eval"]["synth_per_class"] = 100;
    return j;
}

void deep_merge(json& base, const json& over) {
    if (!base.is_object() || !over.is_object()) {
        base = over;
        return;
    }
    for (const auto& [k, v] : over.items()) {
        if (base.contains(k) && base[k].is_object() && v.is_object())
            deep_merge(base[k], v);
        else
            base[k] = v;
    }
}

} // namespace

json config_to_json(const RunConfig& cfg) {
    return {{"profile", cfg.profile},
            {"seed", cfg.seed},
            {"data_dir", cfg.data_dir},
            {"schedule_path", cfg.schedule_path},
            {"parcellation_stem", cfg.parcellation_stem},
            {"split_path", cfg.split_path},
            {"phantom", phantom_to_json(cfg.phantom)},
            {"arch", nets::arch_to_json(cfg.arch)},
            {"train", train_to_json(cfg.train)},
            {"split_ratios", cfg.split_ratios},
            {"eval", eval_to_json(cfg.eval)}};
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: document root must be an object");
    RunConfig c;
    c.profile = field<std::string>(j, "", "profile");
    c.seed = field<uint64_t>(j, "", "seed");
    c.data_dir = field<std::string>(j, "", "data_dir");
    c.schedule_path = field<std::string>(j, "", "schedule_path");
    c.parcellation_stem = field<std::string>(j, "", "parcellation_stem");
    c.split_path = field<std::string>(j, "", "split_path");
    c.phantom = phantom_from_json(field<json>(j, "", "phantom"));
    try {
        c.arch = nets::arch_from_json(field<json>(j, "", "arch"));
    } catch (const FormatError& e) {
        throw ConfigError(std::string("config: arch: ") + e.what());
    }
    c.train = train_from_json(field<json>(j, "", "train"));
    c.split_ratios = field<std::array<double, 3>>(j, "", "split_ratios");
    c.eval = eval_from_json(field<json>(j, "", "eval"));
    return c;
}

void RunConfig::validate() const {
    if (profile != "desk" && profile != "paper")
        throw ConfigError("config: profile must be \"desk\" or \"paper\", got \"" + profile +
                          "\"");
    try {
        phantom.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("config: phantom: ") + e.what());
    }
    arch.validate(); // throws ConfigError naming the failing layer/field
    if (phantom.t != arch.t || phantom.d != arch.d || phantom.h != arch.h ||
        phantom.w != arch.w)
        throw ConfigError("config: phantom.t/d/h/w and arch.t/d/h/w disagree; the training "
                          "pipeline consumes the phantom grid");
    train.validate();
    eval.classifier.validate();
    double rsum = 0;
    for (double r : split_ratios) {
        if (r < 0) throw ConfigError("config: split_ratios: negative ratio");
        rsum += r;
    }
    if (rsum <= 0) throw ConfigError("config: split_ratios: ratios sum to zero");
    if (eval.pca_k < 1) throw ConfigError("config: eval.pca_k must be >= 1");
    if (eval.tsne.out_dim < 1 || eval.tsne.perplexity <= 0 || eval.tsne.iters < 1)
        throw ConfigError("config: eval.tsne: out_dim/perplexity/iters out of range");
    if (eval.target_size < 0) throw ConfigError("config: eval.target_size must be >= 0");
    if (eval.synth_per_class < 0)
        throw ConfigError("config: eval.synth_per_class must be >= 0");
    if (eval.arms.empty()) throw ConfigError("config: eval.arms must not be empty");
    for (const auto& a : eval.arms)
        if (a != "none" && a != "gaussian" && !eval.generator_checkpoints.count(a))
            throw ConfigError("config: eval.arms: arm '" + a +
                              "' has no entry in eval.generator_checkpoints");
}

namespace {

// Every legal dot-path exists in a default-constructed config, so a --set
// path that walks off that schema is a typo rather than a new setting. The
// generator_checkpoints map is the one open namespace.
bool known_path(const std::string& path) {
    static const json schema = config_to_json(RunConfig{});
    if (path.rfind("eval.generator_checkpoints.", 0) == 0) return true;
    const json* cur = &schema;
    size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (!cur->is_object() || !cur->contains(key)) return false;
        if (dot == std::string::npos) return true;
        cur = &cur->at(key);
        start = dot + 1;
    }
}

} // namespace

void apply_override(json& j, const std::string& keyval) {
    const auto eq = keyval.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + keyval + "'");
    const std::string path = keyval.substr(0, eq);
    const std::string raw = keyval.substr(eq + 1);
    if (!known_path(path)) throw ConfigError("--set: unknown config key '" + path + "'");
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw; // unquoted strings pass through
    }
    json* cur = &j;
    size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("--set: empty key segment in '" + path + "'");
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        if (!cur->is_object() && !cur->is_null())
            throw ConfigError("--set: '" + path.substr(0, dot) + "' is not an object");
        start = dot + 1;
    }
}

RunConfig normalize_config(const json& user, const std::vector<std::string>& overrides) {
    if (!user.is_object()) throw ConfigError("config: document root must be an object");
    std::string profile = "desk";
    if (user.contains("profile")) {
        if (!user.at("profile").is_string())
            throw ConfigError("config: field 'profile' has the wrong type");
        profile = user.at("profile").get<std::string>();
    }
    for (const auto& kv : overrides) {
        // A profile override must steer which defaults load, so peek early.
        if (kv.rfind("profile=", 0) == 0) profile = kv.substr(8);
    }
    json doc;
    if (profile == "desk")
        doc = desk_profile();
    else if (profile == "paper")
        doc = paper_profile();
    else
        throw ConfigError("config: profile must be \"desk\" or \"paper\", got \"" + profile +
                          "\"");
    deep_merge(doc, user);
    for (const auto& kv : overrides) apply_override(doc, kv);

    const uint64_t seed = field<uint64_t>(doc, "", "seed");
    if (!doc["phantom"].contains("seed")) doc["phantom"]["seed"] = Rng::mix(seed, 1);
    if (!doc["train"].contains("seed")) doc["train"]["seed"] = Rng::mix(seed, 2);
    if (!doc["eval"]["tsne"].contains("seed")) doc["eval"]["tsne"]["seed"] = Rng::mix(seed, 3);
    if (!doc["eval"].contains("classifier_seed"))
        doc["eval"]["classifier_seed"] = Rng::mix(seed, 4);

    RunConfig cfg = config_from_json(doc);
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config file '" + path + "' is missing or unreadable");
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    // Manifests wrap the resolved config; accept them directly.
    if (doc.is_object() && doc.value("kind", "") == "fmrigen-manifest")
        doc = field<json>(doc, "", "config");
    return normalize_config(doc, overrides);
}

} // namespace fmrigen::cli
