#include "fmrigen/cli/run.hpp"

#include <algorithm>
#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "fmrigen/cli/config.hpp"
#include "fmrigen/core/io.hpp"
#include "fmrigen/core/normalize.hpp"
#include "fmrigen/core/phantom.hpp"
#include "fmrigen/core/split.hpp"
#include "fmrigen/eval/classify.hpp"
#include "fmrigen/eval/embed.hpp"
#include "fmrigen/eval/stats.hpp"
#include "fmrigen/train/trainer.hpp"
#include "fmrigen/util/error.hpp"
#include "fmrigen/util/rng.hpp"
#include "fmrigen/util/sha256.hpp"

namespace fmrigen::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using core::VolumeSequence;

namespace {

// Exclusive advisory lock on the output directory for the process lifetime.
class OutDirLock {
public:
    explicit OutDirLock(const fs::path& out) : path_(out / ".fmrigen.lock") {
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw IoError("cannot create output directory '" + out.string() + "'");
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw IoError("output directory '" + out.string() +
                          "' is locked by another run (remove " + path_.string() +
                          " if that run is dead)");
    }
    ~OutDirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    OutDirLock(const OutDirLock&) = delete;
    OutDirLock& operator=(const OutDirLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

void require_exists(const fs::path& p, const char* what) {
    if (!fs::exists(p))
        throw ConfigError(std::string(what) + " '" + p.string() + "' does not exist");
}

// Sorted .vseq stems (paths minus the .json suffix) under a directory.
std::vector<std::string> list_vseq_stems(const fs::path& dir) {
    require_exists(dir, "data directory");
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path p = entry.path();
        if (p.extension() != ".json") continue;
        fs::path stem = p;
        stem.replace_extension();
        if (fs::exists(stem.string() + ".f32")) stems.push_back(stem.string());
    }
    std::sort(stems.begin(), stems.end());
    return stems;
}

std::vector<VolumeSequence> load_subjects(const fs::path& dir) {
    std::vector<VolumeSequence> out;
    for (const auto& stem : list_vseq_stems(dir)) out.push_back(core::read_vseq(stem));
    if (out.empty())
        throw ConfigError("data directory '" + dir.string() + "' holds no .vseq pairs");
    return out;
}

void save_subjects(const fs::path& dir, const std::vector<VolumeSequence>& subjects) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "'");
    for (const auto& s : subjects) core::write_vseq(s, (dir / s.subject_id).string());
}

json split_to_json(const core::DatasetSplit& sp) {
    return {{"train_ids", sp.train_ids},
            {"val_ids", sp.val_ids},
            {"test_ids", sp.test_ids},
            {"seed", sp.seed}};
}

core::DatasetSplit split_from_json(const json& j) {
    core::DatasetSplit sp;
    try {
        sp.train_ids = j.at("train_ids").get<std::vector<std::string>>();
        sp.val_ids = j.at("val_ids").get<std::vector<std::string>>();
        sp.test_ids = j.at("test_ids").get<std::vector<std::string>>();
        sp.seed = j.at("seed").get<uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("split file: ") + e.what());
    }
    return sp;
}

core::DatasetSplit read_split_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("split file '" + path.string() + "' does not exist");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw FormatError("split file '" + path.string() + "': " + e.what());
    }
    return split_from_json(j);
}

// Split from the file when present, otherwise derived in place from the ids.
core::DatasetSplit resolve_split(const RunConfig& cfg, const std::vector<VolumeSequence>& all) {
    const fs::path path =
        cfg.split_path.empty() ? fs::path(cfg.data_dir) / "split.json" : fs::path(cfg.split_path);
    if (fs::exists(path)) return read_split_file(path);
    std::vector<std::string> ids;
    for (const auto& s : all) ids.push_back(s.subject_id);
    return core::split_dataset(ids, cfg.split_ratios, Rng::mix(cfg.seed, 5));
}

std::vector<VolumeSequence> pick_ids(const std::vector<VolumeSequence>& all,
                                     const std::vector<std::string>& ids) {
    std::vector<VolumeSequence> out;
    for (const auto& id : ids) {
        auto it = std::find_if(all.begin(), all.end(),
                               [&](const VolumeSequence& s) { return s.subject_id == id; });
        if (it == all.end())
            throw ValidationError("split names unknown subject '" + id + "'");
        out.push_back(*it);
    }
    return out;
}

fs::path schedule_path(const RunConfig& cfg) {
    return cfg.schedule_path.empty() ? fs::path(cfg.data_dir) / "schedule.txt"
                                     : fs::path(cfg.schedule_path);
}

fs::path parcellation_stem(const RunConfig& cfg) {
    return cfg.parcellation_stem.empty() ? fs::path(cfg.data_dir) / "parcellation"
                                         : fs::path(cfg.parcellation_stem);
}

// Hash every artifact under the output directory into the manifest.
void write_manifest(const fs::path& out, const std::string& command,
                    const std::vector<std::string>& argv, const RunConfig& cfg) {
    std::map<std::string, std::string> artifacts;
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), out).string();
        if (rel == "manifest.json" || rel == ".fmrigen.lock") continue;
        artifacts[rel] = sha256_file_hex(entry.path());
    }
    json m = {{"kind", "fmrigen-manifest"},
              {"format_version", 1},
              {"tool_version", kVersion},
              {"command", command},
              {"argv", argv},
              {"config", config_to_json(cfg)},
              {"artifacts", artifacts}};
    std::ofstream os(out / "manifest.json");
    if (!os) throw IoError("cannot write manifest under '" + out.string() + "'");
    os << m.dump(2) << "\n";
}

void normalize_all(std::vector<VolumeSequence>& subjects) {
    for (auto& s : subjects) core::normalize_sequence(s);
}

// ---- subcommand bodies ----

// The phantom out directory is a complete data_dir: .vseq pairs next to
// schedule.txt and the parcellation stem, so downstream path defaults resolve.
void cmd_phantom(const RunConfig& cfg, const fs::path& out) {
    auto ph = core::make_phantom(cfg.phantom);
    save_subjects(out, ph.subjects);
    core::write_schedule(ph.schedule, (out / "schedule.txt").string());
    core::write_parcellation(ph.parcellation, (out / "parcellation").string());
    std::cout << "phantom: wrote " << ph.subjects.size() << " subjects to " << out << "\n";
}

void cmd_split(const RunConfig& cfg, const fs::path& out) {
    const auto stems = list_vseq_stems(cfg.data_dir);
    std::vector<std::string> ids;
    for (const auto& stem : stems) ids.push_back(fs::path(stem).filename().string());
    if (ids.empty())
        throw ConfigError("data directory '" + cfg.data_dir + "' holds no .vseq pairs");
    const auto sp = core::split_dataset(ids, cfg.split_ratios, Rng::mix(cfg.seed, 5));
    std::ofstream os(out / "split.json");
    if (!os) throw IoError("cannot write split under '" + out.string() + "'");
    os << split_to_json(sp).dump(2) << "\n";
    std::cout << "split: " << sp.train_ids.size() << " train / " << sp.val_ids.size()
              << " val / " << sp.test_ids.size() << " test\n";
}

// Training subjects, normalized into the generator's tanh range.
std::vector<VolumeSequence> training_set(const RunConfig& cfg) {
    auto all = load_subjects(cfg.data_dir);
    const auto sp = resolve_split(cfg, all);
    auto data = sp.train_ids.empty() ? all : pick_ids(all, sp.train_ids);
    normalize_all(data);
    return data;
}

train::TrainConfig train_config_for(const RunConfig& cfg, const fs::path& out) {
    train::TrainConfig tc = cfg.train;
    if (tc.checkpoint_dir.empty()) tc.checkpoint_dir = (out / "checkpoints").string();
    return tc;
}

void append_history(const fs::path& path, train::TrainHistory fresh) {
    if (fs::exists(path)) {
        auto prior = train::read_history_csv(path.string());
        prior.rows.insert(prior.rows.end(), fresh.rows.begin(), fresh.rows.end());
        fresh = std::move(prior);
    }
    train::write_history_csv(path.string(), fresh);
}

void cmd_pretrain(const RunConfig& cfg, const fs::path& out, const std::string& resume) {
    auto data = training_set(cfg);
    const auto tc = train_config_for(cfg, out);
    fs::create_directories(out / "checkpoints");
    auto trainer = resume.empty() ? train::Trainer(cfg.arch, tc)
                                  : train::Trainer::load_checkpoint(resume, cfg.arch);
    const auto history = trainer.pretrain(data, tc.pretrain_epochs);
    trainer.save_checkpoint((out / "checkpoints" / "pre_final").string());
    append_history(out / "history_pretrain.csv", history);
    std::cout << "pretrain: " << trainer.pretrain_step() << " steps total\n";
}

void cmd_train(const RunConfig& cfg, const fs::path& out, const std::string& resume) {
    auto data = training_set(cfg);
    const auto tc = train_config_for(cfg, out);
    fs::create_directories(out / "checkpoints");
    std::optional<train::Trainer> trainer;
    if (resume.empty()) {
        trainer.emplace(cfg.arch, tc);
        const auto pre = trainer->pretrain(data, tc.pretrain_epochs);
        append_history(out / "history_pretrain.csv", pre);
    } else {
        trainer.emplace(train::Trainer::load_checkpoint(resume, cfg.arch));
    }
    const auto history = trainer->train_gan(data, tc.gan_epochs);
    trainer->save_checkpoint((out / "checkpoints" / "gan_final").string());
    append_history(out / "history_gan.csv", history);
    std::cout << "train: " << trainer->gan_step() << " adversarial steps total\n";
}

void cmd_generate(const RunConfig& cfg, const fs::path& out, const std::string& ckpt,
                  int n_per_class) {
    if (ckpt.empty()) throw ConfigError("generate: --ckpt is required");
    require_exists(ckpt + ".json", "checkpoint");
    const int n = n_per_class > 0 ? n_per_class : cfg.eval.synth_per_class;
    auto trainer = train::Trainer::load_checkpoint(ckpt);
    auto synth = train::synthesize_dataset(trainer.params(), trainer.arch(), n,
                                           Rng::mix(cfg.seed, 6));
    save_subjects(out, synth);
    std::cout << "generate: wrote " << synth.size() << " sequences\n";
}

void cmd_eval_roi(const RunConfig& cfg, const fs::path& out) {
    auto subjects = load_subjects(cfg.data_dir);
    const auto sched = core::read_schedule(schedule_path(cfg).string());
    const auto parc = core::read_parcellation(parcellation_stem(cfg).string());
    const auto regions =
        cfg.eval.regions.empty() ? eval::all_region_ids(parc) : cfg.eval.regions;
    const auto report = eval::bio_scram_ttest(subjects, sched, parc, regions, cfg.eval.welch,
                                              cfg.eval.subject_level);
    eval::write_contrast_csv((out / "contrast.csv").string(), report);
    std::cout << "eval-roi: " << report.rows.size() << " regions -> contrast.csv\n";
}

void cmd_eval_embed(const RunConfig& cfg, const fs::path& out,
                    const std::vector<std::string>& synth_dirs) {
    auto subjects = load_subjects(cfg.data_dir);
    normalize_all(subjects);
    for (const auto& dir : synth_dirs) {
        auto synth = load_subjects(dir);
        std::move(synth.begin(), synth.end(), std::back_inserter(subjects));
    }
    const auto x = eval::flatten_for_projection(subjects);
    const auto pca = eval::pca_reduce(x, cfg.eval.pca_k);
    const auto coords = eval::tsne_embed(pca.y, cfg.eval.tsne);
    std::ostringstream meta;
    meta << "pca_k=" << pca.k << " perplexity=" << cfg.eval.tsne.perplexity
         << " iters=" << cfg.eval.tsne.iters << " seed=" << cfg.eval.tsne.seed;
    const auto proj = eval::make_projection(subjects, coords, pca.ratios, meta.str());
    eval::write_projection_csv((out / "projection.csv").string(), proj);
    eval::write_projection_svg((out / "projection.svg").string(), proj);
    std::cout << "eval-embed: " << proj.items.size() << " points -> projection.csv/.svg\n";
}

void cmd_eval_clf(const RunConfig& cfg, const fs::path& out, const std::string& arms_flag) {
    auto all = load_subjects(cfg.data_dir);
    const auto sp = resolve_split(cfg, all);
    if (sp.train_ids.empty() || sp.val_ids.empty() || sp.test_ids.empty())
        throw ValidationError("eval-clf needs non-empty train/val/test splits");
    auto train_set = pick_ids(all, sp.train_ids);
    auto val_set = pick_ids(all, sp.val_ids);
    auto test_set = pick_ids(all, sp.test_ids);
    normalize_all(train_set);
    normalize_all(val_set);
    normalize_all(test_set);

    std::vector<std::string> arms = cfg.eval.arms;
    if (!arms_flag.empty()) {
        arms.clear();
        std::stringstream ss(arms_flag);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) arms.push_back(item);
    }
    bool want_none = false, want_gauss = false;
    std::vector<std::pair<std::string, eval::SynthFn>> generators;
    // Loaded trainers must outlive the experiment's generator callbacks.
    std::vector<std::shared_ptr<train::Trainer>> keep;
    for (const auto& arm : arms) {
        if (arm == "none") {
            want_none = true;
            continue;
        }
        if (arm == "gaussian") {
            want_gauss = true;
            continue;
        }
        auto it = cfg.eval.generator_checkpoints.find(arm);
        if (it == cfg.eval.generator_checkpoints.end())
            throw ConfigError("eval-clf: arm '" + arm +
                              "' has no entry in eval.generator_checkpoints");
        require_exists(it->second + ".json", "checkpoint");
        auto t = std::make_shared<train::Trainer>(train::Trainer::load_checkpoint(it->second));
        keep.push_back(t);
        generators.emplace_back(arm, [t](int n_per_class, uint64_t seed) {
            return train::synthesize_dataset(t->params(), t->arch(), n_per_class, seed);
        });
    }

    const int target = cfg.eval.target_size > 0 ? cfg.eval.target_size
                                                : 2 * static_cast<int>(train_set.size());
    auto reports = eval::augmentation_experiment(train_set, val_set, test_set, generators,
                                                 target, cfg.eval.classifier,
                                                 cfg.eval.classifier_seed);
    // augmentation_experiment always runs none+gaussian first; honor the
    // requested arm list when it narrows them out.
    std::vector<eval::ClassifierReport> wanted;
    for (auto& r : reports) {
        if (r.tag == "none" && !want_none) continue;
        if (r.tag == "gaussian" && !want_gauss) continue;
        wanted.push_back(std::move(r));
    }
    eval::write_classifier_csv((out / "classifier.csv").string(), wanted);
    std::cout << "eval-clf: " << wanted.size() << " arms -> classifier.csv\n";
}

// ---- report rendering ----

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("report input '" + path.string() + "' does not exist");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        rows.push_back(std::move(cells));
    }
    return rows;
}

void render_markdown_table(std::ostream& os, const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
    auto line = [&](const std::vector<std::string>& cells) {
        os << "|";
        for (const auto& c : cells) os << " " << c << " |";
        os << "\n";
    };
    line(header);
    std::vector<std::string> dashes(header.size(), "---");
    line(dashes);
    for (const auto& r : rows) line(r);
}

std::string fmt3(const std::string& value) {
    try {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", std::stod(value));
        return buf;
    } catch (...) {
        return value.empty() ? "-" : value;
    }
}

// One Table-1/2 style block per labeled contrast CSV: mean z per condition
// and the BIO-vs-SCRAM p-value for every region.
void render_contrast_section(std::ostream& os, const std::string& label, const fs::path& path) {
    auto rows = read_csv_rows(path);
    if (rows.size() < 2) throw FormatError("contrast CSV '" + path.string() + "' has no rows");
    os << "\n### " << label << "\n\n";
    std::vector<std::vector<std::string>> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() < 8)
            throw FormatError("contrast CSV '" + path.string() + "' row has too few columns");
        out.push_back({r[1], fmt3(r[3]), fmt3(r[2]), fmt3(r[5])});
    }
    render_markdown_table(os, {"Region", "SCRAM mean z", "BIO mean z", "p-value"}, out);
}

void render_classifier_section(std::ostream& os, const fs::path& path) {
    auto rows = read_csv_rows(path);
    if (rows.size() < 2) throw FormatError("classifier CSV '" + path.string() + "' has no rows");
    os << "\n## Augmentation benchmark\n\n";
    std::vector<std::vector<std::string>> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() < 6)
            throw FormatError("classifier CSV '" + path.string() + "' row has too few columns");
        char acc[32];
        std::snprintf(acc, sizeof acc, "%.1f", std::stod(r[2]) * 100.0);
        out.push_back({r[0], fmt3(r[1]), acc, fmt3(r[3]), fmt3(r[4])});
    }
    render_markdown_table(os, {"Augmentation", "Test CE loss", "Test acc (%)", "F1", "AUC"}, out);
}

void render_projection_section(std::ostream& os, const fs::path& path) {
    auto rows = read_csv_rows(path);
    os << "\n## Embedding\n\n";
    size_t real = 0, synth = 0;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 2) continue;
        (rows[i][1] == "synthetic" ? synth : real) += 1;
    }
    os << real << " real and " << synth << " synthetic sequences projected; see `"
       << path.filename().string() << "` and the matching SVG scatter.\n";
}

void cmd_report(const fs::path& out, const std::vector<std::string>& contrasts,
                const std::string& classifier, const std::string& projection) {
    std::ostringstream body;
    body << "# Synthesis evaluation report\n";
    if (!contrasts.empty()) {
        body << "\n## Regional stimulus contrast\n";
        for (const auto& spec : contrasts) {
            const auto eq = spec.find('=');
            const std::string label = eq == std::string::npos ? spec : spec.substr(0, eq);
            const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
            render_contrast_section(body, label, path);
        }
    }
    if (!classifier.empty()) render_classifier_section(body, classifier);
    if (!projection.empty()) render_projection_section(body, projection);
    std::ofstream os(out / "report.md");
    if (!os) throw IoError("cannot write report under '" + out.string() + "'");
    os << body.str();
    std::cout << "report: wrote report.md\n";
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"4D sequence synthesis and evaluation pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir, resume, ckpt, arms_flag, classifier_csv, projection_csv;
    std::vector<std::string> overrides, synth_dirs, contrast_specs;
    int n_per_class = 0;

    auto add_common = [&](CLI::App* sub, bool needs_out = true) {
        sub->add_option("--config", config_path, "run-config or manifest JSON")->required();
        sub->add_option("--set", overrides, "override a config field: a.b.c=value");
        if (needs_out) sub->add_option("--out", out_dir, "output directory")->required();
    };

    auto* p_version = app.add_subcommand("version", "print the tool version");
    auto* p_phantom = app.add_subcommand("phantom", "write a synthetic ground-truth dataset");
    add_common(p_phantom);
    auto* p_split = app.add_subcommand("split", "write a train/val/test subject split");
    add_common(p_split);
    auto* p_pre = app.add_subcommand("pretrain", "autoencoder reconstruction pretraining");
    add_common(p_pre);
    p_pre->add_option("--resume", resume, "checkpoint stem to continue from");
    auto* p_train = app.add_subcommand("train", "two-stage adversarial training");
    add_common(p_train);
    p_train->add_option("--resume", resume, "checkpoint stem to continue from");
    auto* p_gen = app.add_subcommand("generate", "sample labeled sequences from a checkpoint");
    add_common(p_gen);
    p_gen->add_option("--ckpt", ckpt, "checkpoint stem")->required();
    p_gen->add_option("--n", n_per_class, "sequences per class (default eval.synth_per_class)");
    auto* p_roi = app.add_subcommand("eval-roi", "regional BIO-vs-SCRAM contrast statistics");
    add_common(p_roi);
    auto* p_embed = app.add_subcommand("eval-embed", "PCA + tSNE projection of sequences");
    add_common(p_embed);
    p_embed->add_option("--synth", synth_dirs, "directory of synthetic .vseq (repeatable)");
    auto* p_clf = app.add_subcommand("eval-clf", "augmentation classification benchmark");
    add_common(p_clf);
    p_clf->add_option("--arms", arms_flag, "comma list overriding eval.arms");
    auto* p_report = app.add_subcommand("report", "render evaluation CSVs into a document");
    add_common(p_report);
    p_report->add_option("--contrast", contrast_specs, "label=contrast.csv (repeatable)");
    p_report->add_option("--classifier", classifier_csv, "classifier.csv path");
    p_report->add_option("--projection", projection_csv, "projection.csv path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // help text, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (p_version->parsed()) {
        std::cout << "fmrigen " << kVersion << "\n";
        return 0;
    }

    const RunConfig cfg = load_config(config_path, overrides);
    const fs::path out(out_dir);
    OutDirLock lock(out);

    std::string command;
    if (p_phantom->parsed()) {
        command = "phantom";
        cmd_phantom(cfg, out);
    } else if (p_split->parsed()) {
        command = "split";
        cmd_split(cfg, out);
    } else if (p_pre->parsed()) {
        command = "pretrain";
        cmd_pretrain(cfg, out, resume);
    } else if (p_train->parsed()) {
        command = "train";
        cmd_train(cfg, out, resume);
    } else if (p_gen->parsed()) {
        command = "generate";
        cmd_generate(cfg, out, ckpt, n_per_class);
    } else if (p_roi->parsed()) {
        command = "eval-roi";
        cmd_eval_roi(cfg, out);
    } else if (p_embed->parsed()) {
        command = "eval-embed";
        cmd_eval_embed(cfg, out, synth_dirs);
    } else if (p_clf->parsed()) {
        command = "eval-clf";
        cmd_eval_clf(cfg, out, arms_flag);
    } else if (p_report->parsed()) {
        command = "report";
        cmd_report(out, contrast_specs, classifier_csv, projection_csv);
    }
    write_manifest(out, command, args, cfg);
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace fmrigen::cli
