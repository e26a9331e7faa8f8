#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "fmrigen/core/types.hpp"
#include "fmrigen/eval/classify.hpp"
#include "fmrigen/eval/embed.hpp"
#include "fmrigen/nets/arch.hpp"
#include "fmrigen/train/trainer.hpp"

namespace fmrigen::cli {

struct EvalSettings {
    std::vector<int> regions; // empty = every parcellation region
    bool welch = false;
    bool subject_level = false;
    int pca_k = 10;
    eval::TsneOptions tsne;
    eval::ClfConfig classifier;
    uint64_t classifier_seed = 0;
    std::vector<std::string> arms{"none", "gaussian"};
    // Named generator arms resolve to checkpoint stems here.
    std::map<std::string, std::string> generator_checkpoints;
    int target_size = 0; // 0 = twice the training-arm size
    int synth_per_class = 8;
};

struct RunConfig {
    std::string profile = "desk";
    uint64_t seed = 1;
    std::string data_dir;          // directory of input .vseq stems
    std::string schedule_path;     // default <data_dir>/schedule.txt
    std::string parcellation_stem; // default <data_dir>/parcellation
    std::string split_path;        // default <data_dir>/split.json
    core::PhantomSpec phantom;
    nets::ArchConfig arch;
    train::TrainConfig train;
    std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
    EvalSettings eval;

    void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

// Dot-path override "a.b.c=value"; the value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& keyval);

// Profile defaults, deep-merged with the user document (user wins), then
// overrides, then unset seeds derived from the global seed. Normalizing the
// resolved document again is an identity.
RunConfig normalize_config(const nlohmann::json& user, const std::vector<std::string>& overrides);

// Reads a config file or a manifest (whose "config" object is used).
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

} // namespace fmrigen::cli
