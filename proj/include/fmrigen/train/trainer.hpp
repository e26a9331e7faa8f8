#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fmrigen/core/types.hpp"
#include "fmrigen/nets/forward.hpp"
#include "fmrigen/train/optim.hpp"
#include "fmrigen/util/rng.hpp"

namespace fmrigen::train {

struct TrainConfig {
    int pretrain_epochs = 20;
    int gan_epochs = 100;
    int batch_size = 1;
    double lr_eg = 1e-4;
    double lr_d = 1e-4;
    double lr_c = 1e-4;
    double lambda = 10.0; // reconstruction weight in the encoder-generator loss
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    int64_t checkpoint_every = 0;   // steps; 0 disables scheduled checkpoints
    std::string checkpoint_dir;

    void validate() const;
};

struct HistoryRow {
    int64_t step = 0;
    double loss_eg = 0, loss_d = 0, loss_c = 0, mae = 0, seconds = 0;
};

struct TrainHistory {
    std::vector<HistoryRow> rows;
};

void write_history_csv(const std::string& path, const TrainHistory& h);
TrainHistory read_history_csv(const std::string& path);

// Standard normal draws, [n, z_dim], deterministic in the seed.
ad::Tensor<float> sample_prior(int n, int z_dim, uint64_t seed);

// Two-stage optimization driver. Data order is the given vector order,
// consumed cyclically one batch per step, so a restored checkpoint resumes
// the exact step sequence of an uninterrupted run.
class Trainer {
public:
    Trainer(const nets::ArchConfig& arch, const TrainConfig& cfg);

    // Adam on MSE(x, G(E(x), label)); only encoder and generator move.
    TrainHistory pretrain(const std::vector<core::VolumeSequence>& data, int epochs);

    // Per step: (1) E,G on loss_eg, (2) D on loss_d, (3) C on loss_c.
    TrainHistory train_gan(const std::vector<core::VolumeSequence>& data, int epochs);

    void save_checkpoint(const std::string& stem) const;
    static Trainer load_checkpoint(const std::string& stem);
    // Also verifies the stored parameter list against `expect`, naming the
    // first mismatched array.
    static Trainer load_checkpoint(const std::string& stem, const nets::ArchConfig& expect);

    const nets::ArchConfig& arch() const { return arch_; }
    const TrainConfig& config() const { return cfg_; }
    nets::ParamStore<float>& params() { return params_; }
    const nets::ParamStore<float>& params() const { return params_; }
    int64_t pretrain_step() const { return pretrain_step_; }
    int64_t gan_step() const { return gan_step_; }
    const std::string& last_checkpoint() const { return last_checkpoint_; }

private:
    void zero_all_grads();
    void maybe_checkpoint(const std::string& stage, int64_t step);
    [[noreturn]] void diverged(const std::string& stage, int64_t step,
                               const std::string& losses) const;
    std::string param_norms() const;

    nets::ArchConfig arch_;
    TrainConfig cfg_;
    nets::ParamStore<float> params_;
    AdamOptimizer opt_pre_, opt_eg_, opt_d_, opt_c_;
    Rng rng_;
    int64_t pretrain_step_ = 0;
    int64_t gan_step_ = 0;
    std::string last_checkpoint_;
};

// n_per_class sequences per label, ids "synth-ASD_000"..., all voxel values
// in the generator's tanh range.
std::vector<core::VolumeSequence> synthesize_dataset(
    const nets::ParamStore<float>& params, const nets::ArchConfig& arch, int n_per_class,
    uint64_t seed, const std::array<double, 3>& voxel_size_mm = {3.2, 3.2, 3.2},
    double frame_interval_s = 2.0);

} // namespace fmrigen::train
