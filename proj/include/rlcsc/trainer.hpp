#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rlcsc/dataset.hpp"
#include "rlcsc/model.hpp"
#include "rlcsc/rng.hpp"

namespace rlcsc {

struct TrainConfig {
    int batch_size = 128;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr0 = 0.1;
    double lr_decay_factor = 10.0;
    int lr_decay_every = 10;      // epochs
    int epochs = 35;
    double clip_theta = 0.4;      // gradient clipping bound, per element
    std::uint64_t seed = 0;
    bool residual_enabled = true; // false: regress the HR image directly
    int checkpoint_every = 5;     // epochs

    void validate() const;
};

// Flat key=value text file mirroring the field names above; '#' comments.
TrainConfig parse_train_config(const std::filesystem::path& path);
std::string train_config_to_string(const TrainConfig& cfg);

// lr0 / factor^floor(epoch / every)
double lr_schedule(int epoch, const TrainConfig& cfg);

// Conv weights ~ N(0, 2/n_out) with n_out = out_channels * k_h * k_w;
// thresholds start at zero.
void he_init(RlcscParams<float>& params, Rng& rng);

// Gradients / momentum buffers in the fixed parameter order.
struct ParamSet {
    Tensor4<float> f0, f1, w1, s, w2, h, theta;

    static ParamSet zeros_like(const RlcscParams<float>& p);
};

// clip -> weight decay (not on theta) -> momentum -> step -> project theta>=0
void sgd_step(RlcscParams<float>& params, const ParamSet& grads, ParamSet& velocity, double lr,
              const TrainConfig& cfg, long step_index);

// Mean over batch and pixels of (R + I_y - I_x)^2, or (R - I_x)^2 when the
// residual connection is disabled.
double batch_loss(const RlcscParams<float>& params, const Tensor4<float>& ilr,
                  const Tensor4<float>& hr, bool residual_enabled);

struct Checkpoint {
    ModelConfig model;
    int epoch = 0; // number of completed epochs
    RlcscParams<float> params;
    ParamSet velocity;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path); // atomic
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochStat {
    int epoch = 0;
    long steps_done = 0; // cumulative
    double mean_loss = 0.0;
    double lr = 0.0;
};

struct TrainSink {
    std::filesystem::path out_dir; // empty: keep everything in memory
    bool console = false;
    bool append_csv = false; // resume: extend an existing loss.csv
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStat> trace;
};

// Full run from fresh parameters (He init from cfg.seed).
TrainResult train(const PatchSet& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainSink& sink);

// Continue from a checkpoint's completed-epoch count up to cfg.epochs.
TrainResult train_from(const PatchSet& data, const Checkpoint& start, const TrainConfig& cfg,
                       const TrainSink& sink);

} // namespace rlcsc
