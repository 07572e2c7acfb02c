#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cmdiff/checkpoint.hpp"
#include "cmdiff/data_io.hpp"
#include "cmdiff/denoiser.hpp"
#include "cmdiff/schedule.hpp"

namespace cmdiff {

struct TrainConfig {
    double lr = 1e-4;
    double lr_decay = 0.9;
    int lr_decay_every = 2000;
    int batch_size = 6;
    long total_iters = 10000;
    double lambda_ir_to_vis = 1.0;
    double lambda_vis_to_ir = 1.0;
    uint64_t seed = 0;
    bool disable_tdg = false;
    bool disable_cfc = false;
    double weight_decay = 0.01;
    double grad_clip = 0.0;  // 0 = off
    long checkpoint_every = 0;  // 0 = final checkpoint only
    std::string edge_detector = "sobel";

    void validate() const;
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& text);
};

// lr after `completed` finished iterations: lr * decay^(completed / every).
double lr_at(const TrainConfig& cfg, long completed);

// Assemble the network input for one direction: noisy target, source image,
// and (with cfc) the source edge map.
Tensor build_direction_input(const PairedSample& pair, const DirectionLabel& dir, int t,
                             const Tensor& eps, const DiffusionSchedule& sched, bool cfc);

using PredictFn =
    std::function<Tensor(const Tensor& z, int label_id, Modality source, int t)>;

struct JointLossTerms {
    double total = 0.0;
    double ir_to_vis = 0.0;
    double vis_to_ir = 0.0;
};

// The two-direction noise-prediction objective for a single pair, computed
// through an arbitrary predictor (oracle tests plug in stubs here).
JointLossTerms joint_loss(const PairedSample& pair, int t1, int t2, const Tensor& eps1,
                          const Tensor& eps2, const PredictFn& predict,
                          const TrainConfig& cfg, const DiffusionSchedule& sched);

struct TrainState {
    std::unique_ptr<Denoiser> model;
    DiffusionSchedule sched;
    TrainConfig cfg;
    long iter = 0;
    RngStream rng_t;
    RngStream rng_eps;
    RngStream rng_batch;

    TrainState(const DenoiserConfig& model_cfg, const DiffusionSchedule& sched,
               const TrainConfig& cfg);
};

struct StepRecord {
    long iteration = 0;  // 1-based, after the step
    double loss_ir_to_vis = 0.0;
    double loss_vis_to_ir = 0.0;
    double lr = 0.0;
};

// One AdamW step on the joint loss over the batch. Throws NumericError with a
// diagnostic snapshot if the loss goes non-finite.
StepRecord train_step(TrainState& state, const std::vector<const PairedSample*>& batch);

struct TrainRunResult {
    std::string final_checkpoint;
    std::vector<StepRecord> records;
};

// Full loop: loss CSV (iteration, epoch, loss_ir_to_vis, loss_vis_to_ir, lr),
// periodic + final checkpoints under out_dir. Resumable from resume_ckpt;
// mismatched configs are refused with a field-by-field diff summary.
TrainRunResult run_training(const std::vector<PairedSample>& train_samples,
                            const DenoiserConfig& model_cfg, const DiffusionSchedule& sched,
                            const TrainConfig& cfg, const std::string& out_dir,
                            const std::string& resume_ckpt = "");

}  // namespace cmdiff
