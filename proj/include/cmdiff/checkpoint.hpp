#pragma once

#include <memory>
#include <optional>
#include <string>

#include "cmdiff/denoiser.hpp"
#include "cmdiff/schedule.hpp"

namespace cmdiff {

// Checkpoint = parameter blob (<path>) + JSON manifest (<path>.json) carrying
// the denoiser config, schedule parameters, and normalization constants.
// Optimizer moments ride along so training can resume from any checkpoint.
struct CheckpointMeta {
    DenoiserConfig denoiser;
    int schedule_T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.01;
    long iteration = 0;
    std::string train_config_json;  // verbatim TrainConfig snapshot, may be empty

    DiffusionSchedule schedule() const {
        return build_linear_schedule(schedule_T, beta_start, beta_end);
    }
};

void save_checkpoint(const std::string& path, Denoiser& model, const CheckpointMeta& meta,
                     bool include_moments = true);

CheckpointMeta load_checkpoint_meta(const std::string& path);

// Builds a model from the manifest and fills its parameters (and moments,
// when present) from the blob. Name/shape mismatches raise ConfigError.
std::unique_ptr<Denoiser> load_checkpoint(const std::string& path, CheckpointMeta* meta_out = nullptr);

}  // namespace cmdiff
