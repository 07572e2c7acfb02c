#pragma once

#include <vector>

#include "cmdiff/constraints.hpp"
#include "cmdiff/denoiser.hpp"
#include "cmdiff/rng.hpp"
#include "cmdiff/schedule.hpp"

namespace cmdiff {

// One ancestral reverse step: posterior of (x_t, predicted clean image),
// noise added except at t = 1.
Tensor unguided_reverse_step(const Tensor& x_t, int t, const Tensor& eps_pred,
                             const DiffusionSchedule& sched, RngStream& rng);

struct GuidedStepInfo {
    bool guidance_skipped = false;
    double constraint_total = 0.0;
};

// Statistical-constraint step: the posterior mean is shifted by
// -s * Sigma_q * grad(L_cons) evaluated at the clean-image prediction mapped
// to [0,1]. A non-finite gradient skips guidance for the step (with a warning)
// instead of aborting the trajectory.
Tensor guided_reverse_step(const Tensor& x_t, int t, const Tensor& eps_pred,
                           const ConstraintSpec& spec, const DiffusionSchedule& sched,
                           RngStream& rng, GuidedStepInfo* info = nullptr);

struct TranslateResult {
    Tensor image_u8;
    int guidance_skips = 0;
};

// Full reverse trajectory for a batch of sources. Each sample consumes its own
// rng stream seed_stream(seed, "sampling/<name>") where <name> is the entry of
// stream_names (sample id) or the positional index when none are given, so
// results do not depend on how inputs are grouped into batches or workers.
// Encoder features are computed once per batch since the source never changes
// across steps.
std::vector<TranslateResult> translate_batch(Denoiser& model, const DiffusionSchedule& sched,
                                             const std::vector<Tensor>& sources_norm,
                                             const std::vector<Tensor>& edges,
                                             Modality source_modality, DirectionLabel dir,
                                             const ConstraintSpec& spec, uint64_t seed,
                                             const std::vector<std::string>* stream_names = nullptr);

TranslateResult translate(Denoiser& model, const DiffusionSchedule& sched,
                          const Tensor& source_norm, const Tensor& edges,
                          Modality source_modality, DirectionLabel dir,
                          const ConstraintSpec& spec, uint64_t seed);

// Zero-guidance ConstraintSpec (lambdas 0) for plain ancestral sampling.
ConstraintSpec unguided_spec(int bins = 32);

}  // namespace cmdiff
