#include "cmdiff/sampler.hpp"

#include <cmath>
#include <cstdio>

#include "cmdiff/conditioning.hpp"

namespace cmdiff {

Tensor unguided_reverse_step(const Tensor& x_t, int t, const Tensor& eps_pred,
                             const DiffusionSchedule& sched, RngStream& rng) {
    Tensor x0_hat = predict_x0(x_t, eps_pred, t, sched, /*clamp_unit=*/true);
    PosteriorParams post = posterior_params(x_t, x0_hat, t, sched);
    if (t == 1) return post.mean;
    double sd = std::sqrt(post.variance);
    Tensor out = post.mean;
    for (double& v : out.v) v += sd * rng.normal();
    return out;
}

Tensor guided_reverse_step(const Tensor& x_t, int t, const Tensor& eps_pred,
                           const ConstraintSpec& spec, const DiffusionSchedule& sched,
                           RngStream& rng, GuidedStepInfo* info) {
    Tensor x0_hat = predict_x0(x_t, eps_pred, t, sched, /*clamp_unit=*/true);
    PosteriorParams post = posterior_params(x_t, x0_hat, t, sched);

    if (spec.guidance_enabled()) {
        ConstraintEval ev = constraint_loss(to_unit(x0_hat), spec);
        bool finite = std::isfinite(ev.total);
        for (double g : ev.grad.v) {
            if (!std::isfinite(g)) { finite = false; break; }
        }
        if (!finite) {
            std::fprintf(stderr,
                         "[cmdiff] warning: non-finite constraint gradient at t=%d, "
                         "guidance skipped for this step\n", t);
            if (info) info->guidance_skipped = true;
        } else {
            // d x_unit / d x0_hat = 1/2 on the [-1,1] -> [0,1] map
            double k = spec.guidance_scale * post.variance * 0.5;
            for (size_t i = 0; i < post.mean.size(); ++i) {
                post.mean.v[i] -= k * ev.grad.v[i];
            }
            if (info) info->constraint_total = ev.total;
        }
    }

    if (t == 1) return post.mean;
    double sd = std::sqrt(post.variance);
    Tensor out = post.mean;
    for (double& v : out.v) v += sd * rng.normal();
    return out;
}

ConstraintSpec unguided_spec(int bins) {
    ConstraintSpec s;
    s.bins = bins;
    for (int c = 0; c < 3; ++c) {
        s.prior_hist[c].assign(bins, 1.0 / bins);
        s.prior_mean[c] = 0.5;
        s.prior_std[c] = 0.0;
    }
    s.lambda_ccl = 0.0;
    s.lambda_scl = 0.0;
    return s;
}

std::vector<TranslateResult> translate_batch(Denoiser& model, const DiffusionSchedule& sched,
                                             const std::vector<Tensor>& sources_norm,
                                             const std::vector<Tensor>& edges,
                                             Modality source_modality, DirectionLabel dir,
                                             const ConstraintSpec& spec, uint64_t seed,
                                             const std::vector<std::string>* stream_names) {
    if (sources_norm.empty()) throw ArgumentError("translate_batch: no sources");
    if (source_modality != dir.source()) {
        throw ArgumentError("translate_batch: direction " + dir.name() + " expects a " +
                            to_string(dir.source()) + " source, got " +
                            to_string(source_modality));
    }
    const bool cfc = model.config().cfc;
    if (cfc && edges.size() != sources_norm.size()) {
        throw ArgumentError("translate_batch: edges must accompany every source");
    }
    if (stream_names && stream_names->size() != sources_norm.size()) {
        throw ArgumentError("translate_batch: stream_names must match sources");
    }
    int n = static_cast<int>(sources_norm.size());
    int h = sources_norm.front().h, w = sources_norm.front().w;

    std::vector<RngStream> streams;
    streams.reserve(n);
    for (int i = 0; i < n; ++i) {
        std::string name = stream_names ? (*stream_names)[i] : std::to_string(i);
        streams.push_back(seed_stream(seed, "sampling/" + name));
    }

    // per-sample state x_t, initialized from pure noise
    std::vector<Tensor> x(n);
    for (int i = 0; i < n; ++i) {
        x[i] = Tensor::image(3, h, w);
        for (double& v : x[i].v) v = streams[i].normal();
    }

    Tensor source_stack = stack_images(sources_norm);
    EncoderFeatures feats;
    if (cfc) feats = model.encode_source(source_stack, source_modality);

    std::vector<int> labels(n, dir.id);
    std::vector<TranslateResult> out(n);

    for (int t = sched.T; t >= 1; --t) {
        // assemble the batched conditioned input
        Tensor z(n, cfc ? 7 : 6, h, w);
        size_t plane = static_cast<size_t>(h) * w;
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 3; ++c) {
                std::copy_n(x[i].plane(0, c), plane, z.plane(i, c));
                std::copy_n(sources_norm[i].plane(0, c), plane, z.plane(i, 3 + c));
            }
            if (cfc) std::copy_n(edges[i].plane(0, 0), plane, z.plane(i, 6));
        }
        std::vector<int> ts(n, t);
        Tensor eps = model.epsilon_predict(z, labels, source_modality, ts,
                                           cfc ? &feats : nullptr);
        for (int i = 0; i < n; ++i) {
            Tensor eps_i(1, 3, h, w);
            std::copy_n(eps.plane(i, 0), plane * 3, eps_i.data());
            GuidedStepInfo info;
            x[i] = guided_reverse_step(x[i], t, eps_i, spec, sched, streams[i], &info);
            if (info.guidance_skipped) ++out[i].guidance_skips;
        }
    }

    for (int i = 0; i < n; ++i) out[i].image_u8 = denormalize_to_u8(x[i]);
    return out;
}

TranslateResult translate(Denoiser& model, const DiffusionSchedule& sched,
                          const Tensor& source_norm, const Tensor& edges,
                          Modality source_modality, DirectionLabel dir,
                          const ConstraintSpec& spec, uint64_t seed) {
    std::vector<Tensor> sources{source_norm};
    std::vector<Tensor> edge_vec;
    if (model.config().cfc) edge_vec.push_back(edges);
    return translate_batch(model, sched, sources, edge_vec, source_modality, dir, spec,
                           seed)[0];
}

}  // namespace cmdiff
