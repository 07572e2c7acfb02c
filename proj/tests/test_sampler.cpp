#include <doctest.h>

#include <cmath>

#include "cmdiff/conditioning.hpp"
#include "cmdiff/sampler.hpp"

using namespace cmdiff;

namespace {

DenoiserConfig tiny_config(int image_size = 8, bool cfc = true) {
    DenoiserConfig c;
    c.image_size = image_size;
    c.base_width = 8;
    c.channel_mult = {1, 2};
    c.attention_resolutions = {image_size / 2};
    c.attention_channels = 8;
    c.embed_dim = 16;
    c.cfc = cfc;
    c.in_channels = cfc ? 7 : 6;
    return c;
}

ConstraintSpec prior_spec(int bins = 8) {
    ConstraintSpec s;
    s.bins = bins;
    for (int c = 0; c < 3; ++c) {
        s.prior_hist[c].assign(bins, 1.0 / bins);
        s.prior_mean[c] = 0.3;
        s.prior_std[c] = 0.1;
    }
    s.lambda_ccl = 20.0;
    s.lambda_scl = 20.0;
    return s;
}

Tensor random_image(RngStream& rng, int c, int hw, double lo, double hi) {
    Tensor t = Tensor::image(c, hw, hw);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("guided step with zero weights reproduces the plain step") {
    DiffusionSchedule sched = build_linear_schedule(10, 0.05, 0.4);
    RngStream data_rng(1);
    Tensor x_t = random_image(data_rng, 3, 8, -1.5, 1.5);
    Tensor eps = random_image(data_rng, 3, 8, -1, 1);
    ConstraintSpec spec = prior_spec();
    spec.lambda_ccl = 0;
    spec.lambda_scl = 0;

    for (int t : {2, 5, 10}) {
        RngStream a(42), b(42);
        Tensor plain = unguided_reverse_step(x_t, t, eps, sched, a);
        Tensor guided = guided_reverse_step(x_t, t, eps, spec, sched, b);
        for (size_t i = 0; i < plain.size(); ++i) CHECK(plain.v[i] == guided.v[i]);
    }
}

TEST_CASE("guidance scale zero also recovers the unguided trajectory") {
    DiffusionSchedule sched = build_linear_schedule(10, 0.05, 0.4);
    RngStream data_rng(2);
    Tensor x_t = random_image(data_rng, 3, 8, -1, 1);
    Tensor eps = random_image(data_rng, 3, 8, -1, 1);
    ConstraintSpec spec = prior_spec();
    spec.guidance_scale = 0.0;
    RngStream a(7), b(7);
    Tensor plain = unguided_reverse_step(x_t, 6, eps, sched, a);
    Tensor guided = guided_reverse_step(x_t, 6, eps, spec, sched, b);
    for (size_t i = 0; i < plain.size(); ++i) CHECK(plain.v[i] == guided.v[i]);
}

TEST_CASE("final step is deterministic") {
    DiffusionSchedule sched = build_linear_schedule(10, 0.05, 0.4);
    RngStream data_rng(3);
    Tensor x_t = random_image(data_rng, 3, 8, -1, 1);
    Tensor eps = random_image(data_rng, 3, 8, -1, 1);
    RngStream a(1), b(999);  // different streams: t=1 must not consume noise
    Tensor r1 = unguided_reverse_step(x_t, 1, eps, sched, a);
    Tensor r2 = unguided_reverse_step(x_t, 1, eps, sched, b);
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1.v[i] == r2.v[i]);
}

TEST_CASE("active guidance shifts the mean away from the plain step") {
    DiffusionSchedule sched = build_linear_schedule(10, 0.05, 0.4);
    RngStream data_rng(4);
    Tensor x_t = random_image(data_rng, 3, 8, -0.5, 1.5);
    Tensor eps = random_image(data_rng, 3, 8, -1, 1);
    ConstraintSpec spec = prior_spec();
    RngStream a(5), b(5);
    Tensor plain = unguided_reverse_step(x_t, 6, eps, sched, a);
    Tensor guided = guided_reverse_step(x_t, 6, eps, spec, sched, b);
    double diff = 0;
    for (size_t i = 0; i < plain.size(); ++i) diff += std::abs(plain.v[i] - guided.v[i]);
    CHECK(diff > 1e-9);
}

TEST_CASE("non-finite constraint gradients skip guidance instead of aborting") {
    DiffusionSchedule sched = build_linear_schedule(10, 0.05, 0.4);
    // x0_hat lands near zero; a one-hot prior at the top bin has no overlap,
    // so the bhattacharyya distance is +inf
    Tensor x_t = Tensor::image(3, 8, 8, -0.9);
    Tensor eps = Tensor::image(3, 8, 8, 0.0);
    ConstraintSpec spec = prior_spec();
    spec.metric = HistMetric::Bhattacharyya;
    for (int c = 0; c < 3; ++c) {
        spec.prior_hist[c].assign(spec.bins, 0.0);
        spec.prior_hist[c][spec.bins - 1] = 1.0;
    }
    RngStream a(6);
    GuidedStepInfo info;
    Tensor out = guided_reverse_step(x_t, 5, eps, spec, sched, a, &info);
    CHECK(info.guidance_skipped);
    for (double v : out.v) CHECK(std::isfinite(v));
}

TEST_CASE("translate") {
    DiffusionSchedule sched = build_linear_schedule_scaled(6);
    Denoiser model(tiny_config(), 99);
    RngStream data_rng(7);
    Tensor source = random_image(data_rng, 3, 8, -1, 1);
    Tensor edges = Tensor::image(1, 8, 8, 0.0);
    ConstraintSpec spec0 = unguided_spec();

    SUBCASE("unguided translate equals a hand-rolled reference loop bit-for-bit") {
        TranslateResult got = translate(model, sched, source, edges, Modality::VIS,
                                        DirectionLabel::vis_to_ir(), spec0, 11);

        // independent reference: plain ancestral loop, same stream discipline
        RngStream stream = seed_stream(11, "sampling/0");
        Tensor x = Tensor::image(3, 8, 8);
        for (double& v : x.v) v = stream.normal();
        EncoderFeatures feats = model.encode_source(source, Modality::VIS);
        for (int t = sched.T; t >= 1; --t) {
            Tensor z = assemble_input(x, source, edges);
            Tensor eps = model.epsilon_predict(z, {DirectionLabel::vis_to_ir().id},
                                               Modality::VIS, {t}, &feats);
            x = unguided_reverse_step(x, t, eps, sched, stream);
        }
        Tensor expect = denormalize_to_u8(x);
        REQUIRE(got.image_u8.same_shape(expect));
        for (size_t i = 0; i < expect.size(); ++i) CHECK(got.image_u8.v[i] == expect.v[i]);
    }
    SUBCASE("output shape matches the source with 3 channels") {
        TranslateResult r = translate(model, sched, source, edges, Modality::VIS,
                                      DirectionLabel::vis_to_ir(), spec0, 3);
        CHECK(r.image_u8.c == 3);
        CHECK(r.image_u8.h == 8);
        CHECK(r.image_u8.w == 8);
        for (double v : r.image_u8.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 255.0);
        }
    }
    SUBCASE("direction/source modality mismatch is rejected") {
        CHECK_THROWS_AS(translate(model, sched, source, edges, Modality::VIS,
                                  DirectionLabel::ir_to_vis(), spec0, 3),
                        ArgumentError);
    }
    SUBCASE("results are independent of batch composition") {
        RngStream rng2(8);
        Tensor s2 = random_image(rng2, 3, 8, -1, 1);
        std::vector<std::string> names{"a", "b"};
        std::vector<Tensor> sources{source, s2};
        std::vector<Tensor> edge_maps{edges, edges};
        auto batch = translate_batch(model, sched, sources, edge_maps, Modality::VIS,
                                     DirectionLabel::vis_to_ir(), spec0, 13, &names);

        std::vector<std::string> only_b{"b"};
        std::vector<Tensor> src_b{s2};
        std::vector<Tensor> edge_b{edges};
        auto solo = translate_batch(model, sched, src_b, edge_b, Modality::VIS,
                                    DirectionLabel::vis_to_ir(), spec0, 13, &only_b);
        for (size_t i = 0; i < solo[0].image_u8.size(); ++i) {
            CHECK(batch[1].image_u8.v[i] == solo[0].image_u8.v[i]);
        }
    }
    SUBCASE("guided and unguided trajectories diverge under a seed match") {
        ConstraintSpec spec20 = prior_spec();
        TranslateResult plain = translate(model, sched, source, edges, Modality::VIS,
                                          DirectionLabel::vis_to_ir(), spec0, 17);
        TranslateResult guided = translate(model, sched, source, edges, Modality::VIS,
                                           DirectionLabel::vis_to_ir(), spec20, 17);
        double diff = 0;
        for (size_t i = 0; i < plain.image_u8.size(); ++i) {
            diff += std::abs(plain.image_u8.v[i] - guided.image_u8.v[i]);
        }
        CHECK(diff > 0.0);
    }
    SUBCASE("cfc-free model translates without edge maps") {
        Denoiser bare(tiny_config(8, false), 100);
        std::vector<Tensor> sources{source};
        std::vector<Tensor> no_edges;
        auto r = translate_batch(bare, sched, sources, no_edges, Modality::VIS,
                                 DirectionLabel::vis_to_ir(), spec0, 3);
        CHECK(r[0].image_u8.c == 3);
    }
}
