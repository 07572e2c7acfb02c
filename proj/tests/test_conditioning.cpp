#include <doctest.h>

#include <cmath>

#include "cmdiff/conditioning.hpp"
#include "cmdiff/rng.hpp"

using namespace cmdiff;

TEST_CASE("gray replication") {
    SUBCASE("constant value fills all three channels") {
        Tensor g = Tensor::image(1, 2, 2, 0.4);
        Tensor rgb = replicate_gray_to_rgb(g);
        CHECK(rgb.c == 3);
        for (double v : rgb.v) CHECK(v == 0.4);
    }
    SUBCASE("channels are pairwise equal and reproduce the input") {
        Tensor g = Tensor::image(1, 2, 2);
        g.v = {0.0, 0.25, 0.5, 0.75};  // 2x2 ramp
        Tensor rgb = replicate_gray_to_rgb(g);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < 2; ++y) {
                for (int x = 0; x < 2; ++x) {
                    CHECK(rgb.at(0, c, y, x) == g.at(0, 0, y, x));
                }
            }
        }
    }
    SUBCASE("3-channel input is rejected") {
        CHECK_THROWS_AS(replicate_gray_to_rgb(Tensor::image(3, 2, 2)), ArgumentError);
    }
}

TEST_CASE("sobel edges") {
    SUBCASE("constant image has zero response") {
        Tensor img = Tensor::image(3, 8, 8, 0.3);
        Tensor e = detect_edges(img, EdgeDetector::Sobel);
        for (double v : e.v) CHECK(v == 0.0);
    }
    SUBCASE("vertical step: maximal response along the step, zero far away") {
        // luminance 0 on the left half, 1 on the right; stored scale is [-1,1]
        Tensor img = Tensor::image(3, 8, 8, -1.0);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 4; x < 8; ++x) img.at(0, c, y, x) = 1.0;
        Tensor e = detect_edges(img, EdgeDetector::Sobel);
        // |gx| = 4 at columns 3 and 4 -> normalized 4/(4*sqrt(2))
        double expect = 1.0 / std::sqrt(2.0);
        for (int y = 0; y < 8; ++y) {
            CHECK(e.at(0, 0, y, 3) == doctest::Approx(expect).epsilon(1e-12));
            CHECK(e.at(0, 0, y, 4) == doctest::Approx(expect).epsilon(1e-12));
            CHECK(e.at(0, 0, y, 0) == doctest::Approx(0.0));
            CHECK(e.at(0, 0, y, 7) == doctest::Approx(0.0));
        }
    }
    SUBCASE("matches a hand-evaluated 3x3 kernel oracle") {
        RngStream rng(12);
        Tensor img = Tensor::image(3, 6, 6);
        for (double& v : img.v) v = rng.uniform(-1, 1);
        Tensor e = detect_edges(img, EdgeDetector::Sobel);

        // oracle: independent re-implementation on the [0,1] luminance
        auto lum = [&](int y, int x) {
            y = std::clamp(y, 0, 5);
            x = std::clamp(x, 0, 5);
            double l = 0.299 * img.at(0, 0, y, x) + 0.587 * img.at(0, 1, y, x) +
                       0.114 * img.at(0, 2, y, x);
            return std::clamp((l + 1.0) / 2.0, 0.0, 1.0);
        };
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) {
                double gx = (lum(y - 1, x + 1) + 2 * lum(y, x + 1) + lum(y + 1, x + 1)) -
                            (lum(y - 1, x - 1) + 2 * lum(y, x - 1) + lum(y + 1, x - 1));
                double gy = (lum(y + 1, x - 1) + 2 * lum(y + 1, x) + lum(y + 1, x + 1)) -
                            (lum(y - 1, x - 1) + 2 * lum(y - 1, x) + lum(y - 1, x + 1));
                double mag = std::min(1.0, std::sqrt(gx * gx + gy * gy) / (4.0 * std::sqrt(2.0)));
                CHECK(e.at(0, 0, y, x) == doctest::Approx(mag).epsilon(1e-12));
            }
        }
    }
    SUBCASE("translation equivariance on interior pixels") {
        RngStream rng(13);
        Tensor img = Tensor::image(3, 12, 12);
        for (double& v : img.v) v = rng.uniform(-1, 1);
        Tensor shifted = Tensor::image(3, 12, 12);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 12; ++y)
                for (int x = 0; x < 12; ++x)
                    shifted.at(0, c, y, x) = img.at(0, c, y, x == 0 ? 0 : x - 1);
        Tensor e0 = detect_edges(img, EdgeDetector::Sobel);
        Tensor e1 = detect_edges(shifted, EdgeDetector::Sobel);
        for (int y = 2; y < 10; ++y) {
            for (int x = 3; x < 10; ++x) {
                CHECK(e1.at(0, 0, y, x) == doctest::Approx(e0.at(0, 0, y, x - 1)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("canny edges") {
    SUBCASE("constant image is empty") {
        Tensor img = Tensor::image(3, 16, 16, 0.1);
        Tensor e = detect_edges(img, EdgeDetector::Canny);
        for (double v : e.v) CHECK(v == 0.0);
    }
    SUBCASE("strong step edge produces a binary line") {
        Tensor img = Tensor::image(3, 16, 16, -1.0);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 16; ++y)
                for (int x = 8; x < 16; ++x) img.at(0, c, y, x) = 1.0;
        Tensor e = detect_edges(img, EdgeDetector::Canny);
        bool any = false;
        for (double v : e.v) {
            CHECK((v == 0.0 || v == 1.0));
            if (v == 1.0) any = true;
        }
        CHECK(any);
        // the response stays near the step
        for (int y = 4; y < 12; ++y) {
            CHECK(e.at(0, 0, y, 0) == 0.0);
            CHECK(e.at(0, 0, y, 15) == 0.0);
        }
    }
}

TEST_CASE("external edge ingestion") {
    Tensor u8 = Tensor::image(1, 2, 2);
    u8.v = {0.0, 51.0, 127.0, 255.0};
    Tensor e = external_edges_from_u8(u8);
    CHECK(e.v[0] == doctest::Approx(0.0));
    CHECK(e.v[1] == doctest::Approx(0.2));
    CHECK(e.v[3] == doctest::Approx(1.0));
    CHECK_THROWS_AS(detect_edges(Tensor::image(3, 4, 4), EdgeDetector::External), ArgumentError);
}

TEST_CASE("input assembly") {
    RngStream rng(14);
    Tensor noisy = Tensor::image(3, 8, 8);
    Tensor source = Tensor::image(3, 8, 8);
    Tensor edges = Tensor::image(1, 8, 8);
    for (double& v : noisy.v) v = rng.uniform(-1, 1);
    for (double& v : source.v) v = rng.uniform(-1, 1);
    for (double& v : edges.v) v = rng.uniform(0, 1);

    Tensor z = assemble_input(noisy, source, edges);
    SUBCASE("7-channel layout") {
        CHECK(z.c == 7);
        CHECK(z.h == 8);
        CHECK(z.w == 8);
    }
    SUBCASE("channel slices recover the inputs exactly") {
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < 64; ++i) {
                CHECK(z.plane(0, c)[i] == noisy.plane(0, c)[i]);
                CHECK(z.plane(0, 3 + c)[i] == source.plane(0, c)[i]);
            }
        }
        for (int i = 0; i < 64; ++i) CHECK(z.plane(0, 6)[i] == edges.plane(0, 0)[i]);
    }
    SUBCASE("every output element equals one input element (index-map oracle)") {
        for (int c = 0; c < 7; ++c) {
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) {
                    double expect = c < 3 ? noisy.at(0, c, y, x)
                                  : c < 6 ? source.at(0, c - 3, y, x)
                                          : edges.at(0, 0, y, x);
                    CHECK(z.at(0, c, y, x) == expect);
                }
            }
        }
    }
    SUBCASE("dimension mismatches rejected") {
        CHECK_THROWS_AS(assemble_input(noisy, Tensor::image(3, 4, 4), edges), ArgumentError);
        CHECK_THROWS_AS(assemble_input(noisy, source, Tensor::image(1, 4, 4)), ArgumentError);
        CHECK_THROWS_AS(assemble_input(Tensor::image(1, 8, 8), source, edges), ArgumentError);
    }
    SUBCASE("edge-free variant is 6 channels") {
        Tensor z6 = assemble_input_no_edges(noisy, source);
        CHECK(z6.c == 6);
        for (int i = 0; i < 64; ++i) CHECK(z6.plane(0, 5)[i] == source.plane(0, 2)[i]);
    }
}

TEST_CASE("pixel scale maps") {
    SUBCASE("8-bit endpoints") {
        Tensor u8 = Tensor::image(1, 1, 3);
        u8.v = {0.0, 127.5, 255.0};
        Tensor n = normalize_u8(u8);
        CHECK(n.v[0] == doctest::Approx(-1.0));
        CHECK(n.v[1] == doctest::Approx(0.0));
        CHECK(n.v[2] == doctest::Approx(1.0));
    }
    SUBCASE("denormalize rounds half up and round-trips every 8-bit value") {
        Tensor u8 = Tensor::image(1, 16, 16);
        for (int i = 0; i < 256; ++i) u8.v[i] = i;
        Tensor rt = denormalize_to_u8(normalize_u8(u8));
        for (int i = 0; i < 256; ++i) CHECK(rt.v[i] == doctest::Approx(i));
    }
    SUBCASE("out-of-range values clamp before quantization") {
        Tensor t = Tensor::image(1, 1, 2);
        t.v = {-3.0, 2.5};
        Tensor u8 = denormalize_to_u8(t);
        CHECK(u8.v[0] == 0.0);
        CHECK(u8.v[1] == 255.0);
    }
    SUBCASE("unit-range map") {
        Tensor t = Tensor::image(1, 1, 3);
        t.v = {-1.0, 0.0, 3.0};
        Tensor u = to_unit(t);
        CHECK(u.v[0] == 0.0);
        CHECK(u.v[1] == 0.5);
        CHECK(u.v[2] == 1.0);
    }
}

TEST_CASE("direction labels") {
    CHECK(DirectionLabel::ir_to_vis().id == 0);
    CHECK(DirectionLabel::ir_to_vis().target == Modality::VIS);
    CHECK(DirectionLabel::ir_to_vis().source() == Modality::IR);
    CHECK(DirectionLabel::vis_to_ir().id == 1);
    CHECK(DirectionLabel::vis_to_ir().target == Modality::IR);
    CHECK(DirectionLabel::from_string("ir2vis").id == 0);
    CHECK(DirectionLabel::from_string("vis2ir").id == 1);
    CHECK_THROWS_AS(DirectionLabel::from_string("sideways"), ConfigError);
    CHECK_THROWS_AS(DirectionLabel::from_id(2), ArgumentError);
}
