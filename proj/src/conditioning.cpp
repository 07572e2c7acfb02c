#include "cmdiff/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>

namespace cmdiff {

Modality modality_from_string(const std::string& s) {
    if (s == "ir" || s == "IR") return Modality::IR;
    if (s == "vis" || s == "VIS") return Modality::VIS;
    throw ConfigError("unknown modality '" + s + "' (expected ir|vis)");
}

std::string to_string(Modality m) { return m == Modality::IR ? "ir" : "vis"; }

DirectionLabel DirectionLabel::from_id(int id) {
    if (id == 0) return ir_to_vis();
    if (id == 1) return vis_to_ir();
    throw ArgumentError("direction label id must be 0 or 1");
}

DirectionLabel DirectionLabel::from_string(const std::string& s) {
    if (s == "ir2vis") return ir_to_vis();
    if (s == "vis2ir") return vis_to_ir();
    throw ConfigError("unknown direction '" + s + "' (expected ir2vis|vis2ir)");
}

Tensor replicate_gray_to_rgb(const Tensor& img) {
    if (img.c != 1) {
        throw ArgumentError("replicate_gray_to_rgb: input must have 1 channel, got " +
                            std::to_string(img.c));
    }
    Tensor out(img.n, 3, img.h, img.w);
    size_t plane = static_cast<size_t>(img.h) * img.w;
    for (int n = 0; n < img.n; ++n) {
        for (int c = 0; c < 3; ++c) {
            std::memcpy(out.plane(n, c), img.plane(n, 0), plane * sizeof(double));
        }
    }
    return out;
}

EdgeDetector edge_detector_from_string(const std::string& s) {
    if (s == "sobel") return EdgeDetector::Sobel;
    if (s == "canny") return EdgeDetector::Canny;
    if (s == "external") return EdgeDetector::External;
    throw ConfigError("unknown edge detector '" + s + "' (expected sobel|canny|external)");
}

std::string to_string(EdgeDetector d) {
    switch (d) {
        case EdgeDetector::Sobel: return "sobel";
        case EdgeDetector::Canny: return "canny";
        case EdgeDetector::External: return "external";
    }
    return "?";
}

Tensor luminance_unit(const Tensor& img) {
    if (img.c != 3 && img.c != 1) throw ArgumentError("luminance: expected 1 or 3 channels");
    Tensor lum(img.n, 1, img.h, img.w);
    size_t plane = static_cast<size_t>(img.h) * img.w;
    for (int n = 0; n < img.n; ++n) {
        double* out = lum.plane(n, 0);
        if (img.c == 1) {
            const double* p = img.plane(n, 0);
            for (size_t i = 0; i < plane; ++i) out[i] = (p[i] + 1.0) * 0.5;
        } else {
            const double* r = img.plane(n, 0);
            const double* g = img.plane(n, 1);
            const double* b = img.plane(n, 2);
            for (size_t i = 0; i < plane; ++i) {
                double y = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
                out[i] = (y + 1.0) * 0.5;
            }
        }
        for (size_t i = 0; i < plane; ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
    }
    return lum;
}

namespace {

// Replicate-padded 3x3 Sobel gradients of a single-channel plane.
void sobel_gradients(const double* lum, int h, int w, std::vector<double>& gx,
                     std::vector<double>& gy) {
    gx.assign(static_cast<size_t>(h) * w, 0.0);
    gy.assign(static_cast<size_t>(h) * w, 0.0);
    auto px = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return lum[static_cast<size_t>(y) * w + x];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double a = px(y - 1, x - 1), b = px(y - 1, x), c = px(y - 1, x + 1);
            double d = px(y, x - 1), f = px(y, x + 1);
            double g = px(y + 1, x - 1), i = px(y + 1, x), j = px(y + 1, x + 1);
            gx[static_cast<size_t>(y) * w + x] = (c + 2.0 * f + j) - (a + 2.0 * d + g);
            gy[static_cast<size_t>(y) * w + x] = (g + 2.0 * i + j) - (a + 2.0 * b + c);
        }
    }
}

// Max gradient magnitude for [0,1] input is 4*sqrt(2).
constexpr double kSobelNorm = 5.65685424949238;

Tensor sobel_edges(const Tensor& lum) {
    Tensor out(lum.n, 1, lum.h, lum.w);
    std::vector<double> gx, gy;
    for (int n = 0; n < lum.n; ++n) {
        sobel_gradients(lum.plane(n, 0), lum.h, lum.w, gx, gy);
        double* o = out.plane(n, 0);
        for (size_t i = 0; i < gx.size(); ++i) {
            o[i] = std::min(1.0, std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]) / kSobelNorm);
        }
    }
    return out;
}

// 5x5 Gaussian (sigma = 1.0), separable, replicate padding.
void gaussian5(const double* src, int h, int w, std::vector<double>& dst) {
    static const double k[5] = {0.06136, 0.24477, 0.38774, 0.24477, 0.06136};
    std::vector<double> tmp(static_cast<size_t>(h) * w);
    dst.assign(static_cast<size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -2; d <= 2; ++d) {
                int xx = std::clamp(x + d, 0, w - 1);
                s += k[d + 2] * src[static_cast<size_t>(y) * w + xx];
            }
            tmp[static_cast<size_t>(y) * w + x] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -2; d <= 2; ++d) {
                int yy = std::clamp(y + d, 0, h - 1);
                s += k[d + 2] * tmp[static_cast<size_t>(yy) * w + x];
            }
            dst[static_cast<size_t>(y) * w + x] = s;
        }
    }
}

Tensor canny_edges(const Tensor& lum, const CannyParams& params) {
    int h = lum.h, w = lum.w;
    Tensor out(lum.n, 1, h, w);
    std::vector<double> smooth, gx, gy;
    for (int n = 0; n < lum.n; ++n) {
        gaussian5(lum.plane(n, 0), h, w, smooth);
        sobel_gradients(smooth.data(), h, w, gx, gy);

        std::vector<double> mag(static_cast<size_t>(h) * w);
        for (size_t i = 0; i < mag.size(); ++i) {
            mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]) / kSobelNorm;
        }

        // Non-maximum suppression along the quantized gradient direction.
        std::vector<double> thin(static_cast<size_t>(h) * w, 0.0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                size_t i = static_cast<size_t>(y) * w + x;
                if (mag[i] <= 0.0) continue;
                double angle = std::atan2(gy[i], gx[i]);
                double deg = angle * 180.0 / 3.14159265358979323846;
                if (deg < 0) deg += 180.0;
                int dx1, dy1;
                if (deg < 22.5 || deg >= 157.5) { dx1 = 1; dy1 = 0; }
                else if (deg < 67.5)            { dx1 = 1; dy1 = 1; }
                else if (deg < 112.5)           { dx1 = 0; dy1 = 1; }
                else                            { dx1 = -1; dy1 = 1; }
                auto m = [&](int yy, int xx) {
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
                    return mag[static_cast<size_t>(yy) * w + xx];
                };
                if (mag[i] >= m(y + dy1, x + dx1) && mag[i] >= m(y - dy1, x - dx1)) {
                    thin[i] = mag[i];
                }
            }
        }

        // Double threshold + hysteresis from strong pixels.
        std::vector<uint8_t> state(static_cast<size_t>(h) * w, 0);  // 0 none, 1 weak, 2 strong
        std::queue<size_t> q;
        for (size_t i = 0; i < thin.size(); ++i) {
            if (thin[i] >= params.high) { state[i] = 2; q.push(i); }
            else if (thin[i] >= params.low) state[i] = 1;
        }
        while (!q.empty()) {
            size_t i = q.front(); q.pop();
            int y = static_cast<int>(i) / w, x = static_cast<int>(i) % w;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    size_t j = static_cast<size_t>(yy) * w + xx;
                    if (state[j] == 1) { state[j] = 2; q.push(j); }
                }
            }
        }
        double* o = out.plane(n, 0);
        for (size_t i = 0; i < state.size(); ++i) o[i] = (state[i] == 2) ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace

Tensor detect_edges(const Tensor& img, EdgeDetector detector, const CannyParams& params) {
    if (detector == EdgeDetector::External) {
        throw ArgumentError("detect_edges: external maps are loaded from disk, not computed");
    }
    Tensor lum = luminance_unit(img);
    return detector == EdgeDetector::Sobel ? sobel_edges(lum) : canny_edges(lum, params);
}

Tensor external_edges_from_u8(const Tensor& edge_u8) {
    if (edge_u8.c != 1) throw ArgumentError("external edge maps must be single-channel");
    Tensor out = edge_u8;
    for (double& x : out.v) x = std::clamp(x / 255.0, 0.0, 1.0);
    return out;
}

Tensor assemble_input(const Tensor& noisy_target, const Tensor& source, const Tensor& edges) {
    if (noisy_target.c != 3 || source.c != 3 || edges.c != 1) {
        throw ArgumentError("assemble_input: expected 3+3+1 channels");
    }
    if (noisy_target.h != source.h || noisy_target.w != source.w ||
        noisy_target.h != edges.h || noisy_target.w != edges.w ||
        noisy_target.n != source.n || noisy_target.n != edges.n) {
        throw ArgumentError("assemble_input: spatial/batch dims must match");
    }
    Tensor out(noisy_target.n, 7, noisy_target.h, noisy_target.w);
    size_t plane = static_cast<size_t>(out.h) * out.w;
    for (int n = 0; n < out.n; ++n) {
        for (int c = 0; c < 3; ++c) {
            std::memcpy(out.plane(n, c), noisy_target.plane(n, c), plane * sizeof(double));
            std::memcpy(out.plane(n, 3 + c), source.plane(n, c), plane * sizeof(double));
        }
        std::memcpy(out.plane(n, 6), edges.plane(n, 0), plane * sizeof(double));
    }
    return out;
}

Tensor assemble_input_no_edges(const Tensor& noisy_target, const Tensor& source) {
    if (noisy_target.c != 3 || source.c != 3) {
        throw ArgumentError("assemble_input_no_edges: expected 3+3 channels");
    }
    if (noisy_target.h != source.h || noisy_target.w != source.w ||
        noisy_target.n != source.n) {
        throw ArgumentError("assemble_input_no_edges: dims must match");
    }
    Tensor out(noisy_target.n, 6, noisy_target.h, noisy_target.w);
    size_t plane = static_cast<size_t>(out.h) * out.w;
    for (int n = 0; n < out.n; ++n) {
        for (int c = 0; c < 3; ++c) {
            std::memcpy(out.plane(n, c), noisy_target.plane(n, c), plane * sizeof(double));
            std::memcpy(out.plane(n, 3 + c), source.plane(n, c), plane * sizeof(double));
        }
    }
    return out;
}

Tensor normalize_u8(const Tensor& img_u8) {
    Tensor out = img_u8;
    for (double& x : out.v) x = x / 127.5 - 1.0;
    return out;
}

Tensor denormalize_to_u8(const Tensor& img) {
    Tensor out = img;
    for (double& x : out.v) {
        double y = (std::clamp(x, -1.0, 1.0) + 1.0) * 127.5;
        x = std::floor(y + 0.5);  // round half up
    }
    return out;
}

Tensor to_unit(const Tensor& img) {
    Tensor out = img;
    for (double& x : out.v) x = std::clamp((x + 1.0) * 0.5, 0.0, 1.0);
    return out;
}

}  // namespace cmdiff
