#pragma once

#include <string>

#include "cmdiff/tensor.hpp"

namespace cmdiff {

enum class Modality { IR, VIS };

Modality modality_from_string(const std::string& s);
std::string to_string(Modality m);
inline Modality other(Modality m) { return m == Modality::IR ? Modality::VIS : Modality::IR; }

// Translation direction: id 0 = IR->VIS (generates VIS), id 1 = VIS->IR.
struct DirectionLabel {
    int id = 0;
    Modality target = Modality::VIS;

    Modality source() const { return other(target); }

    static DirectionLabel ir_to_vis() { return {0, Modality::VIS}; }
    static DirectionLabel vis_to_ir() { return {1, Modality::IR}; }
    static DirectionLabel from_id(int id);
    static DirectionLabel from_string(const std::string& s);  // "ir2vis" | "vis2ir"
    std::string name() const { return id == 0 ? "ir2vis" : "vis2ir"; }
};

// Duplicate a single-channel image across three channels.
Tensor replicate_gray_to_rgb(const Tensor& img);

enum class EdgeDetector { Sobel, Canny, External };

EdgeDetector edge_detector_from_string(const std::string& s);
std::string to_string(EdgeDetector d);

struct CannyParams {
    double low = 0.1;   // thresholds on normalized gradient magnitude
    double high = 0.3;
};

// Edge map in [0,1] from a [-1,1]-normalized image. Sobel returns normalized
// gradient magnitude of the luminance channel; Canny returns a binary map.
// External maps are loaded from disk by the data layer, not computed here.
Tensor detect_edges(const Tensor& img, EdgeDetector detector, const CannyParams& params = {});

// Rescale an 8-bit grayscale edge file to [0,1].
Tensor external_edges_from_u8(const Tensor& edge_u8);

// The 7-channel network input: [noisy target | source | edges].
Tensor assemble_input(const Tensor& noisy_target, const Tensor& source, const Tensor& edges);

// 6-channel variant used when cross-modality feature control is disabled.
Tensor assemble_input_no_edges(const Tensor& noisy_target, const Tensor& source);

// 8-bit <-> [-1,1] pixel scale. Images train on [-1,1]; constraints use [0,1].
Tensor normalize_u8(const Tensor& img_u8);       // x/127.5 - 1
Tensor denormalize_to_u8(const Tensor& img);     // clamp, (x+1)*127.5, round half up
Tensor to_unit(const Tensor& img);               // [-1,1] -> [0,1], clamped

// Luminance on [0,1] from a [-1,1] RGB image.
Tensor luminance_unit(const Tensor& img);

}  // namespace cmdiff
