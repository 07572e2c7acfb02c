#pragma once

#include <string>
#include <vector>

#include "cmdiff/conditioning.hpp"
#include "cmdiff/nn.hpp"

namespace cmdiff {

// Defaults are the full-scale profile (width 128, attention at {8,16,32} with
// 64 channels, 256 px); desk() is the small profile used for experiments.
struct DenoiserConfig {
    int image_size = 256;
    int in_channels = 7;   // 6 when cfc is off (no edge channel)
    int out_channels = 3;
    int base_width = 128;
    std::vector<int> channel_mult = {1, 1, 2, 2, 4, 4};
    std::vector<int> attention_resolutions = {8, 16, 32};
    int attention_channels = 64;
    int embed_dim = 512;
    bool tdg = true;  // learned direction embedding added to the time embedding
    bool cfc = true;  // source encoders + cross-attention + edge channel

    int depth() const { return static_cast<int>(channel_mult.size()); }
    int width(int level) const { return base_width * channel_mult[level]; }
    int resolution(int level) const { return image_size >> level; }
    bool attn_at(int level) const;

    void validate() const;

    // Small profile for 32x32 experiments on one machine.
    static DenoiserConfig desk(int image_size = 32, bool tdg = true, bool cfc = true);
    // Full-scale profile: width 128, attention {8,16,32} @ 64 channels, 256^2.
    static DenoiserConfig full();

    std::string to_json_string() const;
    static DenoiserConfig from_json_string(const std::string& text);
};

// Per-level feature maps from a source-modality encoder, aligned with the
// denoiser's attention sites.
struct EncoderFeatures {
    std::vector<Tensor> level;
};

// Encoder tower over the source image; architecture mirrors the denoiser's
// down path, parameters are per-modality.
class SourceEncoder {
public:
    SourceEncoder() = default;
    SourceEncoder(ParamRegistry& reg, const std::string& name, const DenoiserConfig& cfg,
                  RngStream& rng);

    EncoderFeatures forward(const Tensor& source3);
    void backward(const std::vector<Tensor>& g_features);

private:
    const DenoiserConfig* cfg_ = nullptr;
    Conv2d stem_;
    std::vector<Conv2d> down_;
    std::vector<ResBlock> res_;
};

// Noise predictor eps(Z, J, t): conditional U-Net with direction embedding
// and cross-modality feature control.
class Denoiser {
public:
    Denoiser(const DenoiserConfig& cfg, uint64_t init_seed);
    Denoiser(const Denoiser&) = delete;
    Denoiser& operator=(const Denoiser&) = delete;

    const DenoiserConfig& config() const { return cfg_; }
    ParamRegistry& params() { return reg_; }

    // Learned 2 x embed_dim direction table, one row per label id.
    Tensor direction_embedding(const std::vector<int>& labels) const;

    // Runs the source encoder for the given modality. Sampling computes this
    // once per trajectory since the source does not change across steps.
    EncoderFeatures encode_source(const Tensor& source3, Modality source_modality);

    // z: [N, in_channels, H, W] assembled input; ts/labels one entry per item.
    // With tdg off the labels only pick nothing (the embedding is skipped);
    // the encoder choice always follows source_modality.
    Tensor epsilon_predict(const Tensor& z, const std::vector<int>& labels,
                           Modality source_modality, const std::vector<int>& ts,
                           const EncoderFeatures* precomputed = nullptr);

    // Accumulates parameter gradients for the last epsilon_predict call.
    void backward(const Tensor& g_eps);

private:
    DenoiserConfig cfg_;
    ParamRegistry reg_;

    Linear time_l1_, time_l2_;
    SiLU time_act_;
    Param* dir_table_ = nullptr;
    Linear dir_proj_;

    Conv2d stem_;
    std::vector<Conv2d> down_;          // level i>0: width(i-1) -> width(i), stride 2
    std::vector<ResBlock> dres_;
    std::vector<CrossAttention> dattn_;
    ResBlock mid1_, mid2_;
    CrossAttention mid_attn_;
    bool has_mid_attn_ = false;
    std::vector<ResBlock> ures_;        // 2*width(i) -> width(i)
    std::vector<CrossAttention> uattn_;
    std::vector<Conv2d> up_;            // level i>0: width(i) -> width(i-1) after nearest x2
    GroupNorm out_norm_;
    SiLU out_act_;
    Conv2d out_conv_;

    SourceEncoder enc_ir_, enc_vis_;

    // forward caches
    std::vector<int> last_labels_;
    Modality last_src_ = Modality::IR;
    bool last_used_precomputed_ = false;
    EncoderFeatures feats_;
    std::vector<Tensor> g_skip_;
};

}  // namespace cmdiff
