#include "cmdiff/denoiser.hpp"

#include <algorithm>
#include <cstring>

#include <json.hpp>

namespace cmdiff {

using nlohmann::json;

bool DenoiserConfig::attn_at(int level) const {
    if (!cfc) return false;
    int res = resolution(level);
    return std::find(attention_resolutions.begin(), attention_resolutions.end(), res) !=
           attention_resolutions.end();
}

void DenoiserConfig::validate() const {
    if (depth() < 1) throw ConfigError("DenoiserConfig: channel_mult must be non-empty");
    if (image_size >> (depth() - 1) < 4) {
        throw ConfigError("DenoiserConfig: too many levels for image size");
    }
    if (image_size % (1 << (depth() - 1)) != 0) {
        throw ConfigError("DenoiserConfig: image size must be divisible by 2^(depth-1)");
    }
    int expected_in = cfc ? 7 : 6;
    if (in_channels != expected_in) {
        throw ConfigError("DenoiserConfig: in_channels must be " + std::to_string(expected_in) +
                          (cfc ? " with" : " without") + " cfc");
    }
    if (out_channels != 3) throw ConfigError("DenoiserConfig: out_channels must be 3");
    for (int r : attention_resolutions) {
        bool found = false;
        for (int i = 0; i < depth(); ++i)
            if (resolution(i) == r) found = true;
        if (!found) {
            throw ConfigError("DenoiserConfig: attention resolution " + std::to_string(r) +
                              " is not a produced feature-map size");
        }
    }
    if (base_width < 4 || embed_dim < 4 || attention_channels < 1) {
        throw ConfigError("DenoiserConfig: widths too small");
    }
}

DenoiserConfig DenoiserConfig::desk(int image_size, bool tdg, bool cfc) {
    DenoiserConfig c;
    c.image_size = image_size;
    c.base_width = 32;
    c.channel_mult = {1, 1, 2};
    c.attention_resolutions = {8, 16};
    c.attention_channels = 32;
    c.embed_dim = 128;
    c.tdg = tdg;
    c.cfc = cfc;
    c.in_channels = cfc ? 7 : 6;
    return c;
}

DenoiserConfig DenoiserConfig::full() {
    return DenoiserConfig{};  // the defaults are the full-scale profile
}

std::string DenoiserConfig::to_json_string() const {
    json j;
    j["image_size"] = image_size;
    j["in_channels"] = in_channels;
    j["out_channels"] = out_channels;
    j["base_width"] = base_width;
    j["channel_mult"] = channel_mult;
    j["attention_resolutions"] = attention_resolutions;
    j["attention_channels"] = attention_channels;
    j["embed_dim"] = embed_dim;
    j["tdg"] = tdg;
    j["cfc"] = cfc;
    return j.dump(2);
}

DenoiserConfig DenoiserConfig::from_json_string(const std::string& text) {
    json j = json::parse(text);
    DenoiserConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
    c.out_channels = j.at("out_channels").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.channel_mult = j.at("channel_mult").get<std::vector<int>>();
    c.attention_resolutions = j.at("attention_resolutions").get<std::vector<int>>();
    c.attention_channels = j.at("attention_channels").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.tdg = j.at("tdg").get<bool>();
    c.cfc = j.at("cfc").get<bool>();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// SourceEncoder
// ---------------------------------------------------------------------------

SourceEncoder::SourceEncoder(ParamRegistry& reg, const std::string& name,
                             const DenoiserConfig& cfg, RngStream& rng)
    : cfg_(&cfg), stem_(reg, name + ".stem", 3, cfg.width(0), 3, 1, rng) {
    int L = cfg.depth();
    down_.resize(L);
    res_.reserve(L);
    for (int i = 0; i < L; ++i) {
        if (i > 0) {
            down_[i] = Conv2d(reg, name + ".down" + std::to_string(i), cfg.width(i - 1),
                              cfg.width(i), 3, 2, rng);
        }
        res_.emplace_back(reg, name + ".res" + std::to_string(i), cfg.width(i),
                          cfg.width(i), 0, rng);
    }
}

EncoderFeatures SourceEncoder::forward(const Tensor& source3) {
    EncoderFeatures f;
    Tensor h = stem_.forward(source3);
    for (int i = 0; i < cfg_->depth(); ++i) {
        if (i > 0) h = down_[i].forward(h);
        h = res_[i].forward(h, nullptr);
        f.level.push_back(h);
    }
    return f;
}

void SourceEncoder::backward(const std::vector<Tensor>& g_features) {
    Tensor carry;  // gradient arriving from the level below via its down conv
    for (int i = cfg_->depth() - 1; i >= 0; --i) {
        Tensor gi = g_features[i];  // attention contributions, may be empty
        if (!carry.empty()) {
            if (gi.empty()) gi = std::move(carry);
            else
                for (size_t k = 0; k < gi.size(); ++k) gi.v[k] += carry.v[k];
        }
        carry = Tensor();
        if (gi.empty()) continue;  // no gradient reaches this level or above
        Tensor gx = res_[i].backward(gi, nullptr);
        if (i > 0) {
            carry = down_[i].backward(gx);
        } else {
            stem_.backward(gx, false);
        }
    }
}

// ---------------------------------------------------------------------------
// Denoiser
// ---------------------------------------------------------------------------

Denoiser::Denoiser(const DenoiserConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    RngStream rng = seed_stream(init_seed, "init");

    time_l1_ = Linear(reg_, "time.l1", cfg_.embed_dim, cfg_.embed_dim, rng);
    time_l2_ = Linear(reg_, "time.l2", cfg_.embed_dim, cfg_.embed_dim, rng);
    if (cfg_.tdg) {
        dir_table_ = reg_.add("dir.table", 1, 2, 1, cfg_.embed_dim);
        for (double& x : dir_table_->w.v) x = 0.5 * rng.normal();
        dir_proj_ = Linear(reg_, "dir.proj", cfg_.embed_dim, cfg_.embed_dim, rng);
    }

    int L = cfg_.depth();
    stem_ = Conv2d(reg_, "stem", cfg_.in_channels, cfg_.width(0), 3, 1, rng);
    down_.resize(L);
    dres_.reserve(L);
    dattn_.resize(L);
    ures_.reserve(L);
    uattn_.resize(L);
    up_.resize(L);
    for (int i = 0; i < L; ++i) {
        if (i > 0) {
            down_[i] = Conv2d(reg_, "down" + std::to_string(i), cfg_.width(i - 1),
                              cfg_.width(i), 3, 2, rng);
        }
        dres_.emplace_back(reg_, "dres" + std::to_string(i), cfg_.width(i), cfg_.width(i),
                           cfg_.embed_dim, rng);
        if (cfg_.attn_at(i)) {
            dattn_[i] = CrossAttention(reg_, "dattn" + std::to_string(i), cfg_.width(i),
                                       cfg_.width(i), cfg_.attention_channels, rng);
        }
    }
    mid1_ = ResBlock(reg_, "mid1", cfg_.width(L - 1), cfg_.width(L - 1), cfg_.embed_dim, rng);
    has_mid_attn_ = cfg_.attn_at(L - 1);
    if (has_mid_attn_) {
        mid_attn_ = CrossAttention(reg_, "mid.attn", cfg_.width(L - 1), cfg_.width(L - 1),
                                   cfg_.attention_channels, rng);
    }
    mid2_ = ResBlock(reg_, "mid2", cfg_.width(L - 1), cfg_.width(L - 1), cfg_.embed_dim, rng);
    for (int i = 0; i < L; ++i) {
        ures_.emplace_back(reg_, "ures" + std::to_string(i), 2 * cfg_.width(i), cfg_.width(i),
                           cfg_.embed_dim, rng);
        if (cfg_.attn_at(i)) {
            uattn_[i] = CrossAttention(reg_, "uattn" + std::to_string(i), cfg_.width(i),
                                       cfg_.width(i), cfg_.attention_channels, rng);
        }
        if (i > 0) {
            up_[i] = Conv2d(reg_, "up" + std::to_string(i), cfg_.width(i), cfg_.width(i - 1),
                            3, 1, rng);
        }
    }
    out_norm_ = GroupNorm(reg_, "out.norm", cfg_.width(0));
    out_conv_ = Conv2d(reg_, "out.conv", cfg_.width(0), cfg_.out_channels, 3, 1, rng, 0.2);

    if (cfg_.cfc) {
        enc_ir_ = SourceEncoder(reg_, "enc_ir", cfg_, rng);
        enc_vis_ = SourceEncoder(reg_, "enc_vis", cfg_, rng);
    }
}

Tensor Denoiser::direction_embedding(const std::vector<int>& labels) const {
    if (!cfg_.tdg) throw ConfigError("direction_embedding: tdg disabled in this model");
    Tensor out(static_cast<int>(labels.size()), cfg_.embed_dim, 1, 1);
    for (size_t n = 0; n < labels.size(); ++n) {
        int id = labels[n];
        if (id != 0 && id != 1) throw ArgumentError("direction label id must be 0 or 1");
        std::memcpy(out.data() + n * cfg_.embed_dim,
                    dir_table_->w.data() + static_cast<size_t>(id) * cfg_.embed_dim,
                    cfg_.embed_dim * sizeof(double));
    }
    return out;
}

EncoderFeatures Denoiser::encode_source(const Tensor& source3, Modality source_modality) {
    if (!cfg_.cfc) throw ConfigError("encode_source: cfc disabled in this model");
    if (source3.c != 3) throw ArgumentError("encode_source: expected 3 channels");
    return (source_modality == Modality::IR ? enc_ir_ : enc_vis_).forward(source3);
}

Tensor Denoiser::epsilon_predict(const Tensor& z, const std::vector<int>& labels,
                                 Modality source_modality, const std::vector<int>& ts,
                                 const EncoderFeatures* precomputed) {
    if (z.c != cfg_.in_channels) {
        throw ArgumentError("epsilon_predict: input has " + std::to_string(z.c) +
                            " channels, config wants " + std::to_string(cfg_.in_channels));
    }
    if (static_cast<int>(ts.size()) != z.n || static_cast<int>(labels.size()) != z.n) {
        throw ArgumentError("epsilon_predict: ts/labels must match batch size");
    }
    if ((z.h >> (cfg_.depth() - 1)) << (cfg_.depth() - 1) != z.h || z.h != z.w) {
        throw ArgumentError("epsilon_predict: spatial size incompatible with depth");
    }

    last_labels_ = labels;
    last_src_ = source_modality;
    last_used_precomputed_ = (precomputed != nullptr);

    Tensor temb = time_l2_.forward(time_act_.forward(
        time_l1_.forward(sinusoidal_embedding(ts, cfg_.embed_dim))));
    if (cfg_.tdg) {
        Tensor j = direction_embedding(labels);
        Tensor proj = dir_proj_.forward(j);
        temb = add(temb, proj);
    }

    if (cfg_.cfc) {
        feats_ = precomputed ? *precomputed
                             : encode_source(slice_channels(z, 3, 3), source_modality);
    }

    int L = cfg_.depth();
    std::vector<Tensor> skips(L);
    Tensor h = stem_.forward(z);
    for (int i = 0; i < L; ++i) {
        if (i > 0) h = down_[i].forward(h);
        h = dres_[i].forward(h, &temb);
        if (cfg_.attn_at(i)) h = dattn_[i].forward(h, feats_.level[i]);
        skips[i] = h;
    }
    h = mid1_.forward(h, &temb);
    if (has_mid_attn_) h = mid_attn_.forward(h, feats_.level[L - 1]);
    h = mid2_.forward(h, &temb);
    for (int i = L - 1; i >= 0; --i) {
        h = ures_[i].forward(concat_channels(h, skips[i]), &temb);
        if (cfg_.attn_at(i)) h = uattn_[i].forward(h, feats_.level[i]);
        if (i > 0) h = up_[i].forward(upsample_nearest2(h));
    }
    g_skip_.assign(L, Tensor());
    return out_conv_.forward(out_act_.forward(out_norm_.forward(h)));
}

void Denoiser::backward(const Tensor& g_eps) {
    int L = cfg_.depth();
    Tensor g = out_norm_.backward(out_act_.backward(out_conv_.backward(g_eps)));
    Tensor g_temb;
    std::vector<Tensor> g_fd(L);

    for (int i = 0; i < L; ++i) {
        if (i > 0) g = upsample_nearest2_backward(up_[i].backward(g));
        if (cfg_.attn_at(i)) g = uattn_[i].backward(g, g_fd[i]);
        Tensor gcat = ures_[i].backward(g, &g_temb);
        Tensor gh, gskip;
        split_channels(gcat, cfg_.width(i), gh, gskip);
        g_skip_[i] = std::move(gskip);
        g = std::move(gh);
    }
    g = mid2_.backward(g, &g_temb);
    if (has_mid_attn_) g = mid_attn_.backward(g, g_fd[L - 1]);
    g = mid1_.backward(g, &g_temb);
    for (int i = L - 1; i >= 0; --i) {
        for (size_t k = 0; k < g.size(); ++k) g.v[k] += g_skip_[i].v[k];
        if (cfg_.attn_at(i)) g = dattn_[i].backward(g, g_fd[i]);
        g = dres_[i].backward(g, &g_temb);
        if (i > 0) g = down_[i].backward(g);
    }
    stem_.backward(g, false);

    if (cfg_.cfc && !last_used_precomputed_) {
        (last_src_ == Modality::IR ? enc_ir_ : enc_vis_).backward(g_fd);
    }

    // time / direction embedding paths
    if (cfg_.tdg) {
        Tensor g_j = dir_proj_.backward(g_temb);
        for (int n = 0; n < g_j.n; ++n) {
            int id = last_labels_[n];
            double* row = dir_table_->g.data() + static_cast<size_t>(id) * cfg_.embed_dim;
            const double* src = g_j.data() + static_cast<size_t>(n) * cfg_.embed_dim;
            for (int i = 0; i < cfg_.embed_dim; ++i) row[i] += src[i];
        }
    }
    time_l1_.backward(time_act_.backward(time_l2_.backward(g_temb)), false);
}

}  // namespace cmdiff
