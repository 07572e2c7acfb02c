#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cmdiff/rng.hpp"
#include "cmdiff/tensor.hpp"

namespace cmdiff {

struct Param {
    std::string name;
    Tensor w;
    Tensor g;
    Tensor m, v;  // AdamW moments

    size_t count() const { return w.size(); }
};

class ParamRegistry {
public:
    Param* add(const std::string& name, int n, int c, int h, int w);
    Param* find(const std::string& name);
    void zero_grads();
    size_t total_count() const;
    double grad_sq_norm() const;

    std::vector<std::unique_ptr<Param>> params;
};

// One AdamW step over every parameter in the registry.
void adamw_step(ParamRegistry& reg, double lr, double weight_decay, long step_index,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Scale all gradients so the global L2 norm is at most max_norm (no-op if 0).
void clip_grad_norm(ParamRegistry& reg, double max_norm);

// ---------------------------------------------------------------------------
// Layers. Each forward caches what its backward needs; one forward/backward
// pair may be in flight per layer instance (single-writer training contract).
// ---------------------------------------------------------------------------

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamRegistry& reg, const std::string& name, int in_c, int out_c, int k,
           int stride, RngStream& rng, double init_gain = 1.0);

    Tensor forward(const Tensor& x);
    // Returns dL/dx; accumulates dL/dW, dL/db. Pass want_dx=false at the
    // input layer to skip the col2im pass.
    Tensor backward(const Tensor& gy, bool want_dx = true);

    int in_c() const { return in_c_; }
    int out_c() const { return out_c_; }
    Param* weight() { return w_; }
    Param* bias() { return b_; }

private:
    int in_c_ = 0, out_c_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
    Param* w_ = nullptr;
    Param* b_ = nullptr;
    Tensor x_;  // cached input
    void im2col(const double* x, int h, int w, double* col, int oh, int ow) const;
    void col2im(const double* col, int h, int w, double* x, int oh, int ow) const;
};

class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(ParamRegistry& reg, const std::string& name, int channels);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    int channels_ = 0, groups_ = 1;
    double eps_ = 1e-5;
    Param* gamma_ = nullptr;
    Param* beta_ = nullptr;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

class SiLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    Tensor x_;
};

// Input/output are [N, features] tensors (h = w = 1).
class Linear {
public:
    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& name, int in_f, int out_f,
           RngStream& rng, double init_gain = 1.0);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy, bool want_dx = true);

private:
    int in_f_ = 0, out_f_ = 0;
    Param* w_ = nullptr;
    Param* b_ = nullptr;
    Tensor x_;
};

// softmax(Q K^T / sqrt(d)) V over flattened spatial tokens. Q/K/V are given
// as [N, d|c, H, W] tensors; tokens run over H*W.
struct AttentionCoreCache {
    std::vector<Tensor> attn;  // per batch item, [1,1,Tq,Tk]
};

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                      AttentionCoreCache* cache = nullptr);
void attention_core_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                             const AttentionCoreCache& cache, const Tensor& g_out,
                             Tensor& gq, Tensor& gk, Tensor& gv);

// Residual cross-attention site: F_g + softmax(Conv_q(F_g) Conv_kv(F_d)^T / sqrt(d)) V.
class CrossAttention {
public:
    CrossAttention() = default;
    CrossAttention(ParamRegistry& reg, const std::string& name, int gate_c, int source_c,
                   int attn_c, RngStream& rng);

    Tensor forward(const Tensor& f_g, const Tensor& f_d);
    // Returns dL/dF_g; adds dL/dF_d into g_fd (shape of f_d).
    Tensor backward(const Tensor& gy, Tensor& g_fd);

    // Test hook: force the value projection to zero (residual identity check).
    void zero_value_projection();

private:
    int gate_c_ = 0, source_c_ = 0, attn_c_ = 0;
    Conv2d conv_q_;
    Conv2d conv_kv_;  // source_c -> attn_c + gate_c, split into K and V
    Tensor q_, k_, v_, f_d_;
    AttentionCoreCache cache_;
};

// GroupNorm -> SiLU -> conv3x3 -> (+ time embedding) -> GroupNorm -> SiLU ->
// conv3x3, plus identity/1x1 skip. embed_dim 0 builds a time-free block.
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(ParamRegistry& reg, const std::string& name, int in_c, int out_c,
             int embed_dim, RngStream& rng);

    Tensor forward(const Tensor& x, const Tensor* temb);
    Tensor backward(const Tensor& gy, Tensor* g_temb);

private:
    int in_c_ = 0, out_c_ = 0, embed_dim_ = 0;
    GroupNorm n1_, n2_;
    SiLU s1_, s2_, s_emb_;
    Conv2d c1_, c2_;
    Linear emb_proj_;
    Conv2d skip_;
    bool has_skip_ = false;
    Tensor x_;
};

// Sinusoidal embedding of integer steps, one row per batch element.
Tensor sinusoidal_embedding(const std::vector<int>& ts, int dim);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb);

Tensor upsample_nearest2(const Tensor& x);
Tensor upsample_nearest2_backward(const Tensor& gy);

Tensor slice_channels(const Tensor& x, int from, int count);

}  // namespace cmdiff
