#include "cmdiff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cmdiff {

Param* ParamRegistry::add(const std::string& name, int n, int c, int h, int w) {
    auto p = std::make_unique<Param>();
    p->name = name;
    p->w = Tensor(n, c, h, w);
    p->g = Tensor(n, c, h, w);
    p->m = Tensor(n, c, h, w);
    p->v = Tensor(n, c, h, w);
    params.push_back(std::move(p));
    return params.back().get();
}

Param* ParamRegistry::find(const std::string& name) {
    for (auto& p : params)
        if (p->name == name) return p.get();
    return nullptr;
}

void ParamRegistry::zero_grads() {
    for (auto& p : params) p->g.fill(0.0);
}

size_t ParamRegistry::total_count() const {
    size_t n = 0;
    for (const auto& p : params) n += p->count();
    return n;
}

double ParamRegistry::grad_sq_norm() const {
    double s = 0.0;
    for (const auto& p : params)
        for (double g : p->g.v) s += g * g;
    return s;
}

void adamw_step(ParamRegistry& reg, double lr, double weight_decay, long step_index,
                double beta1, double beta2, double eps) {
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_index));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_index));
    for (auto& p : reg.params) {
        for (size_t i = 0; i < p->w.size(); ++i) {
            double g = p->g.v[i];
            p->m.v[i] = beta1 * p->m.v[i] + (1.0 - beta1) * g;
            p->v.v[i] = beta2 * p->v.v[i] + (1.0 - beta2) * g * g;
            double mh = p->m.v[i] / bc1;
            double vh = p->v.v[i] / bc2;
            p->w.v[i] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * p->w.v[i]);
        }
    }
}

void clip_grad_norm(ParamRegistry& reg, double max_norm) {
    if (max_norm <= 0.0) return;
    double norm = std::sqrt(reg.grad_sq_norm());
    if (norm <= max_norm) return;
    double s = max_norm / norm;
    for (auto& p : reg.params)
        for (double& g : p->g.v) g *= s;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(ParamRegistry& reg, const std::string& name, int in_c, int out_c, int k,
               int stride, RngStream& rng, double init_gain)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(k / 2) {
    w_ = reg.add(name + ".w", out_c, in_c, k, k);
    b_ = reg.add(name + ".b", 1, out_c, 1, 1);
    double std_dev = init_gain * std::sqrt(2.0 / (in_c * k * k));
    for (double& x : w_->w.v) x = std_dev * rng.normal();
}

void Conv2d::im2col(const double* x, int h, int w, double* col, int oh, int ow) const {
    size_t owh = static_cast<size_t>(oh) * ow;
    for (int c = 0; c < in_c_; ++c) {
        const double* xp = x + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
                double* row = col + ((static_cast<size_t>(c) * k_ + ky) * k_ + kx) * owh;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride_ + ky - pad_;
                    double* out = row + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::memset(out, 0, sizeof(double) * ow);
                        continue;
                    }
                    const double* in = xp + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride_ + kx - pad_;
                        out[ox] = (ix >= 0 && ix < w) ? in[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void Conv2d::col2im(const double* col, int h, int w, double* x, int oh, int ow) const {
    for (int c = 0; c < in_c_; ++c) {
        double* xp = x + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
                const double* row =
                    col + ((static_cast<size_t>(c) * k_ + ky) * k_ + kx) *
                              (static_cast<size_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride_ + ky - pad_;
                    if (iy < 0 || iy >= h) continue;
                    const double* in = row + static_cast<size_t>(oy) * ow;
                    double* out = xp + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride_ + kx - pad_;
                        if (ix >= 0 && ix < w) out[ix] += in[ox];
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c != in_c_) {
        throw ArgumentError("Conv2d: channel mismatch, expected " + std::to_string(in_c_) +
                            " got " + std::to_string(x.c));
    }
    x_ = x;
    int oh = (x.h + 2 * pad_ - k_) / stride_ + 1;
    int ow = (x.w + 2 * pad_ - k_) / stride_ + 1;
    Tensor y(x.n, out_c_, oh, ow);
    int K = in_c_ * k_ * k_;
    size_t owh = static_cast<size_t>(oh) * ow;
    std::vector<double> col(static_cast<size_t>(K) * owh);
    for (int n = 0; n < x.n; ++n) {
        im2col(x.plane(n, 0), x.h, x.w, col.data(), oh, ow);
        gemm_nn(out_c_, static_cast<int>(owh), K, w_->w.data(), col.data(), y.plane(n, 0));
        for (int c = 0; c < out_c_; ++c) {
            double bias = b_->w.v[c];
            double* yp = y.plane(n, c);
            for (size_t i = 0; i < owh; ++i) yp[i] += bias;
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy, bool want_dx) {
    int oh = gy.h, ow = gy.w;
    int K = in_c_ * k_ * k_;
    size_t owh = static_cast<size_t>(oh) * ow;
    std::vector<double> col(static_cast<size_t>(K) * owh);
    std::vector<double> gcol(static_cast<size_t>(K) * owh);
    Tensor gx;
    if (want_dx) gx = Tensor::zeros_like(x_);
    for (int n = 0; n < gy.n; ++n) {
        im2col(x_.plane(n, 0), x_.h, x_.w, col.data(), oh, ow);
        // dW += gy . col^T
        gemm_nt(out_c_, K, static_cast<int>(owh), gy.plane(n, 0), col.data(),
                w_->g.data(), true);
        for (int c = 0; c < out_c_; ++c) {
            const double* gp = gy.plane(n, c);
            double s = 0.0;
            for (size_t i = 0; i < owh; ++i) s += gp[i];
            b_->g.v[c] += s;
        }
        if (want_dx) {
            gemm_tn(K, static_cast<int>(owh), out_c_, w_->w.data(), gy.plane(n, 0),
                    gcol.data());
            col2im(gcol.data(), x_.h, x_.w, gx.plane(n, 0), oh, ow);
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// GroupNorm
// ---------------------------------------------------------------------------

GroupNorm::GroupNorm(ParamRegistry& reg, const std::string& name, int channels)
    : channels_(channels), groups_(std::max(1, channels / 8)) {
    gamma_ = reg.add(name + ".gamma", 1, channels, 1, 1);
    beta_ = reg.add(name + ".beta", 1, channels, 1, 1);
    gamma_->w.fill(1.0);
}

Tensor GroupNorm::forward(const Tensor& x) {
    if (x.c != channels_) throw ArgumentError("GroupNorm: channel mismatch");
    int cpg = channels_ / groups_;
    size_t plane = static_cast<size_t>(x.h) * x.w;
    size_t gsize = plane * cpg;
    xhat_ = Tensor::zeros_like(x);
    inv_std_.assign(static_cast<size_t>(x.n) * groups_, 0.0);
    Tensor y = Tensor::zeros_like(x);
    for (int n = 0; n < x.n; ++n) {
        for (int g = 0; g < groups_; ++g) {
            const double* xs = x.plane(n, g * cpg);
            double mu = 0.0;
            for (size_t i = 0; i < gsize; ++i) mu += xs[i];
            mu /= static_cast<double>(gsize);
            double var = 0.0;
            for (size_t i = 0; i < gsize; ++i) {
                double d = xs[i] - mu;
                var += d * d;
            }
            var /= static_cast<double>(gsize);
            double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[static_cast<size_t>(n) * groups_ + g] = inv;
            double* xh = xhat_.plane(n, g * cpg);
            double* yp = y.plane(n, g * cpg);
            for (int c = 0; c < cpg; ++c) {
                double gamma = gamma_->w.v[g * cpg + c];
                double betav = beta_->w.v[g * cpg + c];
                for (size_t i = 0; i < plane; ++i) {
                    size_t idx = static_cast<size_t>(c) * plane + i;
                    double h = (xs[idx] - mu) * inv;
                    xh[idx] = h;
                    yp[idx] = gamma * h + betav;
                }
            }
        }
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& gy) {
    int cpg = channels_ / groups_;
    size_t plane = static_cast<size_t>(gy.h) * gy.w;
    size_t gsize = plane * cpg;
    Tensor gx = Tensor::zeros_like(gy);
    for (int n = 0; n < gy.n; ++n) {
        for (int g = 0; g < groups_; ++g) {
            const double* gyp = gy.plane(n, g * cpg);
            const double* xh = xhat_.plane(n, g * cpg);
            double inv = inv_std_[static_cast<size_t>(n) * groups_ + g];
            // per-channel param grads and the group reductions
            double sum_gh = 0.0, sum_gh_xh = 0.0;
            for (int c = 0; c < cpg; ++c) {
                double gamma = gamma_->w.v[g * cpg + c];
                double dgamma = 0.0, dbeta = 0.0;
                for (size_t i = 0; i < plane; ++i) {
                    size_t idx = static_cast<size_t>(c) * plane + i;
                    double gv = gyp[idx];
                    dgamma += gv * xh[idx];
                    dbeta += gv;
                    double gh = gv * gamma;
                    sum_gh += gh;
                    sum_gh_xh += gh * xh[idx];
                }
                gamma_->g.v[g * cpg + c] += dgamma;
                beta_->g.v[g * cpg + c] += dbeta;
            }
            double mean_gh = sum_gh / static_cast<double>(gsize);
            double mean_gh_xh = sum_gh_xh / static_cast<double>(gsize);
            double* gxp = gx.plane(n, g * cpg);
            for (int c = 0; c < cpg; ++c) {
                double gamma = gamma_->w.v[g * cpg + c];
                for (size_t i = 0; i < plane; ++i) {
                    size_t idx = static_cast<size_t>(c) * plane + i;
                    double gh = gyp[idx] * gamma;
                    gxp[idx] = inv * (gh - mean_gh - xh[idx] * mean_gh_xh);
                }
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// SiLU / Linear
// ---------------------------------------------------------------------------

Tensor SiLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (double& v : y.v) v = v / (1.0 + std::exp(-v));
    return y;
}

Tensor SiLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.size(); ++i) {
        double x = x_.v[i];
        double s = 1.0 / (1.0 + std::exp(-x));
        gx.v[i] *= s * (1.0 + x * (1.0 - s));
    }
    return gx;
}

Linear::Linear(ParamRegistry& reg, const std::string& name, int in_f, int out_f,
               RngStream& rng, double init_gain)
    : in_f_(in_f), out_f_(out_f) {
    w_ = reg.add(name + ".w", 1, 1, out_f, in_f);
    b_ = reg.add(name + ".b", 1, out_f, 1, 1);
    double std_dev = init_gain * std::sqrt(1.0 / in_f);
    for (double& x : w_->w.v) x = std_dev * rng.normal();
}

Tensor Linear::forward(const Tensor& x) {
    if (x.c != in_f_ || x.h != 1 || x.w != 1) throw ArgumentError("Linear: bad input shape");
    x_ = x;
    Tensor y(x.n, out_f_, 1, 1);
    // y[n, o] = W[o, i] x[n, i] + b  ->  y = x . W^T
    gemm_nt(x.n, out_f_, in_f_, x.data(), w_->w.data(), y.data());
    for (int n = 0; n < x.n; ++n)
        for (int o = 0; o < out_f_; ++o) y.v[static_cast<size_t>(n) * out_f_ + o] += b_->w.v[o];
    return y;
}

Tensor Linear::backward(const Tensor& gy, bool want_dx) {
    // dW[o, i] += gy[n, o] x[n, i]
    gemm_tn(out_f_, in_f_, gy.n, gy.data(), x_.data(), w_->g.data(), true);
    for (int n = 0; n < gy.n; ++n)
        for (int o = 0; o < out_f_; ++o) b_->g.v[o] += gy.v[static_cast<size_t>(n) * out_f_ + o];
    Tensor gx;
    if (want_dx) {
        gx = Tensor(gy.n, in_f_, 1, 1);
        gemm_nn(gy.n, in_f_, out_f_, gy.data(), w_->w.data(), gx.data());
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                      AttentionCoreCache* cache) {
    int tq = q.h * q.w, tk = k.h * k.w;
    if (tq == 0 || tk == 0) throw ArgumentError("attention_core: zero tokens");
    if (k.h * k.w != v.h * v.w || q.c != k.c || q.n != k.n || k.n != v.n) {
        throw ArgumentError("attention_core: inconsistent shapes");
    }
    int d = q.c;
    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor out(q.n, v.c, q.h, q.w);
    if (cache) cache->attn.assign(q.n, Tensor());
    std::vector<double> scores(static_cast<size_t>(tq) * tk);
    for (int n = 0; n < q.n; ++n) {
        // S[tq, tk] = Q^T K * scale  (planes are [d, tokens])
        gemm_tn(tq, tk, d, q.plane(n, 0), k.plane(n, 0), scores.data());
        for (double& s : scores) s *= scale;
        // row softmax
        for (int r = 0; r < tq; ++r) {
            double* row = scores.data() + static_cast<size_t>(r) * tk;
            double mx = row[0];
            for (int j = 1; j < tk; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (int j = 0; j < tk; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            double inv = 1.0 / sum;
            for (int j = 0; j < tk; ++j) row[j] *= inv;
        }
        // O[c, tq] = V[c, tk] . A^T
        gemm_nt(v.c, tq, tk, v.plane(n, 0), scores.data(), out.plane(n, 0));
        if (cache) {
            Tensor a(1, 1, tq, tk);
            std::memcpy(a.data(), scores.data(), sizeof(double) * scores.size());
            cache->attn[n] = std::move(a);
        }
    }
    return out;
}

void attention_core_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                             const AttentionCoreCache& cache, const Tensor& g_out,
                             Tensor& gq, Tensor& gk, Tensor& gv) {
    int tq = q.h * q.w, tk = k.h * k.w;
    int d = q.c;
    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    gq = Tensor::zeros_like(q);
    gk = Tensor::zeros_like(k);
    gv = Tensor::zeros_like(v);
    std::vector<double> ga(static_cast<size_t>(tq) * tk);
    std::vector<double> gs(static_cast<size_t>(tq) * tk);
    for (int n = 0; n < q.n; ++n) {
        const double* a = cache.attn[n].data();
        // gV[c, tk] = gO[c, tq] . A
        gemm_nn(v.c, tk, tq, g_out.plane(n, 0), a, gv.plane(n, 0));
        // gA[tq, tk] = gO^T V
        gemm_tn(tq, tk, v.c, g_out.plane(n, 0), v.plane(n, 0), ga.data());
        // softmax backward rows: gS = A (gA - sum(gA*A))
        for (int r = 0; r < tq; ++r) {
            const double* arow = a + static_cast<size_t>(r) * tk;
            const double* garow = ga.data() + static_cast<size_t>(r) * tk;
            double dot = 0.0;
            for (int j = 0; j < tk; ++j) dot += arow[j] * garow[j];
            double* gsrow = gs.data() + static_cast<size_t>(r) * tk;
            for (int j = 0; j < tk; ++j) gsrow[j] = arow[j] * (garow[j] - dot) * scale;
        }
        // gQ[d, tq] = K . gS^T ; gK[d, tk] = Q . gS
        gemm_nt(d, tq, tk, k.plane(n, 0), gs.data(), gq.plane(n, 0));
        gemm_nn(d, tk, tq, q.plane(n, 0), gs.data(), gk.plane(n, 0));
    }
}

CrossAttention::CrossAttention(ParamRegistry& reg, const std::string& name, int gate_c,
                               int source_c, int attn_c, RngStream& rng)
    : gate_c_(gate_c), source_c_(source_c), attn_c_(attn_c),
      conv_q_(reg, name + ".q", gate_c, attn_c, 1, 1, rng),
      conv_kv_(reg, name + ".kv", source_c, attn_c + gate_c, 1, 1, rng) {}

Tensor CrossAttention::forward(const Tensor& f_g, const Tensor& f_d) {
    f_d_ = f_d;
    q_ = conv_q_.forward(f_g);
    Tensor kv = conv_kv_.forward(f_d);
    k_ = slice_channels(kv, 0, attn_c_);
    v_ = slice_channels(kv, attn_c_, gate_c_);
    Tensor o = attention_core(q_, k_, v_, &cache_);
    return add(f_g, o);
}

Tensor CrossAttention::backward(const Tensor& gy, Tensor& g_fd) {
    Tensor gq, gk, gv;
    attention_core_backward(q_, k_, v_, cache_, gy, gq, gk, gv);
    Tensor gkv(gk.n, attn_c_ + gate_c_, gk.h, gk.w);
    size_t plane = static_cast<size_t>(gk.h) * gk.w;
    for (int n = 0; n < gk.n; ++n) {
        std::memcpy(gkv.plane(n, 0), gk.plane(n, 0), plane * attn_c_ * sizeof(double));
        std::memcpy(gkv.plane(n, attn_c_), gv.plane(n, 0), plane * gate_c_ * sizeof(double));
    }
    Tensor gfd_local = conv_kv_.backward(gkv);
    if (g_fd.empty()) g_fd = Tensor::zeros_like(f_d_);
    for (size_t i = 0; i < g_fd.size(); ++i) g_fd.v[i] += gfd_local.v[i];
    Tensor gfg = conv_q_.backward(gq);
    for (size_t i = 0; i < gfg.size(); ++i) gfg.v[i] += gy.v[i];  // residual path
    return gfg;
}

void CrossAttention::zero_value_projection() {
    // The V half of the kv projection: output channels [attn_c_, attn_c_+gate_c_).
    Param* w = conv_kv_.weight();
    Param* b = conv_kv_.bias();
    size_t row = static_cast<size_t>(source_c_);  // 1x1 kernel: one row per out channel
    for (int c = attn_c_; c < attn_c_ + gate_c_; ++c) {
        for (size_t i = 0; i < row; ++i) w->w.v[static_cast<size_t>(c) * row + i] = 0.0;
        b->w.v[c] = 0.0;
    }
}

// ---------------------------------------------------------------------------
// ResBlock
// ---------------------------------------------------------------------------

ResBlock::ResBlock(ParamRegistry& reg, const std::string& name, int in_c, int out_c,
                   int embed_dim, RngStream& rng)
    : in_c_(in_c), out_c_(out_c), embed_dim_(embed_dim),
      n1_(reg, name + ".n1", in_c),
      n2_(reg, name + ".n2", out_c),
      c1_(reg, name + ".c1", in_c, out_c, 3, 1, rng),
      c2_(reg, name + ".c2", out_c, out_c, 3, 1, rng, 0.5) {
    if (embed_dim > 0) emb_proj_ = Linear(reg, name + ".emb", embed_dim, out_c, rng);
    if (in_c != out_c) {
        skip_ = Conv2d(reg, name + ".skip", in_c, out_c, 1, 1, rng);
        has_skip_ = true;
    }
}

Tensor ResBlock::forward(const Tensor& x, const Tensor* temb) {
    x_ = x;
    Tensor h = c1_.forward(s1_.forward(n1_.forward(x)));
    if (embed_dim_ > 0) {
        if (!temb) throw ArgumentError("ResBlock: missing time embedding");
        Tensor tp = emb_proj_.forward(s_emb_.forward(*temb));  // [N, out_c]
        size_t plane = static_cast<size_t>(h.h) * h.w;
        for (int n = 0; n < h.n; ++n) {
            for (int c = 0; c < out_c_; ++c) {
                double bias = tp.v[static_cast<size_t>(n) * out_c_ + c];
                double* hp = h.plane(n, c);
                for (size_t i = 0; i < plane; ++i) hp[i] += bias;
            }
        }
    }
    Tensor out = c2_.forward(s2_.forward(n2_.forward(h)));
    Tensor sk = has_skip_ ? skip_.forward(x) : x;
    return add(out, sk);
}

Tensor ResBlock::backward(const Tensor& gy, Tensor* g_temb) {
    Tensor gh = n2_.backward(s2_.backward(c2_.backward(gy)));
    if (embed_dim_ > 0) {
        Tensor gtp(gh.n, out_c_, 1, 1);
        size_t plane = static_cast<size_t>(gh.h) * gh.w;
        for (int n = 0; n < gh.n; ++n) {
            for (int c = 0; c < out_c_; ++c) {
                const double* hp = gh.plane(n, c);
                double s = 0.0;
                for (size_t i = 0; i < plane; ++i) s += hp[i];
                gtp.v[static_cast<size_t>(n) * out_c_ + c] = s;
            }
        }
        Tensor gte = s_emb_.backward(emb_proj_.backward(gtp));
        if (g_temb) {
            if (g_temb->empty()) *g_temb = Tensor::zeros_like(gte);
            for (size_t i = 0; i < gte.size(); ++i) g_temb->v[i] += gte.v[i];
        }
    }
    Tensor gx = n1_.backward(s1_.backward(c1_.backward(gh)));
    if (has_skip_) {
        Tensor gsk = skip_.backward(gy);
        for (size_t i = 0; i < gx.size(); ++i) gx.v[i] += gsk.v[i];
    } else {
        for (size_t i = 0; i < gx.size(); ++i) gx.v[i] += gy.v[i];
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

Tensor sinusoidal_embedding(const std::vector<int>& ts, int dim) {
    int half = dim / 2;
    Tensor out(static_cast<int>(ts.size()), dim, 1, 1);
    double log_base = std::log(10000.0) / std::max(1, half - 1);
    for (size_t n = 0; n < ts.size(); ++n) {
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-log_base * i);
            double angle = static_cast<double>(ts[n]) * freq;
            out.v[n * dim + i] = std::sin(angle);
            out.v[n * dim + half + i] = std::cos(angle);
        }
        if (dim % 2) out.v[n * dim + dim - 1] = 0.0;
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
        throw ArgumentError("concat_channels: dims must match");
    }
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int n = 0; n < a.n; ++n) {
        std::memcpy(out.plane(n, 0), a.plane(n, 0), plane * a.c * sizeof(double));
        std::memcpy(out.plane(n, a.c), b.plane(n, 0), plane * b.c * sizeof(double));
    }
    return out;
}

void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb) {
    ga = Tensor(g.n, c_a, g.h, g.w);
    gb = Tensor(g.n, g.c - c_a, g.h, g.w);
    size_t plane = static_cast<size_t>(g.h) * g.w;
    for (int n = 0; n < g.n; ++n) {
        std::memcpy(ga.plane(n, 0), g.plane(n, 0), plane * c_a * sizeof(double));
        std::memcpy(gb.plane(n, 0), g.plane(n, c_a), plane * (g.c - c_a) * sizeof(double));
    }
}

Tensor upsample_nearest2(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            const double* xp = x.plane(n, c);
            double* yp = y.plane(n, c);
            for (int iy = 0; iy < x.h; ++iy) {
                for (int ix = 0; ix < x.w; ++ix) {
                    double v = xp[static_cast<size_t>(iy) * x.w + ix];
                    size_t base = static_cast<size_t>(iy * 2) * y.w + ix * 2;
                    yp[base] = v;
                    yp[base + 1] = v;
                    yp[base + y.w] = v;
                    yp[base + y.w + 1] = v;
                }
            }
        }
    }
    return y;
}

Tensor upsample_nearest2_backward(const Tensor& gy) {
    Tensor gx(gy.n, gy.c, gy.h / 2, gy.w / 2);
    for (int n = 0; n < gy.n; ++n) {
        for (int c = 0; c < gy.c; ++c) {
            const double* gp = gy.plane(n, c);
            double* xp = gx.plane(n, c);
            for (int iy = 0; iy < gx.h; ++iy) {
                for (int ix = 0; ix < gx.w; ++ix) {
                    size_t base = static_cast<size_t>(iy * 2) * gy.w + ix * 2;
                    xp[static_cast<size_t>(iy) * gx.w + ix] =
                        gp[base] + gp[base + 1] + gp[base + gy.w] + gp[base + gy.w + 1];
                }
            }
        }
    }
    return gx;
}

Tensor slice_channels(const Tensor& x, int from, int count) {
    if (from < 0 || from + count > x.c) throw ArgumentError("slice_channels: out of range");
    Tensor out(x.n, count, x.h, x.w);
    size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int n = 0; n < x.n; ++n) {
        std::memcpy(out.plane(n, 0), x.plane(n, from), plane * count * sizeof(double));
    }
    return out;
}

}  // namespace cmdiff
