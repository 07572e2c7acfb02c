#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmdiff/errors.hpp"

namespace cmdiff {

// Dense NCHW tensor of doubles. Images use n = 1; channel planes are
// contiguous, so channel concatenation and slicing are plain block copies.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    static Tensor image(int c, int h, int w, double fill = 0.0) {
        return Tensor(1, c, h, w, fill);
    }
    static Tensor zeros_like(const Tensor& o) { return Tensor(o.n, o.c, o.h, o.w); }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const;

    size_t idx(int in, int ic, int iy, int ix) const {
        return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    double& at(int in, int ic, int iy, int ix) { return v[idx(in, ic, iy, ix)]; }
    double at(int in, int ic, int iy, int ix) const { return v[idx(in, ic, iy, ix)]; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double* plane(int in, int ic) { return v.data() + idx(in, ic, 0, 0); }
    const double* plane(int in, int ic) const { return v.data() + idx(in, ic, 0, 0); }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

// Elementwise helpers used by the diffusion math; all shape-checked.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// a*sa + b*sb
Tensor axpby(const Tensor& a, double sa, const Tensor& b, double sb);
double mean_sq_diff(const Tensor& a, const Tensor& b);
Tensor clamp(const Tensor& a, double lo, double hi);

// Stack single-image tensors (n = 1) into one batch tensor.
Tensor stack_images(const std::vector<Tensor>& items);

// Row-major matrix products. C is M x N.
//   gemm_nn: C (+)= A[M,K] * B[K,N]
//   gemm_tn: C (+)= A^T * B with A stored [K,M]
//   gemm_nt: C (+)= A * B^T with B stored [N,K]
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate = false);
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate = false);
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate = false);

}  // namespace cmdiff
