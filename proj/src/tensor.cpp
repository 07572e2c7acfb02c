#include "cmdiff/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace cmdiff {

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[" << n << "," << c << "," << h << "," << w << "]";
    return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ArgumentError(std::string(what) + ": shape mismatch " + a.shape_str() +
                            " vs " + b.shape_str());
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += b.v[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= b.v[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& x : out.v) x *= s;
    return out;
}

Tensor axpby(const Tensor& a, double sa, const Tensor& b, double sb) {
    check_same_shape(a, b, "axpby");
    Tensor out = Tensor::zeros_like(a);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = sa * a.v[i] + sb * b.v[i];
    return out;
}

double mean_sq_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mean_sq_diff");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.v[i] - b.v[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    Tensor out = a;
    for (double& x : out.v) x = std::min(hi, std::max(lo, x));
    return out;
}

Tensor stack_images(const std::vector<Tensor>& items) {
    if (items.empty()) throw ArgumentError("stack_images: empty list");
    const Tensor& first = items.front();
    Tensor out(static_cast<int>(items.size()), first.c, first.h, first.w);
    size_t stride = static_cast<size_t>(first.c) * first.h * first.w;
    for (size_t i = 0; i < items.size(); ++i) {
        if (items[i].n != 1 || items[i].c != first.c || items[i].h != first.h ||
            items[i].w != first.w) {
            throw ArgumentError("stack_images: inconsistent item shapes");
        }
        std::memcpy(out.data() + i * stride, items[i].data(), stride * sizeof(double));
    }
    return out;
}

namespace {

// 4x16 register-tile microkernel: the C tile lives in accumulator registers
// across the whole K loop, B streams through once per row panel, A is read as
// broadcast scalars. a_row/a_col strides let the same kernel serve gemm_nn
// (row-major A) and gemm_tn (transposed A).
template <int JT>
inline void micro_tile(int K, const double* A, size_t ars, size_t acs, const double* B,
                       int ldb, double* C, int ldc, int rows) {
    double acc[4][JT];
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < JT; ++j) acc[r][j] = C[static_cast<size_t>(r) * ldc + j];
    for (int k = 0; k < K; ++k) {
        const double* __restrict b = B + static_cast<size_t>(k) * ldb;
        double a0 = A[0 * ars + k * acs];
        double a1 = rows > 1 ? A[1 * ars + k * acs] : 0.0;
        double a2 = rows > 2 ? A[2 * ars + k * acs] : 0.0;
        double a3 = rows > 3 ? A[3 * ars + k * acs] : 0.0;
        for (int j = 0; j < JT; ++j) {
            double bv = b[j];
            acc[0][j] += a0 * bv;
            if (rows > 1) acc[1][j] += a1 * bv;
            if (rows > 2) acc[2][j] += a2 * bv;
            if (rows > 3) acc[3][j] += a3 * bv;
        }
    }
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < JT; ++j) C[static_cast<size_t>(r) * ldc + j] = acc[r][j];
}

void gemm_axpy(int M, int N, int K, const double* A, size_t a_row_stride,
               size_t a_col_stride, const double* B, double* C) {
    constexpr int JT = 16;
    int j = 0;
    for (; j + JT <= N; j += JT) {
        for (int i = 0; i < M; i += 4) {
            int rows = std::min(4, M - i);
            micro_tile<JT>(K, A + static_cast<size_t>(i) * a_row_stride, a_row_stride,
                           a_col_stride, B + j, N, C + static_cast<size_t>(i) * N + j, N,
                           rows);
        }
    }
    if (j < N) {
        // ragged right edge, plain axpy
        for (int i = 0; i < M; ++i) {
            double* __restrict c_row = C + static_cast<size_t>(i) * N;
            for (int k = 0; k < K; ++k) {
                double a = A[static_cast<size_t>(i) * a_row_stride +
                             static_cast<size_t>(k) * a_col_stride];
                const double* __restrict b_row = B + static_cast<size_t>(k) * N;
                for (int jj = j; jj < N; ++jj) c_row[jj] += a * b_row[jj];
            }
        }
    }
}

}  // namespace

void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(double) * static_cast<size_t>(M) * N);
    gemm_axpy(M, N, K, A, static_cast<size_t>(K), 1, B, C);
}

void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(double) * static_cast<size_t>(M) * N);
    gemm_axpy(M, N, K, A, 1, static_cast<size_t>(M), B, C);
}

// C += A * B^T, done as a blocked transpose of B followed by the register-tile
// kernel; the transpose cost is small next to the multiply.
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(double) * static_cast<size_t>(M) * N);
    std::vector<double> bt(static_cast<size_t>(K) * N);
    constexpr int TB = 32;
    for (int jb = 0; jb < N; jb += TB) {
        int jend = std::min(N, jb + TB);
        for (int kb = 0; kb < K; kb += TB) {
            int kend = std::min(K, kb + TB);
            for (int j = jb; j < jend; ++j)
                for (int k = kb; k < kend; ++k)
                    bt[static_cast<size_t>(k) * N + j] = B[static_cast<size_t>(j) * K + k];
        }
    }
    gemm_axpy(M, N, K, A, static_cast<size_t>(K), 1, bt.data(), C);
}

}  // namespace cmdiff
