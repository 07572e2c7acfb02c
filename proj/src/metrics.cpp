#include "cmdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cmdiff/errors.hpp"

namespace cmdiff {

double psnr(const Tensor& a_u8, const Tensor& b_u8) {
    check_same_shape(a_u8, b_u8, "psnr");
    double se = 0.0;
    for (size_t i = 0; i < a_u8.size(); ++i) {
        double d = a_u8.v[i] - b_u8.v[i];
        se += d * d;
    }
    if (se == 0.0) return std::numeric_limits<double>::infinity();
    double mse = se / static_cast<double>(a_u8.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

double ssim_from_moments(double mu_a, double mu_b, double var_a, double var_b, double cov) {
    double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
    double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
    return num / den;
}

double ssim_global_plane(const double* a, const double* b, size_t n) {
    double mu_a = 0.0, mu_b = 0.0;
    for (size_t i = 0; i < n; ++i) { mu_a += a[i]; mu_b += b[i]; }
    mu_a /= static_cast<double>(n);
    mu_b /= static_cast<double>(n);
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double da = a[i] - mu_a, db = b[i] - mu_b;
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    va /= static_cast<double>(n);
    vb /= static_cast<double>(n);
    cov /= static_cast<double>(n);
    return ssim_from_moments(mu_a, mu_b, va, vb, cov);
}

std::vector<double> gaussian11_kernel() {
    std::vector<double> k(11);
    double sigma = 1.5, sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        double d = i - 5;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& x : k) x /= sum;
    return k;
}

double ssim_gaussian_plane(const double* a, const double* b, int h, int w) {
    static const std::vector<double> kern = gaussian11_kernel();
    double total = 0.0;
    int count = 0;
    // valid windows only (no padding)
    for (int y = 0; y + 11 <= h; ++y) {
        for (int x = 0; x + 11 <= w; ++x) {
            double mu_a = 0.0, mu_b = 0.0;
            double saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int dy = 0; dy < 11; ++dy) {
                for (int dx = 0; dx < 11; ++dx) {
                    double wgt = kern[dy] * kern[dx];
                    double pa = a[static_cast<size_t>(y + dy) * w + (x + dx)];
                    double pb = b[static_cast<size_t>(y + dy) * w + (x + dx)];
                    mu_a += wgt * pa;
                    mu_b += wgt * pb;
                    saa += wgt * pa * pa;
                    sbb += wgt * pb * pb;
                    sab += wgt * pa * pb;
                }
            }
            double va = saa - mu_a * mu_a;
            double vb = sbb - mu_b * mu_b;
            double cov = sab - mu_a * mu_b;
            total += ssim_from_moments(mu_a, mu_b, va, vb, cov);
            ++count;
        }
    }
    return total / count;
}

}  // namespace

double ssim(const Tensor& a_u8, const Tensor& b_u8, SsimWindow window) {
    check_same_shape(a_u8, b_u8, "ssim");
    if (window == SsimWindow::Gaussian11 && (a_u8.h < 11 || a_u8.w < 11)) {
        throw ArgumentError("ssim: image smaller than the 11x11 window");
    }
    size_t plane = static_cast<size_t>(a_u8.h) * a_u8.w;
    double total = 0.0;
    int planes = 0;
    for (int n = 0; n < a_u8.n; ++n) {
        for (int c = 0; c < a_u8.c; ++c) {
            const double* pa = a_u8.plane(n, c);
            const double* pb = b_u8.plane(n, c);
            total += (window == SsimWindow::Global)
                         ? ssim_global_plane(pa, pb, plane)
                         : ssim_gaussian_plane(pa, pb, a_u8.h, a_u8.w);
            ++planes;
        }
    }
    return total / planes;
}

// ---------------------------------------------------------------------------
// FID
// ---------------------------------------------------------------------------

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major d x d).
// Returns eigenvalues; V (row-major) receives eigenvectors in its columns.
std::vector<double> jacobi_eigen(std::vector<double> A, int d, std::vector<double>& V) {
    V.assign(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) V[static_cast<size_t>(i) * d + i] = 1.0;
    auto at = [&](std::vector<double>& M, int r, int c) -> double& {
        return M[static_cast<size_t>(r) * d + c];
    };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += at(A, p, q) * at(A, p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double apq = at(A, p, q);
                if (std::abs(apq) < 1e-300) continue;
                double app = at(A, p, p), aqq = at(A, q, q);
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double cth = 1.0 / std::sqrt(1.0 + t * t);
                double sth = t * cth;
                for (int k = 0; k < d; ++k) {
                    double akp = at(A, k, p), akq = at(A, k, q);
                    at(A, k, p) = cth * akp - sth * akq;
                    at(A, k, q) = sth * akp + cth * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = at(A, p, k), aqk = at(A, q, k);
                    at(A, p, k) = cth * apk - sth * aqk;
                    at(A, q, k) = sth * apk + cth * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    double vkp = at(V, k, p), vkq = at(V, k, q);
                    at(V, k, p) = cth * vkp - sth * vkq;
                    at(V, k, q) = sth * vkp + cth * vkq;
                }
            }
        }
    }
    std::vector<double> eig(d);
    for (int i = 0; i < d; ++i) eig[i] = A[static_cast<size_t>(i) * d + i];
    return eig;
}

// Symmetric PSD square root, eigenvalues below tol clamped to zero.
std::vector<double> sym_sqrt(const std::vector<double>& M, int d, double tol = 1e-8) {
    std::vector<double> V;
    std::vector<double> eig = jacobi_eigen(M, d, V);
    std::vector<double> out(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) {
        double lam = eig[i] < tol ? 0.0 : eig[i];
        double root = std::sqrt(std::max(0.0, lam));
        for (int r = 0; r < d; ++r) {
            for (int c2 = 0; c2 < d; ++c2) {
                out[static_cast<size_t>(r) * d + c2] +=
                    root * V[static_cast<size_t>(r) * d + i] * V[static_cast<size_t>(c2) * d + i];
            }
        }
    }
    return out;
}

void mean_and_cov(const std::vector<std::vector<double>>& feats, int d,
                  std::vector<double>& mu, std::vector<double>& cov) {
    size_t n = feats.size();
    mu.assign(d, 0.0);
    for (const auto& f : feats)
        for (int i = 0; i < d; ++i) mu[i] += f[i];
    for (int i = 0; i < d; ++i) mu[i] /= static_cast<double>(n);
    cov.assign(static_cast<size_t>(d) * d, 0.0);
    for (const auto& f : feats) {
        for (int i = 0; i < d; ++i) {
            double di = f[i] - mu[i];
            for (int j = 0; j < d; ++j) {
                cov[static_cast<size_t>(i) * d + j] += di * (f[j] - mu[j]);
            }
        }
    }
    double norm = 1.0 / static_cast<double>(n - 1);
    for (double& x : cov) x *= norm;
}

}  // namespace

double fid_from_features(const std::vector<std::vector<double>>& feats_a,
                         const std::vector<std::vector<double>>& feats_b) {
    if (feats_a.size() < 2 || feats_b.size() < 2) {
        throw ArgumentError("fid_from_features: each set needs at least 2 vectors");
    }
    int d = static_cast<int>(feats_a.front().size());
    for (const auto& f : feats_a)
        if (static_cast<int>(f.size()) != d) throw ArgumentError("fid: ragged feature set");
    for (const auto& f : feats_b)
        if (static_cast<int>(f.size()) != d) throw ArgumentError("fid: feature dimension mismatch");

    std::vector<double> mu_a, mu_b, cov_a, cov_b;
    mean_and_cov(feats_a, d, mu_a, cov_a);
    mean_and_cov(feats_b, d, mu_b, cov_b);

    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        double diff = mu_a[i] - mu_b[i];
        mean_term += diff * diff;
    }

    // tr((Sa Sb)^(1/2)) = tr((Sb^(1/2) Sa Sb^(1/2))^(1/2)), symmetric PSD.
    std::vector<double> rb = sym_sqrt(cov_b, d);
    std::vector<double> tmp(static_cast<size_t>(d) * d), mid(static_cast<size_t>(d) * d);
    gemm_nn(d, d, d, rb.data(), cov_a.data(), tmp.data());
    gemm_nn(d, d, d, tmp.data(), rb.data(), mid.data());
    // symmetrize against roundoff
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            double avg = 0.5 * (mid[static_cast<size_t>(i) * d + j] + mid[static_cast<size_t>(j) * d + i]);
            mid[static_cast<size_t>(i) * d + j] = avg;
            mid[static_cast<size_t>(j) * d + i] = avg;
        }
    }
    std::vector<double> V;
    std::vector<double> eig = jacobi_eigen(mid, d, V);
    double tr_root = 0.0;
    for (double lam : eig) tr_root += std::sqrt(std::max(0.0, lam));

    double tr_a = 0.0, tr_b = 0.0;
    for (int i = 0; i < d; ++i) {
        tr_a += cov_a[static_cast<size_t>(i) * d + i];
        tr_b += cov_b[static_cast<size_t>(i) * d + i];
    }
    return mean_term + tr_a + tr_b - 2.0 * tr_root;
}

std::vector<double> patch_features(const Tensor& img_u8) {
    if (img_u8.h < 8 || img_u8.w < 8) throw ArgumentError("patch_features: image smaller than 8x8");
    // luminance on the 8-bit scale
    std::vector<double> lum(static_cast<size_t>(img_u8.h) * img_u8.w);
    for (int y = 0; y < img_u8.h; ++y) {
        for (int x = 0; x < img_u8.w; ++x) {
            double v;
            if (img_u8.c >= 3) {
                v = 0.299 * img_u8.at(0, 0, y, x) + 0.587 * img_u8.at(0, 1, y, x) +
                    0.114 * img_u8.at(0, 2, y, x);
            } else {
                v = img_u8.at(0, 0, y, x);
            }
            lum[static_cast<size_t>(y) * img_u8.w + x] = v;
        }
    }
    std::vector<double> feat(64, 0.0);
    int patches = 0;
    for (int y = 0; y + 8 <= img_u8.h; y += 8) {
        for (int x = 0; x + 8 <= img_u8.w; x += 8) {
            for (int dy = 0; dy < 8; ++dy) {
                for (int dx = 0; dx < 8; ++dx) {
                    feat[dy * 8 + dx] += lum[static_cast<size_t>(y + dy) * img_u8.w + (x + dx)];
                }
            }
            ++patches;
        }
    }
    for (double& f : feat) f /= patches;
    return feat;
}

void write_feature_csv(const std::string& path,
                       const std::vector<std::vector<double>>& feats) {
    if (feats.empty()) throw ArgumentError("write_feature_csv: empty feature set");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature csv: " + path);
    size_t d = feats.front().size();
    for (size_t i = 0; i < d; ++i) out << (i ? "," : "") << "dim_" << i;
    out << "\n";
    out.precision(17);
    for (const auto& f : feats) {
        for (size_t i = 0; i < d; ++i) out << (i ? "," : "") << f[i];
        out << "\n";
    }
}

std::vector<std::vector<double>> read_feature_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read feature csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty feature csv: " + path);
    if (line.rfind("dim_0", 0) != 0) throw DataError("feature csv missing dim_* header: " + path);
    std::vector<std::vector<double>> feats;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!feats.empty() && row.size() != feats.front().size()) {
            throw DataError("ragged feature csv: " + path);
        }
        feats.push_back(std::move(row));
    }
    return feats;
}

double MetricReport::mean_psnr() const {
    double s = 0.0;
    int n = 0;
    for (const auto& r : rows) {
        if (std::isfinite(r.psnr_db)) { s += r.psnr_db; ++n; }
    }
    return n ? s / n : std::numeric_limits<double>::infinity();
}

double MetricReport::mean_ssim() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.ssim_val;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double MetricReport::mean_hist(HistMetric m) const {
    const std::array<double, 3>* a = nullptr;
    switch (m) {
        case HistMetric::Chi2: a = &hist_chi2; break;
        case HistMetric::Euclidean: a = &hist_euclidean; break;
        case HistMetric::Bhattacharyya: a = &hist_bhattacharyya; break;
    }
    return ((*a)[0] + (*a)[1] + (*a)[2]) / 3.0;
}

void write_metric_report_csv(const std::string& path, const MetricReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write metric report: " + path);
    out.precision(10);
    out << "sample_id,psnr_db,ssim\n";
    for (const auto& r : report.rows) {
        out << r.sample_id << ",";
        if (std::isfinite(r.psnr_db)) out << r.psnr_db;
        else out << "inf";
        out << "," << r.ssim_val << "\n";
    }
    out << "PSNR_MEAN," << report.mean_psnr() << ",excluded_inf=" << report.psnr_inf_count << "\n";
    out << "SSIM_MEAN," << report.mean_ssim() << ",\n";
    if (report.fid.has_value()) {
        out << "FID," << *report.fid << ",\n";
    } else {
        out << "FID,n/a,feature vectors not supplied\n";
    }
    out << "HIST_CHI2_MEAN," << report.mean_hist(HistMetric::Chi2) << ",\n";
    out << "HIST_EUCLIDEAN_MEAN," << report.mean_hist(HistMetric::Euclidean) << ",\n";
    out << "HIST_BHATTACHARYYA_MEAN," << report.mean_hist(HistMetric::Bhattacharyya) << ",\n";
}

}  // namespace cmdiff
