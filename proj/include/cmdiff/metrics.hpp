#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cmdiff/histogram.hpp"
#include "cmdiff/tensor.hpp"

namespace cmdiff {

// Inputs are 8-bit-scale tensors (values 0..255). Identical images return
// +inf; report writers print "inf" and exclude it from means.
double psnr(const Tensor& a_u8, const Tensor& b_u8);

enum class SsimWindow { Global, Gaussian11 };

// Structural similarity with c1=(0.01*255)^2, c2=(0.03*255)^2. Global mode
// evaluates the formula on whole-image moments; gaussian11 averages it over
// 11x11 windows (sigma 1.5). Multi-channel inputs average per-channel scores.
double ssim(const Tensor& a_u8, const Tensor& b_u8, SsimWindow window = SsimWindow::Gaussian11);

// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)) over Gaussian fits of two
// feature populations. Covariances use the N-1 normalization; the matrix root
// comes from symmetric eigendecompositions with negative eigenvalues clamped.
double fid_from_features(const std::vector<std::vector<double>>& feats_a,
                         const std::vector<std::vector<double>>& feats_b);

// hist_distance / HistMetric are shared with the constraint losses and
// re-exported through this header (see histogram.hpp).

// Paired-image perceptual metric interface (LPIPS-shaped). No implementation
// ships here; callers plug in their own backend.
struct PerceptualMetric {
    virtual ~PerceptualMetric() = default;
    virtual double compare(const Tensor& a_u8, const Tensor& b_u8) const = 0;
};

// Smoke-test feature extractor: mean-pooled flattened 8x8 luminance patches.
// Not comparable to FID numbers computed with pretrained backbones.
std::vector<double> patch_features(const Tensor& img_u8);

// Feature files: CSV with header dim_0..dim_{k-1}, one vector per row.
void write_feature_csv(const std::string& path,
                       const std::vector<std::vector<double>>& feats);
std::vector<std::vector<double>> read_feature_csv(const std::string& path);

struct MetricRow {
    std::string sample_id;
    double psnr_db = 0.0;
    double ssim_val = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::optional<double> fid;
    std::array<double, 3> hist_chi2{0, 0, 0};           // per channel, pooled pred vs truth
    std::array<double, 3> hist_euclidean{0, 0, 0};
    std::array<double, 3> hist_bhattacharyya{0, 0, 0};
    int psnr_inf_count = 0;

    double mean_psnr() const;  // over finite rows
    double mean_ssim() const;
    double mean_hist(HistMetric m) const;
};

void write_metric_report_csv(const std::string& path, const MetricReport& report);

}  // namespace cmdiff
