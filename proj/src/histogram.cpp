#include "cmdiff/histogram.hpp"

#include <algorithm>
#include <cmath>

#include "cmdiff/errors.hpp"

namespace cmdiff {

namespace {

void check_bins(int bins) {
    if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
}

// Clamp into [c_1, c_B]; below the first center everything belongs to bin 1,
// above the last to bin B.
double pull_to_centers(double x, int bins) {
    double c_first = 0.5 / bins;
    double c_last = (bins - 0.5) / bins;
    return std::min(c_last, std::max(c_first, x));
}

}  // namespace

std::vector<double> soft_histogram(std::span<const double> values, int bins) {
    check_bins(bins);
    std::vector<double> h(bins, 0.0);
    if (values.empty()) return h;
    double B = static_cast<double>(bins);
    for (double raw : values) {
        double x = pull_to_centers(raw, bins);
        // position relative to bin centers: u in [0, bins-1]
        double u = x * B - 0.5;
        int lo = static_cast<int>(std::floor(u));
        lo = std::max(0, std::min(bins - 2, lo));
        double frac = u - lo;  // weight on bin lo+1
        h[lo] += 1.0 - frac;
        h[lo + 1] += frac;
    }
    double inv = 1.0 / static_cast<double>(values.size());
    for (double& x : h) x *= inv;
    return h;
}

void soft_histogram_backward(std::span<const double> values, int bins,
                             std::span<const double> dL_dh, std::span<double> grad,
                             double scale) {
    check_bins(bins);
    if (values.size() != grad.size() || dL_dh.size() != static_cast<size_t>(bins)) {
        throw ArgumentError("soft_histogram_backward: size mismatch");
    }
    double B = static_cast<double>(bins);
    double inv_n = 1.0 / static_cast<double>(values.size());
    double c_first = 0.5 / bins;
    double c_last = (bins - 0.5) / bins;
    for (size_t i = 0; i < values.size(); ++i) {
        double x = values[i];
        if (x <= c_first || x >= c_last) continue;  // flat in the clamp zones
        double u = x * B - 0.5;
        int lo = static_cast<int>(std::floor(u));
        lo = std::max(0, std::min(bins - 2, lo));
        // dh[lo]/dx = -B/n, dh[lo+1]/dx = +B/n
        grad[i] += scale * B * inv_n * (dL_dh[lo + 1] - dL_dh[lo]);
    }
}

std::vector<double> hard_histogram(std::span<const double> values, int bins) {
    check_bins(bins);
    std::vector<double> h(bins, 0.0);
    if (values.empty()) return h;
    for (double x : values) {
        int b = static_cast<int>(std::floor(x * bins));
        b = std::max(0, std::min(bins - 1, b));
        h[b] += 1.0;
    }
    double inv = 1.0 / static_cast<double>(values.size());
    for (double& x : h) x *= inv;
    return h;
}

HistMetric hist_metric_from_string(const std::string& s) {
    if (s == "chi2") return HistMetric::Chi2;
    if (s == "euclidean") return HistMetric::Euclidean;
    if (s == "bhattacharyya") return HistMetric::Bhattacharyya;
    throw ConfigError("unknown histogram metric '" + s +
                      "' (expected chi2|euclidean|bhattacharyya)");
}

std::string to_string(HistMetric m) {
    switch (m) {
        case HistMetric::Chi2: return "chi2";
        case HistMetric::Euclidean: return "euclidean";
        case HistMetric::Bhattacharyya: return "bhattacharyya";
    }
    return "?";
}

double hist_distance(std::span<const double> p, std::span<const double> q,
                     HistMetric metric, double eps) {
    if (p.size() != q.size()) throw ArgumentError("hist_distance: length mismatch");
    switch (metric) {
        case HistMetric::Chi2: {
            double s = 0.0;
            for (size_t i = 0; i < p.size(); ++i) {
                double d = p[i] - q[i];
                s += d * d / (p[i] + q[i] + eps);
            }
            return s;
        }
        case HistMetric::Euclidean: {
            double s = 0.0;
            for (size_t i = 0; i < p.size(); ++i) {
                double d = p[i] - q[i];
                s += d * d;
            }
            return s;
        }
        case HistMetric::Bhattacharyya: {
            double s = 0.0;
            for (size_t i = 0; i < p.size(); ++i) s += std::sqrt(p[i] * q[i]);
            return -std::log(s);  // -log(0) = +inf for disjoint supports
        }
    }
    return 0.0;
}

void hist_distance_grad_p(std::span<const double> p, std::span<const double> q,
                          HistMetric metric, double eps, std::span<double> dp) {
    if (p.size() != q.size() || dp.size() != p.size()) {
        throw ArgumentError("hist_distance_grad_p: length mismatch");
    }
    switch (metric) {
        case HistMetric::Chi2: {
            for (size_t i = 0; i < p.size(); ++i) {
                double d = p[i] - q[i];
                double den = p[i] + q[i] + eps;
                dp[i] = (2.0 * d * den - d * d) / (den * den);
            }
            return;
        }
        case HistMetric::Euclidean: {
            for (size_t i = 0; i < p.size(); ++i) dp[i] = 2.0 * (p[i] - q[i]);
            return;
        }
        case HistMetric::Bhattacharyya: {
            double s = 0.0;
            for (size_t i = 0; i < p.size(); ++i) s += std::sqrt(p[i] * q[i]);
            for (size_t i = 0; i < p.size(); ++i) {
                if (q[i] <= 0.0) {
                    dp[i] = 0.0;
                } else {
                    double root_p = std::sqrt(std::max(p[i], 1e-12));
                    dp[i] = -std::sqrt(q[i]) / (2.0 * root_p * s);
                }
            }
            return;
        }
    }
}

}  // namespace cmdiff
