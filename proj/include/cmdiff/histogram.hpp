#pragma once

#include <span>
#include <string>
#include <vector>

namespace cmdiff {

// Differentiable histogram over [0,1] with B triangular kernels centered at
// c_i = (i - 0.5)/B. Values are first pulled into [c_1, c_B] so the kernels
// form a partition of unity and every histogram sums to exactly 1.
std::vector<double> soft_histogram(std::span<const double> values, int bins);

// Chain rule through the soft histogram: given dL/dh, accumulate
// scale * dL/dvalue into grad (same length as values). Each value touches at
// most two bins, so this is O(n).
void soft_histogram_backward(std::span<const double> values, int bins,
                             std::span<const double> dL_dh, std::span<double> grad,
                             double scale = 1.0);

// Plain binned frequencies (used for empirical priors and reports).
std::vector<double> hard_histogram(std::span<const double> values, int bins);

enum class HistMetric { Chi2, Euclidean, Bhattacharyya };

HistMetric hist_metric_from_string(const std::string& s);
std::string to_string(HistMetric m);

// chi2:          sum (p-q)^2 / (p+q+eps)
// euclidean:     sum (p-q)^2
// bhattacharyya: -ln sum sqrt(p q)   (+inf when supports are disjoint)
double hist_distance(std::span<const double> p, std::span<const double> q,
                     HistMetric metric, double eps = 1e-6);

// dD/dp for the chosen metric, written into dp.
void hist_distance_grad_p(std::span<const double> p, std::span<const double> q,
                          HistMetric metric, double eps, std::span<double> dp);

}  // namespace cmdiff
