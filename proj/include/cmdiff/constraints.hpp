#pragma once

#include <array>
#include <string>
#include <vector>

#include "cmdiff/histogram.hpp"
#include "cmdiff/tensor.hpp"

namespace cmdiff {

// Target-modality statistical priors plus the knobs of the guided sampler.
// Histograms and moments live on the [0,1] pixel scale.
struct ConstraintSpec {
    int bins = 32;
    std::array<std::vector<double>, 3> prior_hist;
    std::array<double, 3> prior_mean{0.0, 0.0, 0.0};
    std::array<double, 3> prior_std{0.0, 0.0, 0.0};
    double lambda_ccl = 20.0;
    double lambda_scl = 20.0;
    double eps = 1e-6;
    HistMetric metric = HistMetric::Chi2;
    double guidance_scale = 1.0;

    void validate() const;
    bool guidance_enabled() const { return guidance_scale != 0.0 && (lambda_ccl > 0.0 || lambda_scl > 0.0); }

    std::string to_json_string() const;
    static ConstraintSpec from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static ConstraintSpec load(const std::string& path);
};

// Pool every pixel of every image (3-channel, [0,1] domain) into per-channel
// empirical histograms and population moments.
ConstraintSpec fit_constraints_from_images(const std::vector<const Tensor*>& images_unit,
                                           int bins);

// Per-channel histogram discrepancy using the spec's metric (soft histograms
// on the prediction side so the loss stays differentiable).
double channel_constraint_loss(const Tensor& x_unit, const ConstraintSpec& spec);

// First/second moment alignment: sum_c |mu - mu_prior| + |sigma - sigma_prior|.
double statistical_constraint_loss(const Tensor& x_unit, const ConstraintSpec& spec);

struct ConstraintEval {
    double total = 0.0;
    double ccl = 0.0;
    double scl = 0.0;
    Tensor grad;  // d total / d x_unit, analytic
};

// lambda_ccl * L_ccl + lambda_scl * L_scl with its exact gradient.
ConstraintEval constraint_loss(const Tensor& x_unit, const ConstraintSpec& spec);

// Per-channel mean/std (population) of a 3-channel image in any domain.
void channel_moments(const Tensor& img, std::array<double, 3>& mean,
                     std::array<double, 3>& stdev);

}  // namespace cmdiff
