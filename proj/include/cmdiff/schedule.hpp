#pragma once

#include <vector>

#include "cmdiff/tensor.hpp"

namespace cmdiff {

// Forward-process noise schedule and the quantities derived from it.
// Step indices are 1-based (t = 1..T); alpha_bar(0) == 1 by convention, which
// makes the posterior at t = 1 collapse to (x0_hat, variance 0).
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> betas;           // beta_1..beta_T
    std::vector<double> alphas;          // 1 - beta_t
    std::vector<double> alpha_bars;      // prod_{s<=t} alpha_s
    std::vector<double> posterior_vars;  // beta_t (1 - abar_{t-1}) / (1 - abar_t)

    double beta(int t) const { return betas[check(t) - 1]; }
    double alpha(int t) const { return alphas[t - 1]; }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars[t - 1]; }
    double posterior_var(int t) const { return posterior_vars[check(t) - 1]; }

    int check(int t) const;
};

// Linear beta ramp from beta_start to beta_end over T steps.
DiffusionSchedule build_linear_schedule(int T, double beta_start, double beta_end);

// Endpoints rescaled by 1000/T so that shorter schedules keep roughly the same
// total noise as the reference 1000-step ramp.
DiffusionSchedule build_linear_schedule_scaled(int T, double beta_start_1000 = 1e-4,
                                               double beta_end_1000 = 0.01);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& sched);

// x0 = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t); clamp to [-1,1] is used
// during sampling and off in algebra tests.
Tensor predict_x0(const Tensor& x_t, const Tensor& eps_pred, int t,
                  const DiffusionSchedule& sched, bool clamp_unit = false);

// The mean's x_t coefficient: Bayes is the standard sqrt(alpha_t) form; Printed
// evaluates the (1 - alpha_t) variant for side-by-side comparison.
enum class PosteriorForm { Bayes, Printed };

struct PosteriorParams {
    Tensor mean;
    double variance = 0.0;
};

PosteriorParams posterior_params(const Tensor& x_t, const Tensor& x0_hat, int t,
                                 const DiffusionSchedule& sched,
                                 PosteriorForm form = PosteriorForm::Bayes);

}  // namespace cmdiff
