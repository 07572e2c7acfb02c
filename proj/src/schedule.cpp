#include "cmdiff/schedule.hpp"

#include <cmath>
#include <string>

namespace cmdiff {

int DiffusionSchedule::check(int t) const {
    if (t < 1 || t > T) {
        throw ArgumentError("step index t=" + std::to_string(t) + " outside [1," +
                            std::to_string(T) + "]");
    }
    return t;
}

DiffusionSchedule build_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("schedule needs T >= 1, got " + std::to_string(T));
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ConfigError("schedule endpoints must satisfy 0 < beta_start <= beta_end < 1");
    }
    DiffusionSchedule s;
    s.T = T;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    s.posterior_vars.resize(T);
    for (int i = 0; i < T; ++i) {
        s.betas[i] = (T == 1) ? beta_start
                              : beta_start + (beta_end - beta_start) * i / (T - 1);
        s.alphas[i] = 1.0 - s.betas[i];
        s.alpha_bars[i] = (i == 0 ? 1.0 : s.alpha_bars[i - 1]) * s.alphas[i];
    }
    for (int i = 0; i < T; ++i) {
        double abar_prev = (i == 0) ? 1.0 : s.alpha_bars[i - 1];
        s.posterior_vars[i] = s.betas[i] * (1.0 - abar_prev) / (1.0 - s.alpha_bars[i]);
    }
    return s;
}

DiffusionSchedule build_linear_schedule_scaled(int T, double beta_start_1000,
                                               double beta_end_1000) {
    double k = 1000.0 / T;
    // very short schedules would scale past 1; cap so the ramp stays valid
    double end = std::min(0.999, k * beta_end_1000);
    double start = std::min(end, k * beta_start_1000);
    return build_linear_schedule(T, start, end);
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& sched) {
    check_same_shape(x0, eps, "q_sample");
    double abar = sched.alpha_bar(sched.check(t));
    return axpby(x0, std::sqrt(abar), eps, std::sqrt(1.0 - abar));
}

Tensor predict_x0(const Tensor& x_t, const Tensor& eps_pred, int t,
                  const DiffusionSchedule& sched, bool clamp_unit) {
    check_same_shape(x_t, eps_pred, "predict_x0");
    double abar = sched.alpha_bar(sched.check(t));
    double inv = 1.0 / std::sqrt(abar);
    Tensor out = axpby(x_t, inv, eps_pred, -std::sqrt(1.0 - abar) * inv);
    if (clamp_unit) out = clamp(out, -1.0, 1.0);
    return out;
}

PosteriorParams posterior_params(const Tensor& x_t, const Tensor& x0_hat, int t,
                                 const DiffusionSchedule& sched, PosteriorForm form) {
    check_same_shape(x_t, x0_hat, "posterior_params");
    sched.check(t);
    double beta = sched.beta(t);
    double alpha = sched.alpha(t);
    double abar_prev = sched.alpha_bar(t - 1);
    double abar = sched.alpha_bar(t);
    double denom = 1.0 - abar;

    double coef_xt = (form == PosteriorForm::Bayes)
                         ? std::sqrt(alpha) * (1.0 - abar_prev) / denom
                         : (1.0 - alpha) * (1.0 - abar_prev) / denom;
    double coef_x0 = std::sqrt(abar_prev) * beta / denom;

    PosteriorParams p;
    p.mean = axpby(x_t, coef_xt, x0_hat, coef_x0);
    p.variance = sched.posterior_var(t);
    return p;
}

}  // namespace cmdiff
