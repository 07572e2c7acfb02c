#include "cmdiff/constraints.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cmdiff/errors.hpp"

namespace cmdiff {

using nlohmann::json;

void ConstraintSpec::validate() const {
    if (bins < 2) throw ConfigError("ConstraintSpec: bins must be >= 2");
    if (lambda_ccl < 0.0 || lambda_scl < 0.0) throw ConfigError("ConstraintSpec: lambdas must be >= 0");
    for (int c = 0; c < 3; ++c) {
        if (prior_std[c] < 0.0) throw ConfigError("ConstraintSpec: negative prior std");
        if (prior_hist[c].size() != static_cast<size_t>(bins)) {
            throw ConfigError("ConstraintSpec: histogram length != bins");
        }
        double s = 0.0;
        for (double x : prior_hist[c]) s += x;
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("ConstraintSpec: histogram does not sum to 1");
    }
}

std::string ConstraintSpec::to_json_string() const {
    json j;
    j["bins"] = bins;
    j["prior_hist"] = {{"r", prior_hist[0]}, {"g", prior_hist[1]}, {"b", prior_hist[2]}};
    j["prior_mean"] = prior_mean;
    j["prior_std"] = prior_std;
    j["lambda_ccl"] = lambda_ccl;
    j["lambda_scl"] = lambda_scl;
    j["eps"] = eps;
    j["metric"] = to_string(metric);
    j["guidance_scale"] = guidance_scale;
    return j.dump(2);
}

ConstraintSpec ConstraintSpec::from_json_string(const std::string& text) {
    json j = json::parse(text);
    ConstraintSpec s;
    s.bins = j.at("bins").get<int>();
    s.prior_hist[0] = j.at("prior_hist").at("r").get<std::vector<double>>();
    s.prior_hist[1] = j.at("prior_hist").at("g").get<std::vector<double>>();
    s.prior_hist[2] = j.at("prior_hist").at("b").get<std::vector<double>>();
    s.prior_mean = j.at("prior_mean").get<std::array<double, 3>>();
    s.prior_std = j.at("prior_std").get<std::array<double, 3>>();
    s.lambda_ccl = j.at("lambda_ccl").get<double>();
    s.lambda_scl = j.at("lambda_scl").get<double>();
    s.eps = j.value("eps", 1e-6);
    s.metric = hist_metric_from_string(j.value("metric", std::string("chi2")));
    s.guidance_scale = j.value("guidance_scale", 1.0);
    s.validate();
    return s;
}

void ConstraintSpec::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write constraint spec: " + path);
    out << to_json_string() << "\n";
}

ConstraintSpec ConstraintSpec::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read constraint spec: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

void channel_moments(const Tensor& img, std::array<double, 3>& mean,
                     std::array<double, 3>& stdev) {
    if (img.c != 3) throw ArgumentError("channel_moments: expected 3 channels");
    size_t plane = static_cast<size_t>(img.h) * img.w * img.n;
    for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int in = 0; in < img.n; ++in) {
            const double* p = img.plane(in, c);
            for (size_t i = 0; i < static_cast<size_t>(img.h) * img.w; ++i) s += p[i];
        }
        double mu = s / static_cast<double>(plane);
        double s2 = 0.0;
        for (int in = 0; in < img.n; ++in) {
            const double* p = img.plane(in, c);
            for (size_t i = 0; i < static_cast<size_t>(img.h) * img.w; ++i) {
                double d = p[i] - mu;
                s2 += d * d;
            }
        }
        mean[c] = mu;
        stdev[c] = std::sqrt(s2 / static_cast<double>(plane));
    }
}

ConstraintSpec fit_constraints_from_images(const std::vector<const Tensor*>& images_unit,
                                           int bins) {
    if (images_unit.empty()) throw ConfigError("fit_constraints: empty dataset");
    if (bins < 2) throw ConfigError("fit_constraints: bins must be >= 2");
    ConstraintSpec spec;
    spec.bins = bins;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> pool;
        for (const Tensor* img : images_unit) {
            if (img->c != 3) throw ArgumentError("fit_constraints: expected 3-channel images");
            const double* p = img->plane(0, c);
            pool.insert(pool.end(), p, p + static_cast<size_t>(img->h) * img->w);
        }
        spec.prior_hist[c] = hard_histogram(pool, bins);
        double mu = 0.0;
        for (double x : pool) mu += x;
        mu /= static_cast<double>(pool.size());
        double s2 = 0.0;
        for (double x : pool) s2 += (x - mu) * (x - mu);
        spec.prior_mean[c] = mu;
        spec.prior_std[c] = std::sqrt(s2 / static_cast<double>(pool.size()));
    }
    spec.validate();
    return spec;
}

namespace {

std::span<const double> channel_span(const Tensor& x, int c) {
    return {x.plane(0, c), static_cast<size_t>(x.h) * x.w};
}

}  // namespace

double channel_constraint_loss(const Tensor& x_unit, const ConstraintSpec& spec) {
    if (x_unit.c != 3) throw ArgumentError("channel_constraint_loss: expected 3 channels");
    for (int c = 0; c < 3; ++c) {
        if (spec.prior_hist[c].size() != static_cast<size_t>(spec.bins)) {
            throw ConfigError("channel_constraint_loss: spec bin count mismatch");
        }
    }
    double loss = 0.0;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> h = soft_histogram(channel_span(x_unit, c), spec.bins);
        loss += hist_distance(h, spec.prior_hist[c], spec.metric, spec.eps);
    }
    return loss;
}

double statistical_constraint_loss(const Tensor& x_unit, const ConstraintSpec& spec) {
    std::array<double, 3> mu, sigma;
    channel_moments(x_unit, mu, sigma);
    double loss = 0.0;
    for (int c = 0; c < 3; ++c) {
        loss += std::abs(mu[c] - spec.prior_mean[c]) + std::abs(sigma[c] - spec.prior_std[c]);
    }
    return loss;
}

ConstraintEval constraint_loss(const Tensor& x_unit, const ConstraintSpec& spec) {
    if (x_unit.c != 3 || x_unit.n != 1) {
        throw ArgumentError("constraint_loss: expected a single 3-channel image");
    }
    ConstraintEval ev;
    ev.grad = Tensor::zeros_like(x_unit);
    size_t npix = static_cast<size_t>(x_unit.h) * x_unit.w;
    double inv_n = 1.0 / static_cast<double>(npix);

    for (int c = 0; c < 3; ++c) {
        auto vals = channel_span(x_unit, c);
        std::span<double> gch{ev.grad.plane(0, c), npix};

        if (spec.lambda_ccl > 0.0) {
            std::vector<double> h = soft_histogram(vals, spec.bins);
            ev.ccl += hist_distance(h, spec.prior_hist[c], spec.metric, spec.eps);
            std::vector<double> dh(spec.bins);
            hist_distance_grad_p(h, spec.prior_hist[c], spec.metric, spec.eps, dh);
            soft_histogram_backward(vals, spec.bins, dh, gch, spec.lambda_ccl);
        }

        if (spec.lambda_scl > 0.0) {
            double mu = 0.0;
            for (double x : vals) mu += x;
            mu *= inv_n;
            double s2 = 0.0;
            for (double x : vals) s2 += (x - mu) * (x - mu);
            double sigma = std::sqrt(s2 * inv_n);
            double dmu = mu - spec.prior_mean[c];
            double dsig = sigma - spec.prior_std[c];
            ev.scl += std::abs(dmu) + std::abs(dsig);
            double smu = (dmu > 0.0) ? 1.0 : (dmu < 0.0 ? -1.0 : 0.0);
            double ssig = (dsig > 0.0) ? 1.0 : (dsig < 0.0 ? -1.0 : 0.0);
            for (size_t i = 0; i < npix; ++i) {
                double g = smu * inv_n;
                if (sigma > 1e-12) g += ssig * (vals[i] - mu) * inv_n / sigma;
                gch[i] += spec.lambda_scl * g;
            }
        }
    }
    ev.total = spec.lambda_ccl * ev.ccl + spec.lambda_scl * ev.scl;
    return ev;
}

}  // namespace cmdiff
