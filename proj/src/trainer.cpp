#include "cmdiff/trainer.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cmdiff {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be > 0");
    if (lambda_ir_to_vis < 0.0 || lambda_vis_to_ir < 0.0) {
        throw ConfigError("TrainConfig: direction weights must be >= 0");
    }
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (lr_decay_every < 1) throw ConfigError("TrainConfig: lr_decay_every must be >= 1");
}

std::string TrainConfig::to_json_string() const {
    json j;
    j["lr"] = lr;
    j["lr_decay"] = lr_decay;
    j["lr_decay_every"] = lr_decay_every;
    j["batch_size"] = batch_size;
    j["total_iters"] = total_iters;
    j["lambda_ir_to_vis"] = lambda_ir_to_vis;
    j["lambda_vis_to_ir"] = lambda_vis_to_ir;
    j["seed"] = seed;
    j["disable_tdg"] = disable_tdg;
    j["disable_cfc"] = disable_cfc;
    j["weight_decay"] = weight_decay;
    j["grad_clip"] = grad_clip;
    j["checkpoint_every"] = checkpoint_every;
    j["edge_detector"] = edge_detector;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    json j = json::parse(text);
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.total_iters = j.value("total_iters", c.total_iters);
    c.lambda_ir_to_vis = j.value("lambda_ir_to_vis", c.lambda_ir_to_vis);
    c.lambda_vis_to_ir = j.value("lambda_vis_to_ir", c.lambda_vis_to_ir);
    c.seed = j.value("seed", c.seed);
    c.disable_tdg = j.value("disable_tdg", c.disable_tdg);
    c.disable_cfc = j.value("disable_cfc", c.disable_cfc);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.edge_detector = j.value("edge_detector", c.edge_detector);
    c.validate();
    return c;
}

double lr_at(const TrainConfig& cfg, long completed) {
    long decays = completed / cfg.lr_decay_every;
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(decays));
}

Tensor build_direction_input(const PairedSample& pair, const DirectionLabel& dir, int t,
                             const Tensor& eps, const DiffusionSchedule& sched, bool cfc) {
    const Tensor& target = dir.target == Modality::VIS ? pair.vis : pair.ir;
    const Tensor& source = dir.target == Modality::VIS ? pair.ir : pair.vis;
    const Tensor& edges = dir.target == Modality::VIS ? pair.edges_ir : pair.edges_vis;
    Tensor noisy = q_sample(target, t, eps, sched);
    return cfc ? assemble_input(noisy, source, edges) : assemble_input_no_edges(noisy, source);
}

JointLossTerms joint_loss(const PairedSample& pair, int t1, int t2, const Tensor& eps1,
                          const Tensor& eps2, const PredictFn& predict,
                          const TrainConfig& cfg, const DiffusionSchedule& sched) {
    bool cfc = !cfg.disable_cfc;
    JointLossTerms terms;

    Tensor z1 = build_direction_input(pair, DirectionLabel::ir_to_vis(), t1, eps1, sched, cfc);
    Tensor pred1 = predict(z1, DirectionLabel::ir_to_vis().id, Modality::IR, t1);
    terms.ir_to_vis = mean_sq_diff(eps1, pred1);

    Tensor z2 = build_direction_input(pair, DirectionLabel::vis_to_ir(), t2, eps2, sched, cfc);
    Tensor pred2 = predict(z2, DirectionLabel::vis_to_ir().id, Modality::VIS, t2);
    terms.vis_to_ir = mean_sq_diff(eps2, pred2);

    terms.total = cfg.lambda_ir_to_vis * terms.ir_to_vis + cfg.lambda_vis_to_ir * terms.vis_to_ir;
    return terms;
}

TrainState::TrainState(const DenoiserConfig& model_cfg, const DiffusionSchedule& sched_,
                       const TrainConfig& cfg_)
    : model(std::make_unique<Denoiser>(model_cfg, seed_stream(cfg_.seed, "init").next_u64())),
      sched(sched_),
      cfg(cfg_),
      rng_t(seed_stream(cfg_.seed, "train/t")),
      rng_eps(seed_stream(cfg_.seed, "train/eps")),
      rng_batch(seed_stream(cfg_.seed, "train/batch")) {
    cfg.validate();
    if (cfg.disable_tdg != !model_cfg.tdg || cfg.disable_cfc != !model_cfg.cfc) {
        throw ConfigError("TrainState: tdg/cfc flags disagree between train and model configs");
    }
}

namespace {

Tensor gaussian_like(const Tensor& shape, RngStream& rng) {
    Tensor eps = Tensor::zeros_like(shape);
    for (double& x : eps.v) x = rng.normal();
    return eps;
}

// Forward + backward for one direction over the whole batch; returns the
// direction's MSE term (mean over every element).
double direction_pass(TrainState& st, const std::vector<const PairedSample*>& batch,
                      const DirectionLabel& dir, const std::vector<int>& ts,
                      const std::vector<Tensor>& eps, double lambda) {
    bool cfc = !st.cfg.disable_cfc;
    std::vector<Tensor> zs;
    zs.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        zs.push_back(build_direction_input(*batch[i], dir, ts[i], eps[i], st.sched, cfc));
    }
    Tensor z = stack_images(zs);
    std::vector<int> labels(batch.size(), dir.id);
    Tensor pred = st.model->epsilon_predict(z, labels, dir.source(), ts);

    double se = 0.0;
    Tensor g = Tensor::zeros_like(pred);
    size_t stride = static_cast<size_t>(pred.c) * pred.h * pred.w;
    double inv = 1.0 / static_cast<double>(pred.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const Tensor& e = eps[i];
        for (size_t k = 0; k < stride; ++k) {
            double d = pred.v[i * stride + k] - e.v[k];
            se += d * d;
            g.v[i * stride + k] = lambda * 2.0 * d * inv;
        }
    }
    if (lambda != 0.0) st.model->backward(g);
    return se * inv;
}

}  // namespace

StepRecord train_step(TrainState& st, const std::vector<const PairedSample*>& batch) {
    if (batch.empty()) throw ArgumentError("train_step: empty batch");
    st.model->params().zero_grads();

    std::vector<int> t1(batch.size()), t2(batch.size());
    std::vector<Tensor> eps1, eps2;
    eps1.reserve(batch.size());
    eps2.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        t1[i] = st.rng_t.uniform_int(1, st.sched.T);
        t2[i] = st.rng_t.uniform_int(1, st.sched.T);
        eps1.push_back(gaussian_like(batch[i]->vis, st.rng_eps));
        eps2.push_back(gaussian_like(batch[i]->ir, st.rng_eps));
    }

    StepRecord rec;
    rec.loss_ir_to_vis =
        direction_pass(st, batch, DirectionLabel::ir_to_vis(), t1, eps1, st.cfg.lambda_ir_to_vis);
    rec.loss_vis_to_ir =
        direction_pass(st, batch, DirectionLabel::vis_to_ir(), t2, eps2, st.cfg.lambda_vis_to_ir);

    double total = st.cfg.lambda_ir_to_vis * rec.loss_ir_to_vis +
                   st.cfg.lambda_vis_to_ir * rec.loss_vis_to_ir;
    if (!std::isfinite(total)) {
        std::ostringstream os;
        os << "non-finite loss at iteration " << st.iter + 1 << ": loss_ir_to_vis="
           << rec.loss_ir_to_vis << " loss_vis_to_ir=" << rec.loss_vis_to_ir << " t1=[";
        for (int t : t1) os << t << " ";
        os << "] t2=[";
        for (int t : t2) os << t << " ";
        os << "]";
        throw NumericError(os.str());
    }

    clip_grad_norm(st.model->params(), st.cfg.grad_clip);
    double lr = lr_at(st.cfg, st.iter);
    adamw_step(st.model->params(), lr, st.cfg.weight_decay, st.iter + 1);
    ++st.iter;

    rec.iteration = st.iter;
    rec.lr = lr;
    return rec;
}

TrainRunResult run_training(const std::vector<PairedSample>& train_samples,
                            const DenoiserConfig& model_cfg, const DiffusionSchedule& sched,
                            const TrainConfig& cfg, const std::string& out_dir,
                            const std::string& resume_ckpt) {
    if (train_samples.empty()) throw DataError("run_training: empty training set");
    fs::create_directories(out_dir);

    TrainState st(model_cfg, sched, cfg);
    if (!resume_ckpt.empty()) {
        CheckpointMeta meta;
        auto loaded = load_checkpoint(resume_ckpt, &meta);
        std::ostringstream diff;
        if (meta.denoiser.to_json_string() != model_cfg.to_json_string()) {
            diff << "denoiser config differs;";
        }
        if (meta.schedule_T != sched.T) diff << " schedule T " << meta.schedule_T << " vs " << sched.T << ";";
        if (!diff.str().empty()) {
            throw ConfigError("resume refused, checkpoint disagrees with run config: " + diff.str());
        }
        st.model = std::move(loaded);
        st.iter = meta.iteration;
    }

    std::string loss_path = (fs::path(out_dir) / "loss.csv").string();
    std::ofstream loss_csv(loss_path, resume_ckpt.empty() ? std::ios::trunc : std::ios::app);
    if (!loss_csv) throw DataError("cannot write " + loss_path);
    if (resume_ckpt.empty()) {
        loss_csv << "iteration,epoch,loss_ir_to_vis,loss_vis_to_ir,lr\n";
    }

    CheckpointMeta meta;
    meta.denoiser = model_cfg;
    meta.schedule_T = sched.T;
    meta.beta_start = sched.betas.front();
    meta.beta_end = sched.betas.back();
    meta.train_config_json = cfg.to_json_string();

    TrainRunResult result;
    long n = static_cast<long>(train_samples.size());
    while (st.iter < cfg.total_iters) {
        std::vector<const PairedSample*> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            batch.push_back(&train_samples[st.rng_batch.uniform_int(0, static_cast<int>(n) - 1)]);
        }
        StepRecord rec = train_step(st, batch);
        long epoch = (rec.iteration * cfg.batch_size) / n;
        loss_csv << rec.iteration << "," << epoch << "," << rec.loss_ir_to_vis << ","
                 << rec.loss_vis_to_ir << "," << rec.lr << "\n";
        if (!loss_csv) throw DataError("write failed on " + loss_path);
        result.records.push_back(rec);

        if (cfg.checkpoint_every > 0 && rec.iteration % cfg.checkpoint_every == 0 &&
            rec.iteration < cfg.total_iters) {
            meta.iteration = rec.iteration;
            std::ostringstream name;
            name << "ckpt_" << rec.iteration << ".bin";
            save_checkpoint((fs::path(out_dir) / name.str()).string(), *st.model, meta);
        }
    }
    loss_csv.flush();

    meta.iteration = st.iter;
    result.final_checkpoint = (fs::path(out_dir) / "ckpt_final.bin").string();
    save_checkpoint(result.final_checkpoint, *st.model, meta);
    return result;
}

}  // namespace cmdiff
