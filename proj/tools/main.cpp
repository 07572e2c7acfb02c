// cmdiff: bidirectional infrared<->visible translation diffusion toolkit.
//
// Subcommands: synth, fit-constraints, train, translate, evaluate, ablate.
// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "cmdiff/checkpoint.hpp"
#include "cmdiff/constraints.hpp"
#include "cmdiff/data_io.hpp"
#include "cmdiff/metrics.hpp"
#include "cmdiff/png_io.hpp"
#include "cmdiff/sampler.hpp"
#include "cmdiff/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmdiff;

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        out << text;
    }
    fs::rename(tmp, path);
}

void write_run_config(const std::string& dir, const json& j) {
    fs::create_directories(dir);
    write_text_atomic((fs::path(dir) / "run_config.json").string(), j.dump(2) + "\n");
}

int env_workers() {
    const char* env = std::getenv("CMDIFF_NUM_WORKERS");
    if (!env) return 1;
    int w = std::atoi(env);
    return w < 1 ? 1 : w;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    return json::parse(in);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    int count = 0;
    int resolution = 32;
    uint64_t seed = 0;
    std::string out;
    bool force = false;
};

int run_synth(const SynthArgs& a) {
    if (a.count < 1) throw ConfigError("--count must be >= 1");
    if (fs::exists(a.out) && !fs::is_empty(a.out) && !a.force) {
        throw DataError("output directory " + a.out + " is not empty (pass --force to overwrite)");
    }
    DatasetManifest m = generate_synthetic_pairs(a.out, a.count, a.resolution, a.seed);
    json rc{{"command", "synth"}, {"count", a.count}, {"resolution", a.resolution},
            {"seed", a.seed}, {"out", a.out}};
    write_run_config(a.out, rc);
    std::cout << "wrote " << m.pair_count() << " pairs under " << a.out << " (train "
              << m.train_ids.size() << ", test " << m.test_ids.size() << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fit-constraints
// ---------------------------------------------------------------------------

struct FitArgs {
    std::string data;
    std::string modality;
    int bins = 32;
    std::string out;
};

int run_fit(const FitArgs& a) {
    Modality mod = modality_from_string(a.modality);
    DatasetManifest m = load_paired_dataset(a.data, detect_dataset_resolution(a.data));
    ConstraintSpec spec = fit_constraints(m, mod, a.bins);
    spec.save(a.out);

    json rc{{"command", "fit-constraints"}, {"data", a.data}, {"modality", a.modality},
            {"bins", a.bins}, {"out", a.out}, {"train_pairs", m.train_ids.size()}};
    write_text_atomic(a.out + ".run.json", rc.dump(2) + "\n");
    std::cout << "fit " << a.modality << " priors over " << m.train_ids.size()
              << " training pairs -> " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string config;
    long iters = -1;
    bool disable_tdg = false;
    bool disable_cfc = false;
    std::string out;
    std::string resume;
};

int run_train(const TrainArgs& a) {
    json cfg_json;
    if (!a.config.empty()) cfg_json = load_json_file(a.config);

    TrainConfig tc;
    if (cfg_json.contains("train")) tc = TrainConfig::from_json_string(cfg_json["train"].dump());
    if (a.iters >= 0) tc.total_iters = a.iters;
    if (a.disable_tdg) tc.disable_tdg = true;
    if (a.disable_cfc) tc.disable_cfc = true;

    int T = 200;
    double beta_start = -1, beta_end = -1;
    if (cfg_json.contains("schedule")) {
        const json& s = cfg_json["schedule"];
        T = s.value("T", 200);
        beta_start = s.value("beta_start", -1.0);
        beta_end = s.value("beta_end", -1.0);
    }
    DiffusionSchedule sched = (beta_start > 0)
                                  ? build_linear_schedule(T, beta_start, beta_end)
                                  : build_linear_schedule_scaled(T);

    DatasetManifest m = load_paired_dataset(a.data, detect_dataset_resolution(a.data));

    DenoiserConfig dc = DenoiserConfig::desk(m.resolution, !tc.disable_tdg, !tc.disable_cfc);
    if (cfg_json.contains("denoiser")) {
        json dj = json::parse(dc.to_json_string());
        dj.merge_patch(cfg_json["denoiser"]);
        dj["tdg"] = !tc.disable_tdg;
        dj["cfc"] = !tc.disable_cfc;
        dj["in_channels"] = tc.disable_cfc ? 6 : 7;
        dc = DenoiserConfig::from_json_string(dj.dump());
    }

    EdgeDetector det = edge_detector_from_string(tc.edge_detector);
    std::vector<PairedSample> train_samples = load_samples(m, m.train_ids, det);

    json rc{{"command", "train"},
            {"data", a.data},
            {"out", a.out},
            {"resume", a.resume},
            {"train", json::parse(tc.to_json_string())},
            {"denoiser", json::parse(dc.to_json_string())},
            {"schedule", {{"T", sched.T},
                          {"beta_start", sched.betas.front()},
                          {"beta_end", sched.betas.back()}}},
            {"seed", tc.seed}};
    write_run_config(a.out, rc);

    TrainRunResult res = run_training(train_samples, dc, sched, tc, a.out, a.resume);
    std::cout << "trained " << res.records.size() << " iterations -> "
              << res.final_checkpoint << "\n";
    if (!res.records.empty()) {
        const StepRecord& last = res.records.back();
        std::cout << "final losses: ir_to_vis " << last.loss_ir_to_vis << ", vis_to_ir "
                  << last.loss_vis_to_ir << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// translate
// ---------------------------------------------------------------------------

struct TranslateArgs {
    std::string checkpoint;
    std::string direction;
    std::string constraints;
    double lambda_ccl = -1.0;  // -1 = take from the constraint file
    double lambda_scl = -1.0;
    std::string metric;
    double guidance_scale = -1.0;
    uint64_t seed = 0;
    std::string in;
    std::string out;
    std::string edges;  // empty = inherit the detector the checkpoint trained with
    std::string split = "test";
    int limit = 0;  // 0 = all
};

struct TranslatePlan {
    DirectionLabel dir = DirectionLabel::ir_to_vis();
    ConstraintSpec spec;
    std::vector<std::string> ids;
    std::vector<Tensor> sources;
    std::vector<Tensor> edges;
};

TranslatePlan prepare_translate(const TranslateArgs& a, const DatasetManifest& m) {
    TranslatePlan plan;
    plan.dir = DirectionLabel::from_string(a.direction);

    fs::path src_dir = fs::path(m.root) / to_string(plan.dir.source());
    if (!fs::is_directory(src_dir)) {
        throw DataError("direction " + plan.dir.name() + " needs source images under " +
                        src_dir.string() + ", which does not exist");
    }

    plan.spec = a.constraints.empty() ? unguided_spec() : ConstraintSpec::load(a.constraints);
    if (a.lambda_ccl >= 0) plan.spec.lambda_ccl = a.lambda_ccl;
    if (a.lambda_scl >= 0) plan.spec.lambda_scl = a.lambda_scl;
    if (!a.metric.empty()) plan.spec.metric = hist_metric_from_string(a.metric);
    if (a.guidance_scale >= 0) plan.spec.guidance_scale = a.guidance_scale;
    if (a.constraints.empty() && plan.spec.guidance_enabled()) {
        throw ConfigError("nonzero constraint weights require --constraints");
    }

    if (a.split == "train") plan.ids = m.train_ids;
    else if (a.split == "test") plan.ids = m.test_ids;
    else if (a.split == "all") plan.ids = m.all_ids();
    else throw ConfigError("unknown --split '" + a.split + "'");
    if (a.limit > 0 && static_cast<int>(plan.ids.size()) > a.limit) plan.ids.resize(a.limit);
    if (plan.ids.empty()) throw DataError("no inputs selected from " + m.root);

    EdgeDetector det = edge_detector_from_string(a.edges);
    for (const auto& id : plan.ids) {
        PairedSample s = load_sample(m, id, det);
        plan.sources.push_back(plan.dir.source() == Modality::IR ? s.ir : s.vis);
        plan.edges.push_back(plan.dir.source() == Modality::IR ? s.edges_ir : s.edges_vis);
    }
    return plan;
}

int run_translate(TranslateArgs a) {
    if (a.edges.empty()) {
        a.edges = "sobel";
        CheckpointMeta meta = load_checkpoint_meta(a.checkpoint);
        if (!meta.train_config_json.empty()) {
            a.edges = TrainConfig::from_json_string(meta.train_config_json).edge_detector;
        }
    }
    DatasetManifest m = load_paired_dataset(a.in, detect_dataset_resolution(a.in));
    TranslatePlan plan = prepare_translate(a, m);

    fs::create_directories(a.out);
    json rc{{"command", "translate"},
            {"checkpoint", a.checkpoint},
            {"direction", a.direction},
            {"constraints", a.constraints},
            {"sampler", json::parse(plan.spec.to_json_string())},
            {"seed", a.seed},
            {"edges", a.edges},
            {"in", a.in},
            {"split", a.split},
            {"out", a.out}};
    write_run_config(a.out, rc);

    int workers = std::min<int>(env_workers(), static_cast<int>(plan.ids.size()));
    size_t n = plan.ids.size();
    std::vector<Tensor> outputs(n);
    std::vector<int> skips(n, 0);

    auto run_chunk = [&](size_t lo, size_t hi, Denoiser& model, const DiffusionSchedule& sched) {
        std::vector<Tensor> sources(plan.sources.begin() + lo, plan.sources.begin() + hi);
        std::vector<Tensor> edges(plan.edges.begin() + lo, plan.edges.begin() + hi);
        std::vector<std::string> names(plan.ids.begin() + lo, plan.ids.begin() + hi);
        auto results = translate_batch(model, sched, sources, edges, plan.dir.source(),
                                       plan.dir, plan.spec, a.seed, &names);
        for (size_t i = 0; i < results.size(); ++i) {
            outputs[lo + i] = std::move(results[i].image_u8);
            skips[lo + i] = results[i].guidance_skips;
        }
    };

    if (workers <= 1) {
        CheckpointMeta meta;
        auto model = load_checkpoint(a.checkpoint, &meta);
        run_chunk(0, n, *model, meta.schedule());
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        size_t chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            size_t lo = w * chunk, hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi, w]() {
                try {
                    CheckpointMeta meta;
                    auto model = load_checkpoint(a.checkpoint, &meta);  // per-worker instance
                    run_chunk(lo, hi, *model, meta.schedule());
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }

    int total_skips = 0;
    for (size_t i = 0; i < n; ++i) {
        write_png_u8_atomic((fs::path(a.out) / (plan.ids[i] + ".png")).string(), outputs[i]);
        total_skips += skips[i];
    }
    if (total_skips > 0) {
        std::cerr << "warning: guidance skipped on " << total_skips << " steps\n";
    }
    std::cout << "translated " << n << " images (" << a.direction << ") -> " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string pred;
    std::string truth;
    std::string features_a;
    std::string features_b;
    std::string constraints;
    int bins = 32;
    std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
    std::vector<std::string> pred_ids;
    for (const auto& e : fs::directory_iterator(a.pred)) {
        if (e.path().extension() == ".png") pred_ids.push_back(e.path().stem().string());
    }
    std::sort(pred_ids.begin(), pred_ids.end());
    if (pred_ids.empty()) throw DataError("no predictions under " + a.pred);

    std::vector<std::string> missing;
    for (const auto& id : pred_ids) {
        if (!fs::exists(fs::path(a.truth) / (id + ".png"))) missing.push_back(id);
    }
    if (!missing.empty()) {
        std::string msg = "predictions without ground truth:";
        for (const auto& id : missing) msg += " " + id;
        throw DataError(msg);
    }

    fs::create_directories(a.out);
    MetricReport report;
    std::array<std::vector<double>, 3> pred_pool, truth_pool;
    for (const auto& id : pred_ids) {
        Tensor p = read_png_u8((fs::path(a.pred) / (id + ".png")).string());
        Tensor t = read_png_u8((fs::path(a.truth) / (id + ".png")).string());
        if (p.c == 1) p = replicate_gray_to_rgb(p);
        if (t.c == 1) t = replicate_gray_to_rgb(t);
        MetricRow row;
        row.sample_id = id;
        row.psnr_db = psnr(p, t);
        if (!std::isfinite(row.psnr_db)) ++report.psnr_inf_count;
        row.ssim_val = ssim(p, t, SsimWindow::Gaussian11);
        report.rows.push_back(row);
        for (int c = 0; c < 3; ++c) {
            const double* pp = p.plane(0, c);
            const double* tp = t.plane(0, c);
            size_t npix = static_cast<size_t>(p.h) * p.w;
            for (size_t i = 0; i < npix; ++i) {
                pred_pool[c].push_back(pp[i] / 255.0);
                truth_pool[c].push_back(tp[i] / 255.0);
            }
        }
    }

    std::optional<ConstraintSpec> prior;
    if (!a.constraints.empty()) prior = ConstraintSpec::load(a.constraints);
    int bins = prior ? prior->bins : a.bins;

    const char* names[3] = {"hist_r.csv", "hist_g.csv", "hist_b.csv"};
    for (int c = 0; c < 3; ++c) {
        std::vector<double> hp = hard_histogram(pred_pool[c], bins);
        std::vector<double> ht = hard_histogram(truth_pool[c], bins);
        report.hist_chi2[c] = hist_distance(hp, ht, HistMetric::Chi2);
        report.hist_euclidean[c] = hist_distance(hp, ht, HistMetric::Euclidean);
        report.hist_bhattacharyya[c] = hist_distance(hp, ht, HistMetric::Bhattacharyya);

        std::ostringstream os;
        os.precision(10);
        os << "bin_center,pred,truth" << (prior ? ",prior" : "") << "\n";
        for (int b = 0; b < bins; ++b) {
            os << (b + 0.5) / bins << "," << hp[b] << "," << ht[b];
            if (prior) os << "," << prior->prior_hist[c][b];
            os << "\n";
        }
        write_text_atomic((fs::path(a.out) / names[c]).string(), os.str());
    }

    if (a.features_a.empty() != a.features_b.empty()) {
        throw ConfigError("--features-a and --features-b must be given together");
    }
    if (!a.features_a.empty()) {
        report.fid = fid_from_features(read_feature_csv(a.features_a),
                                       read_feature_csv(a.features_b));
    }

    write_metric_report_csv((fs::path(a.out) / "metrics.csv").string(), report);
    json rc{{"command", "evaluate"}, {"pred", a.pred}, {"truth", a.truth},
            {"features_a", a.features_a}, {"features_b", a.features_b},
            {"constraints", a.constraints}, {"bins", bins}, {"out", a.out}};
    write_run_config(a.out, rc);

    std::cout << "evaluated " << report.rows.size() << " pairs: mean PSNR "
              << report.mean_psnr() << " dB, mean SSIM " << report.mean_ssim();
    if (report.fid) std::cout << ", FID " << *report.fid;
    std::cout << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
    std::string sweep;
    std::string values;
    std::string base_config;
};

std::vector<std::string> split_csv_line(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

int run_ablate(const AblateArgs& a) {
    if (a.sweep != "lambda" && a.sweep != "metric" && a.sweep != "edges") {
        throw ConfigError("unknown --sweep '" + a.sweep + "' (expected lambda|metric|edges)");
    }
    json base = load_json_file(a.base_config);
    std::string checkpoint = base.at("checkpoint").get<std::string>();
    std::string data = base.at("data").get<std::string>();
    std::string constraints = base.at("constraints").get<std::string>();
    std::string direction = base.at("direction").get<std::string>();
    std::string out_root = base.at("out").get<std::string>();
    uint64_t seed = base.value("seed", 0);
    std::string split = base.value("split", "test");
    int limit = base.value("limit", 0);

    std::vector<std::string> values;
    for (const auto& v : split_csv_line(a.values))
        if (!v.empty()) values.push_back(v);
    if (values.empty()) {
        if (a.sweep == "metric") values = {"chi2", "euclidean", "bhattacharyya"};
        else if (a.sweep == "edges") values = {"sobel", "canny", "external"};
        else throw ConfigError("--sweep lambda requires --values");
    }

    DirectionLabel dir = DirectionLabel::from_string(direction);
    std::string truth_dir = (fs::path(data) / to_string(dir.target)).string();
    fs::create_directories(out_root);

    std::ostringstream summary;
    summary.precision(8);
    summary << "setting,psnr_db,ssim,fid,hist_chi2,hist_euclidean,hist_bhattacharyya\n";

    for (const auto& value : values) {
        TranslateArgs ta;
        ta.checkpoint = checkpoint;
        ta.direction = direction;
        ta.constraints = constraints;
        ta.seed = seed;
        ta.in = data;
        ta.split = split;
        ta.limit = limit;
        ta.out = (fs::path(out_root) / (a.sweep + "_" + value)).string();
        if (a.sweep == "lambda") {
            double lam = std::stod(value);
            ta.lambda_ccl = lam;
            ta.lambda_scl = lam;
        } else if (a.sweep == "metric") {
            ta.metric = value;
        } else {
            ta.edges = value;
        }
        int rcode = run_translate(ta);
        if (rcode != 0) return rcode;

        EvaluateArgs ea;
        ea.pred = ta.out;
        ea.truth = truth_dir;
        ea.constraints = constraints;
        ea.out = ta.out + "_eval";
        fs::create_directories(ea.out);

        // Built-in smoke features populate the FID column; these are not
        // comparable to FID computed with pretrained feature extractors.
        std::vector<std::vector<double>> fa, fb;
        std::vector<std::string> pred_ids;
        for (const auto& e : fs::directory_iterator(ta.out)) {
            if (e.path().extension() == ".png") pred_ids.push_back(e.path().stem().string());
        }
        std::sort(pred_ids.begin(), pred_ids.end());
        for (const auto& id : pred_ids) {
            fa.push_back(patch_features(read_png_u8((fs::path(ta.out) / (id + ".png")).string())));
            Tensor t = read_png_u8((fs::path(truth_dir) / (id + ".png")).string());
            if (t.c == 1) t = replicate_gray_to_rgb(t);
            fb.push_back(patch_features(t));
        }
        if (fa.size() >= 2) {  // FID needs at least two vectors per set
            ea.features_a = (fs::path(ea.out) / "features_pred.csv").string();
            ea.features_b = (fs::path(ea.out) / "features_truth.csv").string();
            write_feature_csv(ea.features_a, fa);
            write_feature_csv(ea.features_b, fb);
        }

        int ecode = run_evaluate(ea);
        if (ecode != 0) return ecode;

        double psnr_mean = 0, ssim_mean = 0, fid = 0, h_chi2 = 0, h_eu = 0, h_bh = 0;
        {
            std::ifstream in(fs::path(ea.out) / "metrics.csv");
            std::string line;
            while (std::getline(in, line)) {
                auto cells = split_csv_line(line);
                if (cells.size() < 2) continue;
                if (cells[0] == "PSNR_MEAN") psnr_mean = std::stod(cells[1]);
                else if (cells[0] == "SSIM_MEAN") ssim_mean = std::stod(cells[1]);
                else if (cells[0] == "FID" && cells[1] != "n/a") fid = std::stod(cells[1]);
                else if (cells[0] == "HIST_CHI2_MEAN") h_chi2 = std::stod(cells[1]);
                else if (cells[0] == "HIST_EUCLIDEAN_MEAN") h_eu = std::stod(cells[1]);
                else if (cells[0] == "HIST_BHATTACHARYYA_MEAN") h_bh = std::stod(cells[1]);
            }
        }
        summary << value << "," << psnr_mean << "," << ssim_mean << "," << fid << ","
                << h_chi2 << "," << h_eu << "," << h_bh << "\n";
    }

    write_text_atomic((fs::path(out_root) / "summary.csv").string(), summary.str());
    json rc{{"command", "ablate"}, {"sweep", a.sweep}, {"values", a.values},
            {"base_config", a.base_config}};
    write_run_config(out_root, rc);
    std::cout << "ablation sweep '" << a.sweep << "' over " << values.size()
              << " settings -> " << out_root << "/summary.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cmdiff: bidirectional IR<->VIS translation diffusion toolkit"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a synthetic paired IR/VIS dataset");
    synth->add_option("--count", sa.count, "number of pairs")->required();
    synth->add_option("--resolution", sa.resolution, "image size (pixels)");
    synth->add_option("--seed", sa.seed, "master seed");
    synth->add_option("--out", sa.out, "output dataset directory")->required();
    synth->add_flag("--force", sa.force, "overwrite a non-empty output directory");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit-constraints", "fit target-modality statistical priors");
    fit->add_option("--data", fa.data, "dataset root")->required();
    fit->add_option("--modality", fa.modality, "target modality: ir|vis")->required();
    fit->add_option("--bins", fa.bins, "histogram bins");
    fit->add_option("--out", fa.out, "output constraint JSON")->required();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "bidirectional diffusion training");
    train->add_option("--data", ta.data, "dataset root")->required();
    train->add_option("--config", ta.config, "run-config JSON (train/denoiser/schedule)");
    train->add_option("--iters", ta.iters, "total iterations (overrides config)");
    train->add_flag("--disable-tdg", ta.disable_tdg, "drop the direction embedding");
    train->add_flag("--disable-cfc", ta.disable_cfc, "drop encoders and edge channel");
    train->add_option("--out", ta.out, "run output directory")->required();
    train->add_option("--resume", ta.resume, "checkpoint to resume from");

    TranslateArgs tra;
    auto* translate = app.add_subcommand("translate", "run guided reverse sampling");
    translate->add_option("--checkpoint", tra.checkpoint, "checkpoint path")->required();
    translate->add_option("--direction", tra.direction, "ir2vis|vis2ir")->required();
    translate->add_option("--constraints", tra.constraints, "constraint spec JSON");
    translate->add_option("--lambda-ccl", tra.lambda_ccl, "channel constraint weight");
    translate->add_option("--lambda-scl", tra.lambda_scl, "statistical constraint weight");
    translate->add_option("--metric", tra.metric, "histogram metric: chi2|euclidean|bhattacharyya");
    translate->add_option("--guidance-scale", tra.guidance_scale, "guidance scale s");
    translate->add_option("--seed", tra.seed, "sampling seed");
    translate->add_option("--in", tra.in, "input dataset root")->required();
    translate->add_option("--out", tra.out, "output directory")->required();
    translate->add_option("--edges", tra.edges,
                          "edge source: sobel|canny|external (default: training detector)");
    translate->add_option("--split", tra.split, "train|test|all (default test)");
    translate->add_option("--limit", tra.limit, "translate at most N inputs");

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "image-quality metrics and histogram tables");
    evaluate->add_option("--pred", ea.pred, "directory of predicted PNGs")->required();
    evaluate->add_option("--truth", ea.truth, "directory of ground-truth PNGs")->required();
    evaluate->add_option("--features-a", ea.features_a, "feature CSV for predictions");
    evaluate->add_option("--features-b", ea.features_b, "feature CSV for ground truth");
    evaluate->add_option("--constraints", ea.constraints, "constraint JSON for prior columns");
    evaluate->add_option("--bins", ea.bins, "histogram bins when no constraints given");
    evaluate->add_option("--out", ea.out, "output directory")->required();

    AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "translate+evaluate sweeps (lambda|metric|edges)");
    ablate->add_option("--sweep", aa.sweep, "lambda|metric|edges")->required();
    ablate->add_option("--values", aa.values, "comma-separated sweep values");
    ablate->add_option("--base-config", aa.base_config,
                       "JSON with checkpoint/data/constraints/direction/out")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return run_synth(sa);
        if (fit->parsed()) return run_fit(fa);
        if (train->parsed()) return run_train(ta);
        if (translate->parsed()) return run_translate(tra);
        if (evaluate->parsed()) return run_evaluate(ea);
        if (ablate->parsed()) return run_ablate(aa);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: bad JSON: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
