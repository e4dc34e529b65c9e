// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "shadowdiff/error.hpp"
#include "shadowdiff/estimator.hpp"
#include "shadowdiff/io.hpp"

namespace shadowdiff {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kSceneKeys = {"height",  "width", "size",  "channels", "regions",  "shape", "smoothness",
                                          "w_min",   "w_max", "x_min", "x_max",    "texture",  "severity"};

const std::set<std::string> kSamplerKeys = {"mode", "n_infer", "rho", "rho_end", "rho_mode", "phi", "psi",
                                            "refine_mask", "oracle_h", "estimator", "weights", "timesteps"};

std::set<std::string> allowed_keys(const std::string& command) {
    std::set<std::string> keys = {"seed", "out"};
    auto add = [&](const std::set<std::string>& more) { keys.insert(more.begin(), more.end()); };
    if (command == "gen-data") {
        add(kSceneKeys);
        keys.insert("count");
    } else if (command == "train-denoiser") {
        add({"dataset", "steps", "batch", "lr", "beta1", "beta2", "lambda", "ema_decay", "mask_target", "width",
             "timesteps", "resume"});
    } else if (command == "train-estimator") {
        add({"dataset", "steps", "batch", "lr", "beta1", "beta2", "eta", "width", "resume"});
    } else if (command == "sample") {
        add(kSamplerKeys);
        add({"dataset", "checkpoint", "trace"});
    } else if (command == "eval") {
        add({"dataset", "outputs", "source", "convention"});
    } else if (command == "ablate") {
        add(kSamplerKeys);
        add({"dataset", "checkpoint", "severities", "rhos", "convention"});
    }
    return keys;
}

void check_keys(const KeyValues& kv, const std::string& command) {
    const auto allowed = allowed_keys(command);
    for (const auto& [k, v] : kv.entries()) {
        if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "' for command " + command);
    }
}

std::string require(const KeyValues& kv, const std::string& key, const std::string& command) {
    if (!kv.contains(key)) throw ConfigError(command + ": missing required key '" + key + "'");
    return kv.get_string(key);
}

std::uint64_t require_seed(const KeyValues& kv, const std::string& command) {
    require(kv, "seed", command);
    const long long s = kv.get_int("seed");
    if (s < 0) throw ConfigError("config key 'seed': must be non-negative");
    return static_cast<std::uint64_t>(s);
}

void require_existing(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

// The output path must be a directory or creatable as one.
void check_output_dir(const fs::path& p) {
    if (fs::exists(p) && !fs::is_directory(p)) throw ConfigError("output path is not a directory: " + p.string());
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_list(const KeyValues& kv, const std::string& key, const std::string& fallback) {
    std::vector<double> out;
    for (const auto& item : split_list(kv.get_string(key, fallback))) {
        KeyValues one;
        one.set(key, item);
        out.push_back(one.get_double(key));
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

void write_effective_config(const fs::path& dir, const std::string& command, const KeyValues& kv) {
    KeyValues echo = kv;
    echo.set("command", command);
    write_file(dir / "effective-config", echo.to_string());
}

Dataset load_dataset_checked(const KeyValues& kv, const std::string& command) {
    const fs::path root = require(kv, "dataset", command);
    require_existing(root / "manifest", "dataset manifest");
    return read_dataset(root);
}

NoiseSchedule schedule_for(int timesteps) { return linear_schedule(timesteps); }

struct SamplerSetup {
    SamplerConfig cfg;
    bool oracle_h = false;
    std::string estimator_path;
    WeightSet weights = WeightSet::kEma;
};

SamplerSetup sampler_setup(const KeyValues& kv, const std::string& command) {
    SamplerSetup s;
    s.cfg = SamplerConfig::from_key_values(kv);
    s.cfg.validate();
    s.oracle_h = kv.get_bool("oracle_h", false);
    s.estimator_path = kv.get_string("estimator", "");
    if (s.oracle_h == !s.estimator_path.empty()) {
        throw ConfigError(command + ": exactly one of --oracle-h or --estimator is required");
    }
    if (!s.estimator_path.empty()) require_existing(s.estimator_path, "estimator checkpoint");
    const std::string w = kv.get_string("weights", "ema");
    if (w == "ema") {
        s.weights = WeightSet::kEma;
    } else if (w == "live") {
        s.weights = WeightSet::kLive;
    } else {
        throw ConfigError("config key 'weights': expected ema|live, got '" + w + "'");
    }
    return s;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

int cmd_gen_data(const KeyValues& kv, std::ostream& out) {
    SceneConfig base = SceneConfig::from_key_values(kv);
    base.seed = require_seed(kv, "gen-data");
    base.validate();
    const long long count = kv.get_int("count", 200);
    if (count < 1) throw ConfigError("config key 'count': must be at least 1");
    const fs::path root = require(kv, "out", "gen-data");
    check_output_dir(root);
    const fs::path manifest = write_dataset(base, static_cast<int>(count), root);
    write_effective_config(root, "gen-data", kv);
    out << manifest.string() << "\n";
    return kExitOk;
}

int cmd_train_denoiser(const KeyValues& kv, std::ostream& out, std::ostream& err) {
    TrainConfig cfg = TrainConfig::from_key_values(kv);
    cfg.seed = require_seed(kv, "train-denoiser");
    cfg.validate();
    const fs::path dir = require(kv, "out", "train-denoiser");
    check_output_dir(dir);
    const std::string resume = kv.get_string("resume", "");
    if (!resume.empty()) require_existing(resume, "resume checkpoint");
    const Dataset ds = load_dataset_checked(kv, "train-denoiser");
    if (ds.scenes.empty()) throw ConfigError("dataset is empty");

    DenoiserParams params;
    if (!resume.empty()) {
        params = load_denoiser(resume);
        if (params.spec.channels != ds.scenes.front().x.channels) {
            throw ConfigError("resume checkpoint channel count does not match the dataset");
        }
    } else {
        const int width = static_cast<int>(kv.get_int("width", 16));
        const int timesteps = static_cast<int>(kv.get_int("timesteps", kDefaultTimesteps));
        params = init_denoiser(reference_architecture(ds.scenes.front().x.channels, width),
                               mix_seed(cfg.seed, 0xde0), timesteps);
    }
    const NoiseSchedule schedule = schedule_for(params.timesteps);
    fs::create_directories(dir);
    const long report_every = std::max<long>(1, cfg.steps / 10);
    const auto log = train(params, ds.scenes, cfg, schedule, [&](const LossRecord& r) {
        if (r.step % report_every == 0) err << "step " << r.step << " loss " << fmt(r.l_total) << "\n";
    });
    save_denoiser(params, dir / "denoiser.ckpt");
    save_raw_plane(schedule_table(schedule), dir / "schedule.rpln");
    write_file(dir / "loss.csv", loss_log_csv(log));
    write_effective_config(dir, "train-denoiser", kv);
    out << (dir / "denoiser.ckpt").string() << "\n";
    return kExitOk;
}

int cmd_train_estimator(const KeyValues& kv, std::ostream& out, std::ostream& err) {
    EstimatorTrainConfig cfg = EstimatorTrainConfig::from_key_values(kv);
    cfg.seed = require_seed(kv, "train-estimator");
    cfg.validate();
    const fs::path dir = require(kv, "out", "train-estimator");
    check_output_dir(dir);
    const std::string resume = kv.get_string("resume", "");
    if (!resume.empty()) require_existing(resume, "resume checkpoint");
    const Dataset ds = load_dataset_checked(kv, "train-estimator");
    if (ds.scenes.empty()) throw ConfigError("dataset is empty");

    EstimatorParams params;
    if (!resume.empty()) {
        params = load_estimator(resume);
    } else {
        EstimatorSpec spec{ds.scenes.front().x.channels, static_cast<int>(kv.get_int("width", 16))};
        params = init_estimator(spec, mix_seed(cfg.seed, 0xe57));
    }
    fs::create_directories(dir);
    const auto log = train_estimator(params, ds.scenes, cfg);
    err << "final loss " << fmt(log.empty() ? 0.0 : log.back().l_total) << "\n";
    save_estimator(params, dir / "estimator.ckpt");
    write_file(dir / "loss.csv", loss_log_csv(log));
    write_effective_config(dir, "train-estimator", kv);
    out << (dir / "estimator.ckpt").string() << "\n";
    return kExitOk;
}

int cmd_sample(const KeyValues& kv, std::ostream& out) {
    const std::uint64_t seed = require_seed(kv, "sample");
    SamplerSetup setup = sampler_setup(kv, "sample");
    const fs::path ckpt = require(kv, "checkpoint", "sample");
    require_existing(ckpt, "checkpoint");
    const fs::path dir = require(kv, "out", "sample");
    check_output_dir(dir);
    const bool trace = kv.get_bool("trace", false);
    const Dataset ds = load_dataset_checked(kv, "sample");
    const DenoiserParams params = load_denoiser(ckpt);
    EstimatorParams est;
    if (!setup.oracle_h) est = load_estimator(setup.estimator_path);
    const NoiseSchedule schedule = schedule_for(params.timesteps);
    const DenoiserPredictor predictor(params, setup.weights);

    fs::create_directories(dir);
    std::string listing;
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
        const SceneSample& s = ds.scenes[i];
        SamplerConfig cfg = setup.cfg;
        cfg.seed = mix_seed(seed, i);
        cfg.keep_trace_fields = trace;
        const DegradationMap h = setup.oracle_h ? s.h : estimate_h(est, s.y, s.m_tilde);
        const SampleResult r = sample(predictor, h, s.y, s.m_tilde, cfg, schedule, &s.x);
        const fs::path sd = dir / ds.names[i];
        fs::create_directories(sd);
        save_raw_plane(r.x0, sd / "x0.rpln");
        save_image(r.x0, sd / ("x0" + image_extension(r.x0.channels)));
        save_raw_plane(r.m0, sd / "m0.rpln");
        save_mask(r.m0, sd / "m0.pgm");
        dump_trace(r.trace, sd);
        listing += "scene=" + ds.names[i] + "\n";
    }
    KeyValues effective = kv;
    effective.merge(setup.cfg.to_key_values());
    write_effective_config(dir, "sample", effective);
    write_file(dir / "manifest", listing);
    out << "sampled " << ds.scenes.size() << " scenes into " << dir.string() << "\n";
    return kExitOk;
}

int cmd_eval(const KeyValues& kv, std::ostream& out) {
    const RmseConvention conv = parse_convention(kv.get_string("convention", "mean_abs"));
    const std::string source = kv.get_string("source", "outputs");
    if (source != "outputs" && source != "truth" && source != "input") {
        throw ConfigError("config key 'source': expected outputs|truth|input, got '" + source + "'");
    }
    fs::path outputs;
    if (source == "outputs") {
        outputs = require(kv, "outputs", "eval");
        require_existing(outputs, "outputs directory");
    }
    const fs::path dir = require(kv, "out", "eval");
    check_output_dir(dir);
    const Dataset ds = load_dataset_checked(kv, "eval");

    std::vector<Image> results, truths;
    std::vector<MaskField> masks, predicted;
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
        const SceneSample& s = ds.scenes[i];
        truths.push_back(s.x);
        masks.push_back(s.m);
        if (source == "truth") {
            results.push_back(s.x);
        } else if (source == "input") {
            results.push_back(s.y);
        } else {
            const fs::path sd = outputs / ds.names[i];
            const fs::path raw = sd / "x0.rpln";
            const fs::path raster = sd / ("x0" + image_extension(s.x.channels));
            if (fs::exists(raw)) {
                results.push_back(load_image(raw));
            } else if (fs::exists(raster)) {
                results.push_back(load_image(raster));
            } else {
                throw ConfigError("outputs are not aligned with the dataset: missing " + raw.string());
            }
            if (fs::exists(sd / "m0.rpln")) predicted.push_back(load_mask(sd / "m0.rpln"));
        }
    }
    if (!predicted.empty() && predicted.size() != results.size()) {
        throw ConfigError("outputs are not aligned with the dataset: some scenes lack m0.rpln");
    }
    const EvaluationSet set = evaluate_set(ds.names, results, truths, masks, conv, predicted);
    fs::create_directories(dir);
    write_file(dir / "report.jsonl", reports_jsonl(set, conv));
    const std::string csv = summary_csv(set, conv);
    write_file(dir / "summary.csv", csv);
    write_effective_config(dir, "eval", kv);
    out << csv;
    return kExitOk;
}

int cmd_ablate(const KeyValues& kv, std::ostream& out) {
    AblationInputs in;
    in.seed = require_seed(kv, "ablate");
    SamplerSetup setup = sampler_setup(kv, "ablate");
    in.sampler = setup.cfg;
    in.convention = parse_convention(kv.get_string("convention", "mean_abs"));
    in.severities = parse_list(kv, "severities", "0.5");
    for (double v : in.severities) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("config key 'severities': values must lie in [0,1]");
    }
    if (kv.contains("rhos")) {
        in.rhos = parse_list(kv, "rhos", "");
        for (double v : in.rhos) {
            if (!(v > 0.0)) throw ConfigError("config key 'rhos': values must be positive");
        }
    }
    const auto ckpts = split_list(require(kv, "checkpoint", "ablate"));
    for (const auto& c : ckpts) require_existing(c, "checkpoint");
    const fs::path dir = require(kv, "out", "ablate");
    check_output_dir(dir);
    const Dataset ds = load_dataset_checked(kv, "ablate");

    std::vector<DenoiserParams> params;
    params.reserve(ckpts.size());
    for (const auto& c : ckpts) params.push_back(load_denoiser(c));
    for (std::size_t k = 0; k < params.size(); ++k) {
        in.denoisers.push_back(&params[k]);
        in.labels.push_back(params[k].train_echo.get_string("seed", std::to_string(k)));
    }
    EstimatorParams est;
    if (!setup.oracle_h) {
        est = load_estimator(setup.estimator_path);
        in.estimator = &est;
    }
    const auto rows = run_ablation(in, ds.scenes, schedule_for(params.front().timesteps));
    fs::create_directories(dir);
    const std::string csv = ablation_csv(rows, in.convention);
    write_file(dir / "ablation.csv", csv);
    write_effective_config(dir, "ablate", kv);
    out << csv;
    return kExitOk;
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationInputs& in, const std::vector<SceneSample>& scenes,
                                      const NoiseSchedule& schedule) {
    if (in.denoisers.empty() || in.denoisers.size() != in.labels.size()) {
        throw InvalidArgument("run_ablation: need one label per checkpoint");
    }
    if (scenes.empty()) throw InvalidArgument("run_ablation: no scenes");
    struct Variant {
        const char* name;
        SamplerMode mode;
        bool refine;
    };
    const Variant variants[] = {{"plain", SamplerMode::kPlain, true},
                                {"unrolled", SamplerMode::kUnrolled, true},
                                {"unrolled_fixed_mask", SamplerMode::kUnrolled, false}};
    const std::vector<double> rhos = in.rhos.empty() ? std::vector<double>{in.sampler.rho} : in.rhos;
    std::vector<AblationRow> rows, means;
    for (double rho : rhos) {
        for (double severity : in.severities) {
            std::vector<MaskField> corrupted;
            std::vector<DegradationMap> hs;
            for (std::size_t i = 0; i < scenes.size(); ++i) {
                corrupted.push_back(corrupt_mask(scenes[i].m, severity, mix_seed(in.seed, 2 * i + 1)));
                hs.push_back(in.estimator ? estimate_h(*in.estimator, scenes[i].y, corrupted.back()) : scenes[i].h);
            }
            std::vector<AblationRow> block;
            for (std::size_t k = 0; k < in.denoisers.size(); ++k) {
                const DenoiserPredictor predictor(*in.denoisers[k]);
                double plain_psnr = 0.0;
                for (const auto& v : variants) {
                    AblationRow row;
                    row.mode = v.name;
                    row.severity = severity;
                    row.rho = rho;
                    row.seed = in.labels[k];
                    for (std::size_t i = 0; i < scenes.size(); ++i) {
                        const SceneSample& s = scenes[i];
                        SamplerConfig cfg = in.sampler;
                        cfg.mode = v.mode;
                        cfg.refine_mask = v.refine;
                        cfg.rho = rho;
                        if (cfg.rho_mode == RhoMode::kConstant) cfg.rho_end = rho;
                        cfg.seed = mix_seed(in.seed, 2 * i);
                        const SampleResult r = sample(predictor, hs[i], s.y, corrupted[i], cfg, schedule);
                        row.psnr_all += psnr(r.x0, s.x);
                        row.psnr_shadow += psnr(r.x0, s.x, s.m, Region::kShadow);
                        row.ssim_all += ssim(r.x0, s.x);
                        row.rmse_lab_all += rmse_lab(r.x0, s.x, in.convention);
                        row.iou_m0 += mask_iou(r.m0, s.m);
                        row.iou_m_tilde += mask_iou(corrupted[i], s.m);
                    }
                    const double n = static_cast<double>(scenes.size());
                    row.psnr_all /= n;
                    row.psnr_shadow /= n;
                    row.ssim_all /= n;
                    row.rmse_lab_all /= n;
                    row.iou_m0 /= n;
                    row.iou_m_tilde /= n;
                    if (v.mode == SamplerMode::kPlain) plain_psnr = row.psnr_all;
                    row.unrolled_minus_plain = row.psnr_all - plain_psnr;
                    block.push_back(row);
                }
            }
            rows.insert(rows.end(), block.begin(), block.end());
            for (const auto& v : variants) {
                AblationRow mean;
                mean.mode = v.name;
                mean.severity = severity;
                mean.rho = rho;
                mean.seed = "mean";
                double count = 0.0;
                for (const auto& r : block) {
                    if (r.mode != v.name) continue;
                    mean.psnr_all += r.psnr_all;
                    mean.psnr_shadow += r.psnr_shadow;
                    mean.ssim_all += r.ssim_all;
                    mean.rmse_lab_all += r.rmse_lab_all;
                    mean.iou_m0 += r.iou_m0;
                    mean.iou_m_tilde += r.iou_m_tilde;
                    mean.unrolled_minus_plain += r.unrolled_minus_plain;
                    count += 1.0;
                }
                mean.psnr_all /= count;
                mean.psnr_shadow /= count;
                mean.ssim_all /= count;
                mean.rmse_lab_all /= count;
                mean.iou_m0 /= count;
                mean.iou_m_tilde /= count;
                mean.unrolled_minus_plain /= count;
                means.push_back(mean);
            }
        }
    }
    rows.insert(rows.end(), means.begin(), means.end());
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, RmseConvention conv) {
    std::string out =
        "mode,severity,rho,seed,psnr_all,psnr_shadow,ssim_all,rmse_lab_all,iou_m0,iou_m_tilde,unrolled_minus_plain,"
        "rmse_convention\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.3f,%.6g,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n",
                      r.mode.c_str(), r.severity, r.rho, r.seed.c_str(), r.psnr_all, r.psnr_shadow, r.ssim_all, r.rmse_lab_all, r.iou_m0,
                      r.iou_m_tilde, r.unrolled_minus_plain, convention_name(conv));
        out += buf;
    }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"mask-aware diffusion shadow removal on synthetic scenes", "shadowdiff"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    KeyValues flags;
    std::vector<std::string> checkpoints;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value configuration file");
        sub->add_option("--set", sets, "key=value override (repeatable)");
    };
    auto keyed = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags.set(key, v); }, help);
    };
    auto boolean = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& value,
                       const std::string& help) {
        sub->add_flag_callback(flag, [&flags, key, value]() { flags.set(key, value); }, help);
    };
    auto sampler_flags = [&](CLI::App* sub) {
        keyed(sub, "--mode", "mode", "plain|unrolled");
        keyed(sub, "--steps", "n_infer", "number of inference steps");
        keyed(sub, "--rho", "rho", "penalty weight (start value for --rho-mode geometric)");
        keyed(sub, "--rho-end", "rho_end", "final penalty weight for --rho-mode geometric");
        keyed(sub, "--rho-mode", "rho_mode", "constant|geometric");
        keyed(sub, "--phi", "phi", "mask anchor weight");
        keyed(sub, "--estimator", "estimator", "degradation estimator checkpoint");
        keyed(sub, "--weights", "weights", "ema|live");
        boolean(sub, "--oracle-h", "oracle_h", "true", "use the dataset's construction h");
        boolean(sub, "--fixed-mask", "refine_mask", "false", "condition on the initial mask throughout");
    };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    auto* trd = app.add_subcommand("train-denoiser", "train the mask-aware denoiser");
    auto* tre = app.add_subcommand("train-estimator", "train the degradation estimator");
    auto* smp = app.add_subcommand("sample", "restore every scene of a dataset");
    auto* evl = app.add_subcommand("eval", "region-wise metrics of restored outputs");
    auto* abl = app.add_subcommand("ablate", "paired plain/unrolled/fixed-mask comparison");
    for (auto* sub : {gen, trd, tre, smp, evl, abl}) {
        common(sub);
        keyed(sub, "--seed", "seed", "random seed");
        keyed(sub, "--out", "out", "output directory");
    }
    for (auto* sub : {trd, tre, smp, evl, abl}) keyed(sub, "--dataset", "dataset", "dataset directory");

    keyed(gen, "--count", "count", "number of scenes");
    keyed(gen, "--size", "size", "image height and width");
    keyed(gen, "--channels", "channels", "1 or 3");
    keyed(gen, "--severity", "severity", "mask corruption severity in [0,1]");

    for (auto* sub : {trd, tre}) {
        keyed(sub, "--steps", "steps", "training steps");
        keyed(sub, "--batch", "batch", "batch size");
        keyed(sub, "--lr", "lr", "Adam learning rate");
        keyed(sub, "--width", "width", "base channel width");
        keyed(sub, "--resume", "resume", "checkpoint to continue from");
    }
    keyed(trd, "--lambda", "lambda", "mask loss weight");
    keyed(trd, "--ema-decay", "ema_decay", "EMA decay");

    sampler_flags(smp);
    keyed(smp, "--checkpoint", "checkpoint", "denoiser checkpoint");
    boolean(smp, "--trace", "trace", "true", "dump per-iteration fields");

    keyed(evl, "--outputs", "outputs", "directory written by sample");
    keyed(evl, "--source", "source", "outputs|truth|input");
    keyed(evl, "--convention", "convention", "mean_abs|euclidean");

    sampler_flags(abl);
    abl->add_option("--checkpoint", checkpoints, "denoiser checkpoint (repeatable, one per training seed)");
    keyed(abl, "--severities", "severities", "comma-separated mask corruption severities");
    keyed(abl, "--rhos", "rhos", "comma-separated penalty weights to sweep");
    keyed(abl, "--convention", "convention", "mean_abs|euclidean");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << e.what() << "\n";
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        KeyValues kv;
        if (!config_path.empty()) {
            require_existing(config_path, "config file");
            kv = KeyValues::load(config_path);
        }
        for (const auto& s : sets) kv.merge(KeyValues::parse(s, "--set"));
        kv.merge(flags);
        if (!checkpoints.empty()) {
            std::string joined;
            for (const auto& c : checkpoints) joined += (joined.empty() ? "" : ",") + c;
            kv.set("checkpoint", joined);
        }
        check_keys(kv, command);
        if (command == "gen-data") return cmd_gen_data(kv, out);
        if (command == "train-denoiser") return cmd_train_denoiser(kv, out, err);
        if (command == "train-estimator") return cmd_train_estimator(kv, out, err);
        if (command == "sample") return cmd_sample(kv, out);
        if (command == "eval") return cmd_eval(kv, out);
        return cmd_ablate(kv, out);
    } catch (const NumericalError& e) {
        err << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace shadowdiff
