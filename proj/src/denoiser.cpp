// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/denoiser.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "shadowdiff/checkpoint.hpp"
#include "shadowdiff/degradation.hpp"
#include "shadowdiff/error.hpp"

namespace shadowdiff {

namespace {

const char* mask_target_name(MaskTarget t) { return t == MaskTarget::kResidual ? "residual" : "construction"; }

void to_chw(const Field& f, std::span<float> out) {
    const std::size_t n = f.pixel_count();
    for (int c = 0; c < f.channels; ++c) {
        for (std::size_t p = 0; p < n; ++p) out[c * n + p] = f.data[p * f.channels + c];
    }
}

Field from_chw(const nn::Tensor<float>& t) {
    Field f(t.h, t.w, t.c);
    const std::size_t n = t.plane();
    for (int c = 0; c < t.c; ++c) {
        for (std::size_t p = 0; p < n; ++p) f.data[p * t.c + c] = t.v[c * n + p];
    }
    return f;
}

bool finite_span(std::span<const float> v) {
    for (float x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw InvalidArgument("adam moments must lie in [0,1)");
    }
    if (batch < 1) throw InvalidArgument("batch size must be positive");
    if (steps < 0) throw InvalidArgument("step budget must be non-negative");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw InvalidArgument("ema decay must lie in [0,1)");
}

KeyValues TrainConfig::to_key_values() const {
    KeyValues kv;
    kv.set("lr", format_double(lr));
    kv.set("beta1", format_double(beta1));
    kv.set("beta2", format_double(beta2));
    kv.set("batch", std::to_string(batch));
    kv.set("steps", std::to_string(steps));
    kv.set("lambda", format_double(lambda));
    kv.set("ema_decay", format_double(ema_decay));
    kv.set("mask_target", mask_target_name(mask_target));
    kv.set("seed", std::to_string(seed));
    return kv;
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv) {
    TrainConfig c;
    c.lr = kv.get_double("lr", c.lr);
    c.beta1 = kv.get_double("beta1", c.beta1);
    c.beta2 = kv.get_double("beta2", c.beta2);
    c.batch = static_cast<int>(kv.get_int("batch", c.batch));
    c.steps = kv.get_int("steps", c.steps);
    c.lambda = kv.get_double("lambda", c.lambda);
    c.ema_decay = kv.get_double("ema_decay", c.ema_decay);
    const std::string target = kv.get_string("mask_target", mask_target_name(c.mask_target));
    if (target == "residual") {
        c.mask_target = MaskTarget::kResidual;
    } else if (target == "construction") {
        c.mask_target = MaskTarget::kConstruction;
    } else {
        throw ConfigError("config key 'mask_target': expected residual|construction, got '" + target + "'");
    }
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    return c;
}

nn::UNetSpec reference_architecture(int channels, int base_width) {
    nn::UNetSpec spec;
    spec.channels = channels;
    spec.base_width = base_width;
    nn::UNet<float> probe(spec);  // validates
    return spec;
}

std::string describe_architecture(const nn::UNetSpec& spec) {
    nn::UNet<float> net(spec);
    std::ostringstream ss;
    ss << "unet channels=" << spec.channels << " base_width=" << spec.base_width << " time_dim=" << spec.time_dim
       << "\n";
    for (const auto& p : net.registry().infos()) ss << "  " << p.name << " [" << p.rows << "x" << p.cols << "]\n";
    ss << "total parameters: " << net.param_count() << "\n";
    return ss.str();
}

DenoiserParams init_denoiser(const nn::UNetSpec& spec, std::uint64_t seed, int timesteps) {
    if (timesteps < 1) throw InvalidArgument("timesteps must be positive");
    nn::UNet<float> net(spec);
    DenoiserParams p;
    p.spec = spec;
    p.timesteps = timesteps;
    p.weights.assign(net.param_count(), 0.0f);
    net.registry().kaiming_init<float>(p.weights, seed);
    p.ema = p.weights;
    p.adam.reset(p.weights.size());
    return p;
}

DenoiserOutput denoise(const DenoiserParams& params, const Field& x_t, const Image& y, const MaskField& m_cond,
                       int t, WeightSet which) {
    if (t < 1 || t > params.timesteps) {
        throw InvalidArgument("denoise: timestep " + std::to_string(t) + " outside [1, " +
                              std::to_string(params.timesteps) + "]");
    }
    if (x_t.channels != params.spec.channels) throw InvalidArgument("denoise: channel count mismatch");
    nn::UNet<float> net(params.spec);
    const auto& w = which == WeightSet::kEma ? params.ema : params.weights;
    if (w.size() != net.param_count()) throw InvalidArgument("denoise: parameters do not match architecture");
    nn::UNet<float>::Cache cache;
    assemble_input(cache.input, x_t, y, m_cond);
    net.forward(w, t, cache);
    DenoiserOutput out;
    out.e = from_chw(cache.noise);
    out.m = MaskField(from_chw(cache.mask));
    return out;
}

std::vector<LossRecord> train(DenoiserParams& params, const std::vector<SceneSample>& dataset,
                              const TrainConfig& cfg, const NoiseSchedule& schedule,
                              const std::function<void(const LossRecord&)>& on_step) {
    cfg.validate();
    if (dataset.empty()) throw InvalidArgument("training dataset is empty");
    if (schedule.T != params.timesteps) throw InvalidArgument("schedule length does not match the model");
    nn::UNet<float> net(params.spec);
    const std::size_t n_params = net.param_count();
    if (params.weights.size() != n_params || params.ema.size() != n_params) {
        throw InvalidArgument("parameters do not match architecture");
    }
    if (params.adam.m.size() != n_params) params.adam.reset(n_params);

    struct Prepared {
        Field x_state;
        const Image* y;
        const MaskField* m_tilde;
        std::vector<float> m_gt;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(dataset.size());
    for (const auto& s : dataset) {
        if (s.x.channels != params.spec.channels) throw InvalidArgument("dataset channel count mismatch");
        Prepared p{to_state(s.x), &s.y, &s.m_tilde, {}};
        p.m_gt = cfg.mask_target == MaskTarget::kResidual ? ground_truth_mask(s.x, s.y).data : s.m.data;
        prepared.push_back(std::move(p));
    }

    // Seeding from the step counter keeps resumed runs reproducible.
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(params.step)));
    std::uniform_int_distribution<std::size_t> pick(0, prepared.size() - 1);
    std::uniform_int_distribution<int> pick_t(1, schedule.T);
    std::normal_distribution<float> normal(0.0f, 1.0f);

    const nn::AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, 1e-8};
    std::vector<float> grads(n_params);
    nn::UNet<float>::Cache cache;
    std::vector<float> eps_chw;
    const float scale = 1.0f / static_cast<float>(cfg.batch);

    params.train_echo = cfg.to_key_values();
    std::vector<LossRecord> log;
    log.reserve(static_cast<std::size_t>(cfg.steps));
    for (long s = 0; s < cfg.steps; ++s) {
        std::fill(grads.begin(), grads.end(), 0.0f);
        LossRecord rec;
        rec.step = params.step + 1;
        for (int b = 0; b < cfg.batch; ++b) {
            const Prepared& item = prepared[pick(rng)];
            const int t = pick_t(rng);
            Field eps(item.x_state.height, item.x_state.width, item.x_state.channels);
            for (float& v : eps.data) v = normal(rng);
            const Field state = forward_sample(item.x_state, t, eps, schedule);
            assemble_input(cache.input, state, *item.y, *item.m_tilde);
            eps_chw.resize(eps.size());
            to_chw(eps, eps_chw);
            const auto terms = accumulate_gradient<float>(net, params.weights, cache, t, eps_chw, item.m_gt,
                                                          cfg.lambda, grads, scale);
            rec.l_diff += terms.diff;
            rec.l_mask += terms.mask;
            rec.l_total += terms.total;
        }
        rec.l_diff /= cfg.batch;
        rec.l_mask /= cfg.batch;
        rec.l_total /= cfg.batch;
        if (!std::isfinite(rec.l_total) || !finite_span(grads)) {
            throw NumericalError("non-finite loss or gradient during denoiser training", rec.step);
        }
        nn::adam_update(adam, params.adam, params.weights, grads);
        nn::ema_update(params.ema, params.weights, cfg.ema_decay, params.step);
        params.step = rec.step;
        log.push_back(rec);
        if (on_step) on_step(rec);
    }
    return log;
}

DenoiserParams train_denoiser(const std::vector<SceneSample>& dataset, const TrainConfig& cfg,
                              const nn::UNetSpec& spec, const NoiseSchedule& schedule, std::vector<LossRecord>* log) {
    DenoiserParams params = init_denoiser(spec, mix_seed(cfg.seed, 0xde0), schedule.T);
    auto records = train(params, dataset, cfg, schedule);
    if (log) *log = std::move(records);
    return params;
}

void save_denoiser(const DenoiserParams& params, const std::filesystem::path& path) {
    nn::UNet<float> net(params.spec);
    KeyValues h;
    h.set("kind", "denoiser");
    h.set("channels", std::to_string(params.spec.channels));
    h.set("base_width", std::to_string(params.spec.base_width));
    h.set("time_dim", std::to_string(params.spec.time_dim));
    h.set("timesteps", std::to_string(params.timesteps));
    h.set("step", std::to_string(params.step));
    h.set("adam_step", std::to_string(params.adam.step));
    for (const auto& [k, v] : params.train_echo.entries()) h.set("train." + k, v);
    std::vector<float> m = params.adam.m, v = params.adam.v;
    if (m.size() != params.weights.size()) m.assign(params.weights.size(), 0.0f);
    if (v.size() != params.weights.size()) v.assign(params.weights.size(), 0.0f);
    save_checkpoint(path, h, net.registry(),
                    {{"weights", params.weights}, {"ema", params.ema}, {"adam_m", m}, {"adam_v", v}});
}

DenoiserParams load_denoiser(const std::filesystem::path& path) {
    const KeyValues h = read_checkpoint_header(path);
    if (h.get_string("kind", "") != "denoiser") throw FormatError("not a denoiser checkpoint: " + path.string());
    DenoiserParams p;
    p.spec.channels = static_cast<int>(h.get_int("channels"));
    p.spec.base_width = static_cast<int>(h.get_int("base_width"));
    p.spec.time_dim = static_cast<int>(h.get_int("time_dim"));
    p.timesteps = static_cast<int>(h.get_int("timesteps"));
    p.step = h.get_int("step");
    nn::UNet<float> net(p.spec);
    Checkpoint ck = load_checkpoint(path, net.registry());
    for (const char* name : {"weights", "ema", "adam_m", "adam_v"}) {
        if (!ck.sets.count(name)) throw FormatError(std::string("checkpoint lacks set '") + name + "'");
    }
    p.weights = std::move(ck.sets["weights"]);
    p.ema = std::move(ck.sets["ema"]);
    p.adam.m = std::move(ck.sets["adam_m"]);
    p.adam.v = std::move(ck.sets["adam_v"]);
    p.adam.step = h.get_int("adam_step", p.step);
    for (const auto& [k, v] : h.entries()) {
        if (k.rfind("train.", 0) == 0) p.train_echo.set(k.substr(6), v);
    }
    return p;
}

std::string loss_log_csv(const std::vector<LossRecord>& log) {
    std::string out = "step,l_diff,l_mask,l_total\n";
    char buf[160];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g\n", r.step, r.l_diff, r.l_mask, r.l_total);
        out += buf;
    }
    return out;
}

}  // namespace shadowdiff
