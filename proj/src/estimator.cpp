// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/estimator.hpp"

#include <cmath>
#include <random>

#include "shadowdiff/checkpoint.hpp"
#include "shadowdiff/error.hpp"

namespace shadowdiff {

void EstimatorTrainConfig::validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw InvalidArgument("adam moments must lie in [0,1)");
    }
    if (batch < 1) throw InvalidArgument("batch size must be positive");
    if (steps < 0) throw InvalidArgument("step budget must be non-negative");
    if (!(eta > 0.0f)) throw InvalidArgument("eta must be positive");
}

KeyValues EstimatorTrainConfig::to_key_values() const {
    KeyValues kv;
    kv.set("lr", format_double(lr));
    kv.set("beta1", format_double(beta1));
    kv.set("beta2", format_double(beta2));
    kv.set("batch", std::to_string(batch));
    kv.set("steps", std::to_string(steps));
    kv.set("eta", format_double(eta));
    kv.set("seed", std::to_string(seed));
    return kv;
}

EstimatorTrainConfig EstimatorTrainConfig::from_key_values(const KeyValues& kv) {
    EstimatorTrainConfig c;
    c.lr = kv.get_double("lr", c.lr);
    c.beta1 = kv.get_double("beta1", c.beta1);
    c.beta2 = kv.get_double("beta2", c.beta2);
    c.batch = static_cast<int>(kv.get_int("batch", c.batch));
    c.steps = kv.get_int("steps", c.steps);
    c.eta = static_cast<float>(kv.get_double("eta", c.eta));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    return c;
}

EstimatorParams init_estimator(const EstimatorSpec& spec, std::uint64_t seed) {
    EstimatorNet<float> net(spec);
    EstimatorParams p;
    p.spec = spec;
    p.weights.assign(net.param_count(), 0.0f);
    net.registry().kaiming_init<float>(p.weights, seed);
    p.adam.reset(p.weights.size());
    return p;
}

DegradationMap estimate_h(const EstimatorParams& params, const Image& y, const MaskField& m_tilde) {
    require_same_extent(y, m_tilde, "estimate_h");
    if (y.channels != params.spec.channels) throw InvalidArgument("estimate_h: channel count mismatch");
    EstimatorNet<float> net(params.spec);
    if (params.weights.size() != net.param_count()) throw InvalidArgument("estimator parameters do not match");
    EstimatorNet<float>::Cache cache;
    assemble_estimator_input(cache.input, y, m_tilde);
    net.forward(params.weights, cache);
    DegradationMap h(y.height, y.width, y.channels);
    const std::size_t n = y.pixel_count();
    for (int c = 0; c < y.channels; ++c) {
        for (std::size_t p = 0; p < n; ++p) h.data[p * y.channels + c] = cache.h.v[c * n + p];
    }
    return h;
}

std::vector<LossRecord> train_estimator(EstimatorParams& params, const std::vector<SceneSample>& dataset,
                                        const EstimatorTrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw InvalidArgument("training dataset is empty");
    EstimatorNet<float> net(params.spec);
    const std::size_t n_params = net.param_count();
    if (params.weights.size() != n_params) throw InvalidArgument("estimator parameters do not match");
    if (params.adam.m.size() != n_params) params.adam.reset(n_params);

    struct Prepared {
        nn::Tensor<float> input;
        std::vector<float> target;  // CHW
    };
    std::vector<Prepared> prepared;
    for (const auto& s : dataset) {
        if (s.y.channels != params.spec.channels) throw InvalidArgument("dataset channel count mismatch");
        Prepared p;
        assemble_estimator_input(p.input, s.y, s.m_tilde);
        const DegradationMap h_gt = ground_truth_degradation(s.x, s.y, cfg.eta);
        const std::size_t n = h_gt.pixel_count();
        p.target.resize(h_gt.size());
        for (int c = 0; c < h_gt.channels; ++c) {
            for (std::size_t q = 0; q < n; ++q) p.target[c * n + q] = h_gt.data[q * h_gt.channels + c];
        }
        prepared.push_back(std::move(p));
    }

    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(params.step) + 0xe5));
    std::uniform_int_distribution<std::size_t> pick(0, prepared.size() - 1);
    const nn::AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, 1e-8};
    std::vector<float> grads(n_params);
    EstimatorNet<float>::Cache cache;
    params.train_echo = cfg.to_key_values();

    std::vector<LossRecord> log;
    for (long s = 0; s < cfg.steps; ++s) {
        std::fill(grads.begin(), grads.end(), 0.0f);
        LossRecord rec;
        rec.step = params.step + 1;
        for (int b = 0; b < cfg.batch; ++b) {
            const Prepared& item = prepared[pick(rng)];
            cache.input = item.input;
            net.forward(params.weights, cache);
            nn::Tensor<float> d_h(cache.h.c, cache.h.h, cache.h.w);
            double mse = 0.0;
            const float norm = 2.0f / static_cast<float>(d_h.size() * cfg.batch);
            for (std::size_t i = 0; i < d_h.size(); ++i) {
                const float r = cache.h.v[i] - item.target[i];
                mse += static_cast<double>(r) * r;
                d_h.v[i] = norm * r;
            }
            rec.l_diff += mse / static_cast<double>(d_h.size());
            net.backward(params.weights, cache, d_h, grads);
        }
        rec.l_diff /= cfg.batch;
        rec.l_total = rec.l_diff;
        bool finite = std::isfinite(rec.l_total);
        for (float g : grads) finite = finite && std::isfinite(g);
        if (!finite) throw NumericalError("non-finite loss or gradient during estimator training", rec.step);
        nn::adam_update(adam, params.adam, params.weights, grads);
        params.step = rec.step;
        log.push_back(rec);
    }
    return log;
}

EstimatorParams train_new_estimator(const std::vector<SceneSample>& dataset, const EstimatorTrainConfig& cfg,
                                    const EstimatorSpec& spec, std::vector<LossRecord>* log) {
    EstimatorParams p = init_estimator(spec, mix_seed(cfg.seed, 0xe57));
    auto records = train_estimator(p, dataset, cfg);
    if (log) *log = std::move(records);
    return p;
}

void save_estimator(const EstimatorParams& params, const std::filesystem::path& path) {
    EstimatorNet<float> net(params.spec);
    KeyValues h;
    h.set("kind", "estimator");
    h.set("channels", std::to_string(params.spec.channels));
    h.set("width", std::to_string(params.spec.width));
    h.set("step", std::to_string(params.step));
    h.set("adam_step", std::to_string(params.adam.step));
    for (const auto& [k, v] : params.train_echo.entries()) h.set("train." + k, v);
    std::vector<float> m = params.adam.m, v = params.adam.v;
    if (m.size() != params.weights.size()) m.assign(params.weights.size(), 0.0f);
    if (v.size() != params.weights.size()) v.assign(params.weights.size(), 0.0f);
    save_checkpoint(path, h, net.registry(), {{"weights", params.weights}, {"adam_m", m}, {"adam_v", v}});
}

EstimatorParams load_estimator(const std::filesystem::path& path) {
    const KeyValues h = read_checkpoint_header(path);
    if (h.get_string("kind", "") != "estimator") throw FormatError("not an estimator checkpoint: " + path.string());
    EstimatorParams p;
    p.spec.channels = static_cast<int>(h.get_int("channels"));
    p.spec.width = static_cast<int>(h.get_int("width"));
    p.step = h.get_int("step");
    EstimatorNet<float> net(p.spec);
    Checkpoint ck = load_checkpoint(path, net.registry());
    for (const char* name : {"weights", "adam_m", "adam_v"}) {
        if (!ck.sets.count(name)) throw FormatError(std::string("checkpoint lacks set '") + name + "'");
    }
    p.weights = std::move(ck.sets["weights"]);
    p.adam.m = std::move(ck.sets["adam_m"]);
    p.adam.v = std::move(ck.sets["adam_v"]);
    p.adam.step = h.get_int("adam_step", p.step);
    for (const auto& [k, v] : h.entries()) {
        if (k.rfind("train.", 0) == 0) p.train_echo.set(k.substr(6), v);
    }
    return p;
}

DegradationMap OracleEstimator::estimate(const Image& y, const MaskField& m_tilde) const {
    require_same_extent(y, h_, "oracle degradation map");
    require_same_extent(y, m_tilde, "oracle degradation map");
    return h_;
}

}  // namespace shadowdiff
