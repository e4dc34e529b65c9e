// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "shadowdiff/error.hpp"
#include "shadowdiff/io.hpp"
#include "shadowdiff/metrics.hpp"

namespace shadowdiff {

namespace {

const char* mode_name(SamplerMode m) { return m == SamplerMode::kPlain ? "plain" : "unrolled"; }
const char* rho_mode_name(RhoMode m) { return m == RhoMode::kConstant ? "constant" : "geometric"; }

}  // namespace

void SamplerConfig::validate() const {
    if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
    if (rho_mode == RhoMode::kGeometric && !(rho_end > 0.0)) throw InvalidArgument("rho_end must be positive");
    if (!(phi >= 0.0)) throw InvalidArgument("phi must be non-negative");
    if (n_infer < 1) throw InvalidArgument("inference steps must be at least 1");
}

KeyValues SamplerConfig::to_key_values() const {
    KeyValues kv;
    kv.set("rho", format_double(rho));
    kv.set("rho_end", format_double(rho_end));
    kv.set("rho_mode", rho_mode_name(rho_mode));
    kv.set("phi", format_double(phi));
    kv.set("psi", format_double(psi));
    kv.set("n_infer", std::to_string(n_infer));
    kv.set("mode", mode_name(mode));
    kv.set("refine_mask", refine_mask ? "true" : "false");
    kv.set("sample_seed", std::to_string(seed));
    return kv;
}

SamplerConfig SamplerConfig::from_key_values(const KeyValues& kv) {
    SamplerConfig c;
    c.rho = kv.get_double("rho", c.rho);
    c.rho_end = kv.get_double("rho_end", c.rho);
    const std::string rm = kv.get_string("rho_mode", "constant");
    if (rm == "constant") {
        c.rho_mode = RhoMode::kConstant;
    } else if (rm == "geometric") {
        c.rho_mode = RhoMode::kGeometric;
    } else {
        throw ConfigError("config key 'rho_mode': expected constant|geometric, got '" + rm + "'");
    }
    c.phi = kv.get_double("phi", c.phi);
    c.psi = kv.get_double("psi", c.psi);
    c.n_infer = static_cast<int>(kv.get_int("n_infer", c.n_infer));
    const std::string mode = kv.get_string("mode", "unrolled");
    if (mode == "plain") {
        c.mode = SamplerMode::kPlain;
    } else if (mode == "unrolled") {
        c.mode = SamplerMode::kUnrolled;
    } else {
        throw ConfigError("config key 'mode': expected plain|unrolled, got '" + mode + "'");
    }
    c.refine_mask = kv.get_bool("refine_mask", c.refine_mask);
    c.seed = static_cast<std::uint64_t>(kv.get_int("sample_seed", kv.get_int("seed", 0)));
    return c;
}

double dc_image_value(double x, double y, double h, double rho) { return (h * y + rho * x) / (h * h + rho); }

double dc_mask_value(double m, double m_tilde, double phi, double rho) {
    return (phi * m_tilde + rho * m) / (phi + rho);
}

Field dc_image(const Field& x, const Image& y, const DegradationMap& h, double rho) {
    require_same_shape(x, y, "dc_image");
    require_same_extent(x, h, "dc_image");
    if (h.channels != 1 && h.channels != x.channels) throw InvalidArgument("dc_image: degradation channel mismatch");
    if (!(rho > 0.0)) throw InvalidArgument("dc_image: rho must be positive");
    Field z(x.height, x.width, x.channels);
    const std::size_t n = x.pixel_count();
    const int C = x.channels;
    for (std::size_t p = 0; p < n; ++p) {
        for (int c = 0; c < C; ++c) {
            const double hv = h.data[p * h.channels + (h.channels == 1 ? 0 : c)];
            const std::size_t i = p * C + c;
            z.data[i] = static_cast<float>(dc_image_value(x.data[i], y.data[i], hv, rho));
        }
    }
    return z;
}

MaskField dc_mask(const MaskField& m, const MaskField& m_tilde, double phi, double rho) {
    require_same_shape(m, m_tilde, "dc_mask");
    if (!(phi >= 0.0) || !(rho >= 0.0) || !(phi + rho > 0.0)) {
        throw InvalidArgument("dc_mask: phi and rho must be non-negative with a positive sum");
    }
    MaskField v(m.height, m.width);
    for (std::size_t i = 0; i < m.size(); ++i) {
        v.data[i] = static_cast<float>(dc_mask_value(m.data[i], m_tilde.data[i], phi, rho));
    }
    return v;
}

double rho_schedule(const SamplerConfig& cfg, int iteration) {
    cfg.validate();
    if (cfg.rho_mode == RhoMode::kConstant || cfg.n_infer == 1) return cfg.rho;
    const int i = std::clamp(iteration, 0, cfg.n_infer - 1);
    if (i == cfg.n_infer - 1) return cfg.rho_end;
    const double frac = static_cast<double>(i) / (cfg.n_infer - 1);
    return cfg.rho * std::pow(cfg.rho_end / cfg.rho, frac);
}

SampleResult sample(const NoisePredictor& predictor, const DegradationMap& h, const Image& y,
                    const MaskField& m_tilde, const SamplerConfig& cfg, const NoiseSchedule& schedule,
                    const Image* truth) {
    cfg.validate();
    require_same_extent(y, m_tilde, "sample");
    require_same_extent(y, h, "sample");
    if (truth) require_same_shape(y, *truth, "sample truth");
    const TimestepPlan plan = plan_timesteps(schedule.T, cfg.n_infer);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    State z(y.size());
    for (double& v : z) v = normal(rng);
    Field zf(y.height, y.width, y.channels);
    MaskField v = m_tilde;
    const int C = y.channels;

    SampleResult result;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const int t = plan[i];
        const int t_prev = previous_timestep(plan, i);
        for (std::size_t k = 0; k < z.size(); ++k) zf.data[k] = static_cast<float>(z[k]);
        DenoiserOutput out = predictor.predict(zf, y, v, t);
        if (!all_finite(out.e) || !all_finite(out.m)) {
            throw NumericalError("non-finite denoiser output while sampling", static_cast<long>(i));
        }
        const State e(out.e.data.begin(), out.e.data.end());
        const State x = ddim_step(z, e, t, t_prev, schedule);
        const double rho = rho_schedule(cfg, static_cast<int>(i));
        if (cfg.mode == SamplerMode::kUnrolled) {
            // Data consistency holds on intensities (y = h * x), so the state
            // is bridged from [-1,1] to [0,1] and back around the update.
            for (std::size_t k = 0; k < x.size(); ++k) {
                const std::size_t p = k / C;
                const double hv = h.data[p * h.channels + (h.channels == 1 ? 0 : k % C)];
                z[k] = 2.0 * dc_image_value(0.5 * (x[k] + 1.0), y.data[k], hv, rho) - 1.0;
            }
            v = cfg.refine_mask ? dc_mask(out.m, m_tilde, cfg.phi, rho) : m_tilde;
        } else {
            z = x;
            v = m_tilde;
        }
        for (std::size_t k = 0; k < z.size(); ++k) zf.data[k] = static_cast<float>(z[k]);
        if (!all_finite(zf)) throw NumericalError("non-finite state while sampling", static_cast<long>(i));

        TraceRecord rec;
        rec.iteration = static_cast<int>(i);
        rec.t = t;
        rec.t_prev = t_prev;
        rec.rho = rho;
        if (truth) rec.psnr = psnr(from_state(zf), *truth);
        if (cfg.keep_trace_fields) {
            rec.x = Field(y.height, y.width, y.channels);
            for (std::size_t k = 0; k < x.size(); ++k) rec.x.data[k] = static_cast<float>(x[k]);
            rec.z = zf;
            rec.v = v;
            rec.m = out.m;
        }
        result.trace.records.push_back(std::move(rec));
        result.m0 = std::move(out.m);
    }
    result.x0 = from_state(zf);
    return result;
}

SampleResult sample(const NoisePredictor& predictor, const DegradationSource& estimator, const Image& y,
                    const MaskField& m_tilde, const SamplerConfig& cfg, const NoiseSchedule& schedule,
                    const Image* truth) {
    const DegradationMap h = estimator.estimate(y, m_tilde);
    return sample(predictor, h, y, m_tilde, cfg, schedule, truth);
}

void dump_trace(const SampleTrace& trace, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::string csv = "iter,t,rho,psnr\n";
    char buf[128];
    for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,", r.iteration, r.t, r.rho);
        csv += buf;
        if (r.psnr) {
            std::snprintf(buf, sizeof(buf), "%.6f", *r.psnr);
            csv += buf;
        }
        csv += "\n";
        if (!r.z.empty()) {
            const auto sub = dir / "trace" / std::to_string(r.iteration);
            std::filesystem::create_directories(sub);
            save_raw_plane(r.x, sub / "x.rpln");
            save_raw_plane(r.z, sub / "z.rpln");
            save_raw_plane(r.v, sub / "v.rpln");
            save_raw_plane(r.m, sub / "m.rpln");
        }
    }
    write_file(dir / "trace.csv", csv);
}

}  // namespace shadowdiff
