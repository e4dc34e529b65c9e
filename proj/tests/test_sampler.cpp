// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "shadowdiff/degradation.hpp"
#include "shadowdiff/estimator.hpp"
#include "shadowdiff/io.hpp"
#include "shadowdiff/sampler.hpp"
#include "shadowdiff/scene.hpp"
#include "test_util.hpp"

using namespace shadowdiff;
using shadowdiff::testing::dc_image_oracle;
using shadowdiff::testing::dc_mask_oracle;
using shadowdiff::testing::max_abs_diff;

namespace {

// Returns the noise that maps the current state exactly onto `truth`.
class ExactPredictor final : public NoisePredictor {
public:
    ExactPredictor(const Image& truth, const MaskField& mask, const NoiseSchedule& s)
        : x0_(to_state(truth)), mask_(mask), s_(s) {}

    DenoiserOutput predict(const Field& state, const Image&, const MaskField&, int t) const override {
        DenoiserOutput out{Field(state.height, state.width, state.channels), mask_};
        const double a = s_.sqrt_alpha_bar(t), b = s_.sqrt_one_minus_alpha_bar(t);
        for (std::size_t i = 0; i < state.size(); ++i) {
            out.e.data[i] = static_cast<float>((state.data[i] - a * x0_.data[i]) / b);
        }
        return out;
    }

private:
    Field x0_;
    MaskField mask_;
    const NoiseSchedule& s_;
};

// Outputs zero noise and a constant mask, or NaN from a given call on.
class StubPredictor final : public NoisePredictor {
public:
    explicit StubPredictor(int nan_from = -1) : nan_from_(nan_from) {}

    DenoiserOutput predict(const Field& state, const Image&, const MaskField& mask, int) const override {
        DenoiserOutput out{Field(state.height, state.width, state.channels), MaskField(mask.height, mask.width)};
        for (float& v : out.m.data) v = 0.75f;
        if (nan_from_ >= 0 && calls_++ >= nan_from_) out.e.data[0] = std::numeric_limits<float>::quiet_NaN();
        return out;
    }

private:
    int nan_from_;
    mutable int calls_ = 0;
};

SceneSample scene(std::uint64_t seed, int channels = 3) {
    SceneConfig cfg;
    cfg.height = cfg.width = 16;
    cfg.channels = channels;
    cfg.seed = seed;
    return generate_scene(cfg);
}

}  // namespace

TEST_SUITE("unroll_sampler") {
    TEST_CASE("image consistency examples") {
        CHECK(dc_image_value(0.2, 0.6, 1.0, 1.0) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(dc_image_value(0.3, 0.9, 0.5, 1e8) == doctest::Approx(0.3).epsilon(1e-7));
        CHECK(dc_image_value(0.3, 0.4, 0.5, 1e-12) == doctest::Approx(0.8).epsilon(1e-9));
        CHECK(dc_image_value(0.7, 0.35, 0.5, 0.25) == doctest::Approx(0.7).epsilon(1e-15));
    }

    TEST_CASE("image consistency matches a numerical minimizer") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 300; ++i) {
            const double x = u(rng), y = u(rng);
            const double h = 1e-4 + (1.0 - 1e-4) * (1.0 - u(rng));
            const double rho = std::pow(10.0, -3.0 + 6.0 * u(rng));
            const double z = dc_image_value(x, y, h, rho);
            CHECK(std::abs(z - static_cast<double>(dc_image_oracle(x, y, h, rho))) < 1e-6);
            // first-order condition: h (h z - y) + rho (z - x) = 0
            CHECK(std::abs(h * (h * z - y) + rho * (z - x)) < 1e-8 * (1.0 + rho));
            CHECK(z >= std::min(x, y / h) - 1e-12);
            CHECK(z <= std::max(x, y / h) + 1e-12);
        }
    }

    TEST_CASE("mask consistency matches a numerical minimizer") {
        CHECK(dc_mask_value(0.2, 0.8, 1.0, 1.0) == doctest::Approx(0.5));
        CHECK(dc_mask_value(0.2, 0.8, 0.0, 1.0) == doctest::Approx(0.2));
        CHECK(dc_mask_value(0.2, 0.8, 1.0, 1e-12) == doctest::Approx(0.8));
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 300; ++i) {
            const double m = u(rng), mt = u(rng);
            const double phi = std::pow(10.0, -3.0 + 6.0 * u(rng));
            const double rho = std::pow(10.0, -3.0 + 6.0 * u(rng));
            const double v = dc_mask_value(m, mt, phi, rho);
            CHECK(std::abs(v - static_cast<double>(dc_mask_oracle(m, mt, phi, rho))) < 1e-8);
            CHECK(v >= std::min(m, mt) - 1e-15);
            CHECK(v <= std::max(m, mt) + 1e-15);
        }
    }

    TEST_CASE("field consistency steps") {
        const SceneSample s = scene(3);
        const Field u = from_state(to_state(s.x));
        const Field z = dc_image(u, s.y, s.h, 1e-9);
        CHECK(max_abs_diff(z, s.x) < 1e-4f);
        const DegradationMap gray(16, 16, 1);
        CHECK_NOTHROW(dc_image(u, s.y, gray, 1.0));
        CHECK_THROWS_AS(dc_image(u, s.y, s.h, 0.0), InvalidArgument);
        CHECK_THROWS_AS(dc_image(u, s.y, DegradationMap(8, 8, 3), 1.0), InvalidArgument);
        const MaskField v = dc_mask(s.m, s.m_tilde, 1.0, 1.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(v.data[i] == doctest::Approx(0.5 * (s.m.data[i] + s.m_tilde.data[i])));
        }
        CHECK_THROWS_AS(dc_mask(s.m, s.m_tilde, 0.0, 0.0), InvalidArgument);
        CHECK_THROWS_AS(dc_mask(s.m, MaskField(4, 4), 1.0, 1.0), InvalidArgument);
    }

    TEST_CASE("rho schedules") {
        SamplerConfig cfg;
        cfg.rho = 2.0;
        CHECK(rho_schedule(cfg, 0) == 2.0);
        CHECK(rho_schedule(cfg, 24) == 2.0);
        cfg.rho_mode = RhoMode::kGeometric;
        cfg.rho = 1.0;
        cfg.rho_end = 100.0;
        cfg.n_infer = 3;
        CHECK(rho_schedule(cfg, 0) == 1.0);
        CHECK(rho_schedule(cfg, 1) == doctest::Approx(10.0));
        CHECK(rho_schedule(cfg, 2) == 100.0);
        cfg.rho = 0.0;
        CHECK_THROWS_AS(rho_schedule(cfg, 0), InvalidArgument);
    }

    TEST_CASE("config validation and key-value round trip") {
        SamplerConfig cfg;
        cfg.n_infer = 0;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        cfg = SamplerConfig{};
        cfg.phi = -1.0;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        cfg = SamplerConfig{};
        cfg.mode = SamplerMode::kPlain;
        cfg.rho = 0.5;
        cfg.refine_mask = false;
        cfg.seed = 17;
        const SamplerConfig back = SamplerConfig::from_key_values(cfg.to_key_values());
        CHECK(back.mode == SamplerMode::kPlain);
        CHECK(back.rho == 0.5);
        CHECK_FALSE(back.refine_mask);
        CHECK(back.seed == 17);
        KeyValues bad;
        bad.set("mode", "other");
        CHECK_THROWS_AS(SamplerConfig::from_key_values(bad), ConfigError);
    }

    TEST_CASE("exact noise predictions reconstruct the clean image") {
        const NoiseSchedule sched = linear_schedule();
        for (int C : {1, 3}) {
            const SceneSample s = scene(10 + C, C);
            const ExactPredictor pred(s.x, s.m, sched);
            for (auto mode : {SamplerMode::kPlain, SamplerMode::kUnrolled}) {
                SamplerConfig cfg;
                cfg.mode = mode;
                cfg.seed = 4;
                const SampleResult r = sample(pred, s.h, s.y, s.m_tilde, cfg, sched, &s.x);
                CHECK(max_abs_diff(r.x0, s.x) < 1e-3f);
                CHECK(r.m0.data == s.m.data);
                REQUIRE(r.trace.records.size() == 25);
                CHECK(*r.trace.records.back().psnr > 60.0);
            }
        }
    }

    TEST_CASE("plain and unrolled share the first DDIM output") {
        const NoiseSchedule sched = linear_schedule();
        const SceneSample s = scene(5);
        const StubPredictor pred;
        SamplerConfig cfg;
        cfg.keep_trace_fields = true;
        cfg.n_infer = 4;
        cfg.seed = 9;
        const SampleResult u = sample(pred, s.h, s.y, s.m_tilde, cfg, sched);
        cfg.mode = SamplerMode::kPlain;
        const SampleResult p = sample(pred, s.h, s.y, s.m_tilde, cfg, sched);
        CHECK(u.trace.records[0].x.data == p.trace.records[0].x.data);
        CHECK(u.trace.records[0].z.data != p.trace.records[0].z.data);
        CHECK(p.trace.records[0].v.data == s.m_tilde.data);
        for (std::size_t i = 0; i < s.m.size(); ++i) {
            CHECK(u.trace.records[0].v.data[i] == doctest::Approx(0.5 * (0.75 + s.m_tilde.data[i])));
        }
    }

    TEST_CASE("sampling is seeded and shaped like the input") {
        const NoiseSchedule sched = linear_schedule();
        const SceneSample s = scene(6, 1);
        const StubPredictor pred;
        SamplerConfig cfg;
        cfg.n_infer = 5;
        cfg.seed = 2;
        const SampleResult a = sample(pred, s.h, s.y, s.m_tilde, cfg, sched);
        const SampleResult b = sample(pred, OracleEstimator(s.h), s.y, s.m_tilde, cfg, sched);
        CHECK(a.x0.same_shape(s.y));
        CHECK(a.m0.height == 16);
        CHECK(a.x0.data == b.x0.data);
        CHECK_FALSE(a.trace.records[0].psnr.has_value());
        cfg.seed = 3;
        CHECK(sample(pred, s.h, s.y, s.m_tilde, cfg, sched).x0.data != a.x0.data);
        CHECK_THROWS_AS(sample(pred, s.h, s.y, MaskField(8, 8), cfg, sched), InvalidArgument);
    }

    TEST_CASE("geometric schedule is recorded in the trace") {
        const NoiseSchedule sched = linear_schedule();
        const SceneSample s = scene(7);
        SamplerConfig cfg;
        cfg.rho_mode = RhoMode::kGeometric;
        cfg.rho = 0.1;
        cfg.rho_end = 10.0;
        cfg.n_infer = 5;
        const SampleResult r = sample(StubPredictor(), s.h, s.y, s.m_tilde, cfg, sched);
        CHECK(r.trace.records.front().rho == doctest::Approx(0.1));
        CHECK(r.trace.records.back().rho == 10.0);
        CHECK(r.trace.records.back().t_prev == 0);
    }

    TEST_CASE("non-finite predictions abort with the iteration index") {
        const NoiseSchedule sched = linear_schedule();
        const SceneSample s = scene(8);
        SamplerConfig cfg;
        cfg.n_infer = 6;
        try {
            sample(StubPredictor(3), s.h, s.y, s.m_tilde, cfg, sched);
            FAIL("expected a numerical error");
        } catch (const NumericalError& e) {
            CHECK(e.iteration() == 3);
        }
    }

    TEST_CASE("trace dump writes the table and fields") {
        const auto dir = shadowdiff::testing::scratch_dir("trace");
        const NoiseSchedule sched = linear_schedule();
        const SceneSample s = scene(9);
        SamplerConfig cfg;
        cfg.n_infer = 3;
        cfg.keep_trace_fields = true;
        const SampleResult r = sample(StubPredictor(), s.h, s.y, s.m_tilde, cfg, sched, &s.x);
        dump_trace(r.trace, dir);
        const std::string csv = read_file(dir / "trace.csv");
        CHECK(csv.rfind("iter,t,rho,psnr\n0,1000,1,", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
        for (const char* f : {"x", "z", "v", "m"}) {
            CHECK(std::filesystem::exists(dir / "trace" / "2" / (std::string(f) + ".rpln")));
        }
        CHECK(load_raw_plane(dir / "trace" / "2" / "z.rpln").data == r.trace.records[2].z.data);
    }
}
