// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "shadowdiff/error.hpp"
#include "shadowdiff/schedule.hpp"
#include "test_util.hpp"

using namespace shadowdiff;
using shadowdiff::testing::lcg_field;
using shadowdiff::testing::max_abs_diff;

namespace {

Field gaussian_field(int h, int w, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n;
    Field f(h, w, c);
    for (float& v : f.data) v = n(rng);
    return f;
}

}  // namespace

TEST_SUITE("diffusion_schedule") {
    TEST_CASE("linear schedule endpoints") {
        const NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
        CHECK(s.T == 1000);
        CHECK(s.beta[1] == doctest::Approx(1e-4).epsilon(1e-12));
        CHECK(s.beta[1000] == doctest::Approx(0.02).epsilon(1e-12));
        CHECK(s.alpha_bar[0] == 1.0);
        CHECK(s.alpha_bar[1] == doctest::Approx(0.9999).epsilon(1e-14));
    }

    TEST_CASE("alpha_bar matches an arbitrary-precision product") {
        // 50-digit product of (1 - beta_t), frozen from mpmath.
        const NoiseSchedule s = linear_schedule();
        const struct {
            int t;
            double value;
        } refs[] = {{10, 0.9981052047858346188857026},
                    {500, 0.07858724288177823734328983},
                    {1000, 0.00004035829765375683314817635}};
        for (const auto& r : refs) CHECK(std::abs(s.alpha_bar[r.t] / r.value - 1.0) < 1e-10);
    }

    TEST_CASE("schedule monotonicity over a range of bounds") {
        for (int T : {1, 2, 10, 100, 1000}) {
            for (auto [b0, b1] : {std::pair{1e-4, 0.02}, std::pair{1e-3, 0.5}, std::pair{0.01, 0.011}}) {
                const NoiseSchedule s = linear_schedule(T, b0, b1);
                for (int t = 1; t <= T; ++t) {
                    CHECK(s.beta[t] > 0.0);
                    CHECK(s.beta[t] < 1.0);
                    if (t > 1) CHECK(s.beta[t] > s.beta[t - 1]);
                    CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
                }
                CHECK(s.alpha_bar[T] > 0.0);
            }
        }
    }

    TEST_CASE("invalid schedule bounds are rejected") {
        CHECK_THROWS_AS(linear_schedule(0), InvalidArgument);
        CHECK_THROWS_AS(linear_schedule(10, 0.0, 0.02), InvalidArgument);
        CHECK_THROWS_AS(linear_schedule(10, 0.03, 0.02), InvalidArgument);
        CHECK_THROWS_AS(linear_schedule(10, 1e-4, 1.0), InvalidArgument);
    }

    TEST_CASE("forward sample special cases and linearity") {
        const NoiseSchedule s = linear_schedule();
        const Field x0 = lcg_field(4, 4, 3, 1, -1, 1);
        const Field eps = gaussian_field(4, 4, 3, 2);
        const Field zero(4, 4, 3);
        CHECK(forward_sample(x0, 0, eps, s).data == x0.data);
        const Field a = forward_sample(x0, 300, zero, s);
        const Field b = forward_sample(zero, 300, eps, s);
        for (std::size_t i = 0; i < x0.size(); ++i) {
            CHECK(a.data[i] == doctest::Approx(s.sqrt_alpha_bar(300) * x0.data[i]));
            CHECK(b.data[i] == doctest::Approx(s.sqrt_one_minus_alpha_bar(300) * eps.data[i]));
        }
        const Field full = forward_sample(x0, 300, eps, s);
        for (std::size_t i = 0; i < x0.size(); ++i) CHECK(full.data[i] == doctest::Approx(a.data[i] + b.data[i]));
        CHECK_THROWS_AS(forward_sample(x0, 1001, eps, s), InvalidArgument);
        CHECK_THROWS_AS(forward_sample(x0, -1, eps, s), InvalidArgument);
    }

    TEST_CASE("ddim step identities") {
        const NoiseSchedule s = linear_schedule();
        const Field x0 = lcg_field(5, 4, 3, 3, -1, 1);
        const Field eps = gaussian_field(5, 4, 3, 4);
        const Field zero(5, 4, 3);
        const Field z = forward_sample(x0, 600, eps, s);

        const Field collapsed = ddim_step(z, zero, 600, 400, s);
        const double ratio = std::sqrt(s.alpha_bar[400] / s.alpha_bar[600]);
        for (std::size_t i = 0; i < z.size(); ++i) CHECK(collapsed.data[i] == doctest::Approx(ratio * z.data[i]));

        const Field next = ddim_step(z, eps, 600, 400, s);
        CHECK(max_abs_diff(next, forward_sample(x0, 400, eps, s)) < 1e-5f);

        const Field clean = ddim_step(z, eps, 600, 0, s);
        CHECK(max_abs_diff(clean, x0) < 1e-6f);

        CHECK_THROWS_AS(ddim_step(z, eps, 400, 400, s), InvalidArgument);
        CHECK_THROWS_AS(ddim_step(z, eps, 400, 600, s), InvalidArgument);
    }

    TEST_CASE("plans are uniform, strictly decreasing and end at 1") {
        const TimestepPlan p = plan_timesteps(1000, 25);
        REQUIRE(p.size() == 25);
        CHECK(p.front() == 1000);
        CHECK(p.back() == 1);
        for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i] < p[i - 1]);

        const TimestepPlan full = plan_timesteps(50, 50);
        for (int i = 0; i < 50; ++i) CHECK(full[i] == 50 - i);

        const TimestepPlan one = plan_timesteps(1000, 1);
        REQUIRE(one.size() == 1);
        CHECK(one[0] == 1);
        CHECK(previous_timestep(one, 0) == 0);

        CHECK_THROWS_AS(plan_timesteps(10, 0), InvalidArgument);
        CHECK_THROWS_AS(plan_timesteps(10, 11), InvalidArgument);
    }

    TEST_CASE("perfect-noise inversion over random plans") {
        const NoiseSchedule s = linear_schedule();
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 1 + static_cast<int>(rng() % 60);
            const TimestepPlan plan = plan_timesteps(s.T, n);
            const Field x0f = lcg_field(4, 4, 3, trial, -1, 1);
            const Field epsf = gaussian_field(4, 4, 3, 100 + trial);
            const State x0(x0f.data.begin(), x0f.data.end());
            const State eps(epsf.data.begin(), epsf.data.end());
            State z = forward_sample(x0, plan.front(), eps, s);
            for (std::size_t i = 0; i < plan.size(); ++i) z = ddim_step(z, eps, plan[i], previous_timestep(plan, i), s);
            double err = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) err = std::max(err, std::abs(z[k] - x0[k]));
            CHECK(err < 1e-5);
        }
    }

    TEST_CASE("schedule table dump") {
        const NoiseSchedule s = linear_schedule(10);
        const Field t = schedule_table(s);
        CHECK(t.height == 11);
        CHECK(t.channels == 3);
        CHECK(t.at(0, 0, 2) == 1.0f);
        CHECK(t.at(10, 0, 0) == static_cast<float>(s.beta[10]));
    }
}
