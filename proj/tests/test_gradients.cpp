// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gradcheck.hpp"
#include "shadowdiff/nn/layers.hpp"

using namespace shadowdiff;
using namespace shadowdiff::nn;
using shadowdiff::testing::check_gradient;
using shadowdiff::testing::dot;
using shadowdiff::testing::gaussian_vector;

namespace {

constexpr double kTol = 1e-3;

Tensor<double> random_tensor(int c, int h, int w, std::uint64_t seed) {
    Tensor<double> t(c, h, w);
    t.v = gaussian_vector(t.size(), seed);
    return t;
}

// L = <r, conv(x)>; checks both parameter and input gradients.
void check_conv(int in, int out, int k, int dil, int h, int w, std::uint64_t seed) {
    ParamRegistry reg;
    Conv2d conv(reg, "c", in, out, k, dil);
    std::vector<double> p = gaussian_vector(reg.total(), seed);
    Tensor<double> x = random_tensor(in, h, w, seed + 1);
    const std::vector<double> r = gaussian_vector(std::size_t(out) * h * w, seed + 2);

    auto loss = [&] {
        Tensor<double> y;
        std::vector<double> col;
        conv.forward<double>(p, x, y, col);
        return dot(r, y.v);
    };

    Tensor<double> y, dy(out, h, w), dx;
    std::vector<double> col;
    conv.forward<double>(p, x, y, col);
    dy.v = r;
    std::vector<double> gp(p.size(), 0.0);
    conv.backward<double>(p, x, col, dy, gp, &dx);

    CHECK(check_gradient(p, gp, loss).max_rel < kTol);
    CHECK(check_gradient(x.v, dx.v, loss).max_rel < kTol);
}

}  // namespace

TEST_SUITE("gradients") {
    TEST_CASE("checker flags a wrong gradient") {
        testing::UNetInstance inst(UNetSpec{1, 2, 4}, 4, 20, 0.5);
        auto g = inst.gradient();
        const auto big = std::max_element(g.begin(), g.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
        *big *= 1.01;
        CHECK(check_gradient(inst.params, g, [&] { return inst.loss(inst.params); }).max_rel > kTol);
    }

    TEST_CASE("conv2d 3x3") { check_conv(3, 4, 3, 1, 6, 5, 1); }
    TEST_CASE("conv2d 3x3 dilated") {
        check_conv(2, 3, 3, 2, 7, 8, 2);
        check_conv(2, 2, 3, 4, 9, 9, 3);
    }
    TEST_CASE("conv2d 1x1") { check_conv(5, 2, 1, 1, 4, 4, 4); }
    TEST_CASE("conv2d 5x5") { check_conv(1, 2, 5, 1, 6, 6, 5); }

    TEST_CASE("linear") {
        ParamRegistry reg;
        Linear lin(reg, "l", 5, 3);
        std::vector<double> p = gaussian_vector(reg.total(), 6);
        std::vector<double> x = gaussian_vector(5, 7);
        const std::vector<double> r = gaussian_vector(3, 8);
        auto loss = [&] {
            std::vector<double> y;
            lin.forward<double>(p, x, y);
            return dot(r, y);
        };
        std::vector<double> gp(p.size(), 0.0), dx;
        lin.backward<double>(p, x, r, gp, &dx);
        CHECK(check_gradient(p, gp, loss).max_rel < kTol);
        CHECK(check_gradient(x, dx, loss).max_rel < kTol);
    }

    TEST_CASE("silu") {
        std::vector<double> x = gaussian_vector(50, 9, 3.0);
        const std::vector<double> r = gaussian_vector(50, 10);
        auto loss = [&] {
            std::vector<double> y;
            silu_forward(x, y);
            return dot(r, y);
        };
        std::vector<double> dx = r;
        silu_backward(x, dx);
        CHECK(check_gradient(x, dx, loss).max_rel < kTol);
    }

    TEST_CASE("avgpool and upsample") {
        Tensor<double> x = random_tensor(2, 6, 4, 11);
        {
            const std::vector<double> r = gaussian_vector(2 * 3 * 2, 12);
            auto loss = [&] {
                Tensor<double> y;
                avgpool2_forward(x, y);
                return dot(r, y.v);
            };
            Tensor<double> dy(2, 3, 2), dx;
            dy.v = r;
            avgpool2_backward(dy, dx);
            CHECK(check_gradient(x.v, dx.v, loss).max_rel < kTol);
        }
        {
            const std::vector<double> r = gaussian_vector(2 * 12 * 8, 13);
            auto loss = [&] {
                Tensor<double> y;
                upsample2_forward(x, y);
                return dot(r, y.v);
            };
            Tensor<double> dy(2, 12, 8), dx;
            dy.v = r;
            upsample2_backward(dy, dx);
            CHECK(check_gradient(x.v, dx.v, loss).max_rel < kTol);
        }
        Tensor<double> odd = random_tensor(1, 3, 4, 14), y;
        CHECK_THROWS_AS(avgpool2_forward(odd, y), InvalidArgument);
    }

    TEST_CASE("concat and channel bias") {
        Tensor<double> a = random_tensor(2, 3, 3, 15);
        Tensor<double> b = random_tensor(3, 3, 3, 16);
        std::vector<double> bias = gaussian_vector(5, 17);
        const std::vector<double> r = gaussian_vector(5 * 9, 18);
        auto loss = [&] {
            Tensor<double> y;
            concat_forward(a, b, y);
            add_channel_bias(y, bias);
            return dot(r, y.v);
        };
        Tensor<double> dy(5, 3, 3), da, db;
        dy.v = r;
        concat_backward(dy, 2, da, db);
        std::vector<double> dbias;
        channel_bias_backward(dy, dbias);
        CHECK(check_gradient(a.v, da.v, loss).max_rel < kTol);
        CHECK(check_gradient(b.v, db.v, loss).max_rel < kTol);
        CHECK(check_gradient(bias, dbias, loss).max_rel < kTol);
    }

    TEST_CASE("full denoiser loss, three channels") {
        UNetSpec spec{3, 2, 4};
        testing::UNetInstance inst(spec, 8, 21, 0.5);
        const auto r = inst.check();
        CHECK(r.checked == inst.params.size());
        CHECK(r.max_rel < kTol);
    }

    TEST_CASE("full denoiser loss, one channel, no mask term") {
        UNetSpec spec{1, 3, 6};
        testing::UNetInstance inst(spec, 4, 22, 0.0);
        CHECK(inst.check().max_rel < kTol);
    }

    TEST_CASE("loss gradient with respect to the heads") {
        const std::vector<double> e = gaussian_vector(12, 23), eps = gaussian_vector(12, 24);
        std::vector<double> m = gaussian_vector(4, 25), m_gt = {0, 1, 1, 0};
        std::vector<double> ev = e;
        std::vector<double> de(12), dm(4);
        loss_total<double>(ev, eps, m, m_gt, 0.7, de, dm);
        auto loss = [&] { return loss_total<double>(ev, eps, m, m_gt, 0.7).total; };
        CHECK(check_gradient(ev, de, loss).max_rel < kTol);
        CHECK(check_gradient(m, dm, loss).max_rel < kTol);
    }

    TEST_CASE("estimator network") {
        testing::EstimatorInstance inst(EstimatorSpec{3, 3}, 9, 26);
        CHECK(inst.check().max_rel < kTol);
        testing::EstimatorInstance gray(EstimatorSpec{1, 2}, 8, 27);
        CHECK(gray.check().max_rel < kTol);
    }
}
