// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shadowdiff/color.hpp"
#include "shadowdiff/error.hpp"
#include "shadowdiff/metrics.hpp"
#include "shadowdiff/scene.hpp"
#include "test_util.hpp"

using namespace shadowdiff;
using shadowdiff::testing::lcg_field;
using shadowdiff::testing::lcg_image;
using shadowdiff::testing::lcg_mask;

namespace {

// Pair used when freezing the reference values: b = clip(a + 0.4 (n - 0.5)).
std::pair<Field, Field> lcg_pair(int h, int w, int c, std::uint64_t seed) {
    const Field a = lcg_field(h, w, c, seed);
    const Field n = lcg_field(h, w, c, seed + 100);
    Field b(h, w, c);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float d = (n.data[i] - 0.5f) * 0.4f;
        b.data[i] = std::clamp(a.data[i] + d, 0.0f, 1.0f);
    }
    return {a, b};
}

std::pair<Field, Field> smooth_pair() {
    Field a(32, 32, 3), b(32, 32, 3);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float av = static_cast<float>(0.5 + 0.4 * std::sin(0.37 * y + 0.91 * x + 1.3 * c));
                a.at(y, x, c) = av;
                b.at(y, x, c) = static_cast<float>(std::clamp(av + 0.1 * std::cos(1.7 * x - 0.6 * y + c), 0.0, 1.0));
            }
        }
    }
    return {a, b};
}

// Direct windowed SSIM: explicit 11x11 Gaussian window, half-sample
// symmetric indexing, population statistics, mean over the cropped interior.
double brute_force_ssim(const Field& a, const Field& b) {
    const int r = 5;
    double wsum = 0.0;
    double w[11][11];
    for (int i = -r; i <= r; ++i) {
        for (int j = -r; j <= r; ++j) wsum += w[i + r][j + r] = std::exp(-(i * i + j * j) / (2.0 * 1.5 * 1.5));
    }
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
    };
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int count = 0;
    for (int y = r; y < a.height - r; ++y) {
        for (int x = r; x < a.width - r; ++x) {
            for (int c = 0; c < a.channels; ++c) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = -r; i <= r; ++i) {
                    for (int j = -r; j <= r; ++j) {
                        const double k = w[i + r][j + r] / wsum;
                        const double va = a.at(reflect(y + i, a.height), reflect(x + j, a.width), c);
                        const double vb = b.at(reflect(y + i, a.height), reflect(x + j, a.width), c);
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        }
    }
    return total / count;
}

Image constant_image(int h, int w, int c, float v) {
    Image img(h, w, c);
    std::fill(img.data.begin(), img.data.end(), v);
    return img;
}

MaskField half_mask(int h, int w) {
    MaskField m(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = w / 2; x < w; ++x) m.at(y, x) = 1.0f;
    }
    return m;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("psnr examples") {
        const Image a = lcg_image(8, 8, 3, 1);
        CHECK(psnr(a, a) == kPsnrCap);
        const Image z = constant_image(4, 4, 1, 0.0f);
        CHECK(psnr(z, constant_image(4, 4, 1, 0.1f)) == doctest::Approx(20.0).epsilon(1e-6));
        CHECK(psnr(z, constant_image(4, 4, 1, 0.01f)) == doctest::Approx(40.0).epsilon(1e-6));
        CHECK_THROWS_AS(psnr(z, constant_image(4, 5, 1, 0.0f)), InvalidArgument);
    }

    TEST_CASE("region psnr selects the masked pixels") {
        Image a = constant_image(4, 4, 1, 0.0f), b = a;
        const MaskField m = half_mask(4, 4);
        for (int y = 0; y < 4; ++y) b.at(y, 3) = 0.1f;
        CHECK(psnr(a, b, m, Region::kNonShadow) == kPsnrCap);
        CHECK(psnr(a, b, m, Region::kShadow) == doctest::Approx(10 * std::log10(2.0 / 0.01)).epsilon(1e-6));
        CHECK(psnr(a, b, m, Region::kAll) == doctest::Approx(10 * std::log10(4.0 / 0.01)).epsilon(1e-6));
        CHECK_THROWS_AS(psnr(a, b, MaskField(4, 4), Region::kShadow), InvalidArgument);
    }

    TEST_CASE("ssim identities") {
        const Image a = lcg_image(16, 16, 3, 2);
        CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ssim(constant_image(12, 12, 1, 0.3f), constant_image(12, 12, 1, 0.3f)) ==
              doctest::Approx(1.0).epsilon(1e-12));
        const auto [x, y] = lcg_pair(16, 16, 3, 5);
        CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
        CHECK(ssim(x, y) < 1.0);
        CHECK_THROWS_AS(ssim(Image(8, 8, 1), Image(8, 8, 1)), InvalidArgument);
    }

    TEST_CASE("ssim matches frozen reference values") {
        // scikit-image structural_similarity(gaussian_weights=True, sigma=1.5,
        // use_sample_covariance=False, data_range=1) on the same inputs.
        const struct {
            int h, w, c;
            std::uint64_t seed;
            double value;
        } refs[] = {{32, 32, 3, 1, 0.9292210847984617}, {32, 32, 1, 2, 0.9197287277315794},
                    {16, 24, 3, 3, 0.9267100994165011}};
        for (const auto& r : refs) {
            const auto [a, b] = lcg_pair(r.h, r.w, r.c, r.seed);
            CHECK(std::abs(ssim(a, b) - r.value) < 1e-6);
        }
        const auto [a, b] = smooth_pair();
        CHECK(std::abs(ssim(a, b) - 0.9659117266056718) < 1e-6);
    }

    TEST_CASE("ssim matches a brute-force window evaluation") {
        for (std::uint64_t seed = 10; seed < 14; ++seed) {
            const int c = seed % 2 ? 1 : 3;
            const auto [a, b] = lcg_pair(int(seed) + 3, 30 - int(seed), c, seed);
            CHECK(std::abs(ssim(a, b) - brute_force_ssim(a, b)) < 1e-9);
        }
    }

    TEST_CASE("region ssim averages the map") {
        const auto [a, b] = lcg_pair(16, 16, 3, 7);
        const auto map = ssim_map(a, b);
        const MaskField m = half_mask(16, 16);
        double s = 0.0;
        for (int y = 0; y < 16; ++y) {
            for (int x = 8; x < 16; ++x) s += map[y * 16 + x];
        }
        CHECK(ssim(a, b, m, Region::kShadow) == doctest::Approx(s / 128.0).epsilon(1e-12));
    }

    TEST_CASE("lab error conventions") {
        Image a(1, 2, 3), b(1, 2, 3);
        a.data = {0.2f, 0.6f, 0.9f, 0.5f, 0.5f, 0.5f};
        b.data = {0.3f, 0.5f, 0.7f, 0.5f, 0.5f, 0.5f};
        const auto la = srgb_to_lab(0.2f, 0.6f, 0.9f), lb = srgb_to_lab(0.3f, 0.5f, 0.7f);
        const double d0 = la[0] - lb[0], d1 = la[1] - lb[1], d2 = la[2] - lb[2];
        const double mean_abs = (std::abs(d0) + std::abs(d1) + std::abs(d2)) / 6.0;
        const double euclid = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2) / 2.0;
        CHECK(rmse_lab(a, b) == doctest::Approx(mean_abs).epsilon(1e-4));
        CHECK(rmse_lab(a, b, RmseConvention::kEuclidean) == doctest::Approx(euclid).epsilon(1e-4));
        CHECK(rmse_lab(a, a) == 0.0);

        const Image g0 = constant_image(2, 2, 1, 0.5f), g1 = constant_image(2, 2, 1, 0.0f);
        CHECK(rmse_lab(g0, g1) == doctest::Approx(srgb_to_lab(0.5, 0.5, 0.5)[0]).epsilon(1e-4));
        CHECK(rmse_lab(g0, g1, RmseConvention::kEuclidean) == doctest::Approx(rmse_lab(g0, g1)).epsilon(1e-9));

        CHECK(parse_convention("mae") == RmseConvention::kMeanAbs);
        CHECK(parse_convention("euclidean") == RmseConvention::kEuclidean);
        CHECK(std::string(convention_name(RmseConvention::kMeanAbs)) == "mean_abs");
        CHECK_THROWS_AS(parse_convention("rmse"), InvalidArgument);
    }

    TEST_CASE("mask iou examples") {
        const MaskField m = half_mask(4, 4);
        CHECK(mask_iou(m, m) == 1.0);
        MaskField inv(4, 4);
        for (std::size_t i = 0; i < inv.size(); ++i) inv.data[i] = 1.0f - m.data[i];
        CHECK(mask_iou(inv, m) == 0.0);
        MaskField part(4, 4);
        for (int y = 0; y < 4; ++y) {
            part.at(y, 1) = part.at(y, 2) = 0.9f;
        }
        // columns {1,2} vs {2,3}: intersection 4, union 12
        CHECK(mask_iou(part, m) == doctest::Approx(1.0 / 3.0));
        CHECK(mask_iou(MaskField(4, 4), MaskField(4, 4)) == 1.0);
        part.data.assign(16, 0.4f);
        CHECK(mask_iou(part, MaskField(4, 4)) == 1.0);
        CHECK(mask_iou(part, MaskField(4, 4), 0.3) == 0.0);
    }

    TEST_CASE("region counts partition the image") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const MaskField m = lcg_mask(9, 11, seed, false);
            CHECK(region_pixels(m, Region::kShadow) + region_pixels(m, Region::kNonShadow) ==
                  region_pixels(m, Region::kAll));
            CHECK(region_pixels(m, Region::kAll) == 99);
        }
    }

    TEST_CASE("evaluation of perfect and shadowed outputs") {
        SceneConfig cfg;
        std::vector<std::string> ids;
        std::vector<Image> truths, inputs;
        std::vector<MaskField> masks;
        for (int i = 0; i < 5; ++i) {
            cfg.seed = scene_seed(4, i);
            const SceneSample s = generate_scene(cfg);
            ids.push_back("s" + std::to_string(i));
            truths.push_back(s.x);
            inputs.push_back(s.y);
            masks.push_back(s.m);
        }
        const EvaluationSet perfect = evaluate_set(ids, truths, truths, masks, RmseConvention::kMeanAbs, masks);
        CHECK(perfect.mean.all.psnr == kPsnrCap);
        CHECK(perfect.mean.all.ssim == doctest::Approx(1.0));
        CHECK(perfect.mean.all.rmse_lab == 0.0);
        CHECK(*perfect.mean.mask_iou == 1.0);

        const EvaluationSet input = evaluate_set(ids, inputs, truths, masks);
        for (const auto& r : input.reports) {
            CHECK(r.shadow.psnr < r.non_shadow.psnr);
            CHECK(r.shadow.rmse_lab > r.non_shadow.rmse_lab);
            CHECK_FALSE(r.mask_iou.has_value());
        }
        double mean_psnr = 0.0;
        for (const auto& r : input.reports) mean_psnr += r.all.psnr;
        CHECK(input.mean.all.psnr == doctest::Approx(mean_psnr / 5.0));
        CHECK_THROWS_AS(evaluate_set(ids, inputs, truths, {}), InvalidArgument);
    }

    TEST_CASE("aggregate of identical reports and empty regions") {
        const Image a = lcg_image(12, 12, 3, 3);
        const auto [x, y] = lcg_pair(12, 12, 3, 4);
        Image out(12, 12, 3);
        out.data = y.data;
        Image truth(12, 12, 3);
        truth.data = x.data;
        const RegionReport r = evaluate("a", out, truth, MaskField(12, 12));
        CHECK(std::isnan(r.shadow.psnr));
        CHECK(r.all.psnr == doctest::Approx(r.non_shadow.psnr));
        const RegionReport m = aggregate({r, r, r});
        CHECK(m.all.psnr == doctest::Approx(r.all.psnr));
        CHECK(m.all.ssim == doctest::Approx(r.all.ssim));
        CHECK(std::isnan(m.shadow.psnr));
    }

    TEST_CASE("report serialization") {
        const auto [x, y] = lcg_pair(12, 12, 3, 8);
        Image out(12, 12, 3), truth(12, 12, 3);
        out.data = y.data;
        truth.data = x.data;
        const MaskField m = half_mask(12, 12);
        const EvaluationSet set = evaluate_set({"one"}, {out}, {truth}, {m}, RmseConvention::kEuclidean, {m});
        const std::string jsonl = reports_jsonl(set, RmseConvention::kEuclidean);
        std::istringstream lines(jsonl);
        std::string line;
        std::vector<nlohmann::json> rows;
        while (std::getline(lines, line)) rows.push_back(nlohmann::json::parse(line));
        REQUIRE(rows.size() == 3);
        CHECK(rows[0]["kind"] == "header");
        CHECK(rows[0]["rmse_convention"] == "euclidean");
        CHECK(rows[1]["id"] == "one");
        CHECK(rows[1]["shadow"]["psnr_dB"].get<double>() == doctest::Approx(set.reports[0].shadow.psnr));
        CHECK(rows[1]["mask_iou"].get<double>() == 1.0);
        CHECK(rows[2]["id"] == "mean");

        const std::string csv = summary_csv(set, RmseConvention::kEuclidean);
        CHECK(csv.rfind("region,psnr,ssim,rmse_lab,mask_iou,convention\n", 0) == 0);
        CHECK(csv.find("\nshadow,") != std::string::npos);
        CHECK(csv.find("\nnon_shadow,") != std::string::npos);
        CHECK(csv.find("\nall,") != std::string::npos);
        CHECK(csv.find(",euclidean\n") != std::string::npos);
    }
}
