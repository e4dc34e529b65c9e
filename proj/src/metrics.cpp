// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "shadowdiff/color.hpp"
#include "shadowdiff/error.hpp"

namespace shadowdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool in_region(const MaskField& mask, std::size_t p, Region region) {
    if (region == Region::kAll) return true;
    const bool shadow = mask.data[p] >= 0.5f;
    return region == Region::kShadow ? shadow : !shadow;
}

const char* region_name(Region r) {
    switch (r) {
        case Region::kShadow:
            return "shadow";
        case Region::kNonShadow:
            return "non_shadow";
        case Region::kAll:
            break;
    }
    return "all";
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> k{};
    const int r = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
        sum += k[i + r];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Half-sample symmetric reflection: -1 -> 0, n -> n-1.
int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// Separable Gaussian filter of an H x W plane.
std::vector<double> blur(const std::vector<double>& src, int H, int W) {
    static const auto k = gaussian_taps();
    const int r = kSsimWindow / 2;
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int j = -r; j <= r; ++j) s += k[j + r] * src[static_cast<std::size_t>(y) * W + reflect(x + j, W)];
            tmp[static_cast<std::size_t>(y) * W + x] = s;
        }
    }
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int j = -r; j <= r; ++j) s += k[j + r] * tmp[static_cast<std::size_t>(reflect(y + j, H)) * W + x];
            out[static_cast<std::size_t>(y) * W + x] = s;
        }
    }
    return out;
}

std::array<double, 3> lab_of(const Image& img, std::size_t p) {
    if (img.channels == 3) {
        return srgb_to_lab(img.data[p * 3], img.data[p * 3 + 1], img.data[p * 3 + 2]);
    }
    const double v = img.data[p];
    return srgb_to_lab(v, v, v);
}

double mean_skipping_nan(const std::vector<double>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isnan(x)) continue;
        sum += x;
        ++n;
    }
    return n == 0 ? kNaN : sum / static_cast<double>(n);
}

nlohmann::json metrics_json(const RegionMetrics& m) {
    return {{"psnr_dB", m.psnr}, {"ssim", m.ssim}, {"rmse_lab", m.rmse_lab}};
}

}  // namespace

const char* convention_name(RmseConvention c) {
    return c == RmseConvention::kMeanAbs ? "mean_abs" : "euclidean";
}

RmseConvention parse_convention(const std::string& name) {
    if (name == "mean_abs" || name == "mae") return RmseConvention::kMeanAbs;
    if (name == "euclidean") return RmseConvention::kEuclidean;
    throw InvalidArgument("unknown rmse convention '" + name + "' (expected mean_abs|euclidean)");
}

std::size_t region_pixels(const MaskField& mask, Region region) {
    std::size_t n = 0;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) n += in_region(mask, p, region) ? 1 : 0;
    return n;
}

double psnr(const Field& a, const Field& b) {
    require_same_shape(a, b, "psnr");
    if (a.empty()) throw InvalidArgument("psnr: empty input");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        se += d * d;
    }
    return psnr_from_mse(se / static_cast<double>(a.size()));
}

double psnr(const Field& a, const Field& b, const MaskField& mask, Region region) {
    require_same_shape(a, b, "psnr");
    require_same_extent(a, mask, "psnr region");
    const int C = a.channels;
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        if (!in_region(mask, p, region)) continue;
        for (int c = 0; c < C; ++c) {
            const double d = static_cast<double>(a.data[p * C + c]) - b.data[p * C + c];
            se += d * d;
        }
        n += C;
    }
    if (n == 0) throw InvalidArgument(std::string("psnr: empty ") + region_name(region) + " region");
    return psnr_from_mse(se / static_cast<double>(n));
}

std::vector<double> ssim_map(const Field& a, const Field& b) {
    require_same_shape(a, b, "ssim");
    if (a.height < kSsimWindow || a.width < kSsimWindow) {
        throw InvalidArgument("ssim: image " + a.shape_string() + " smaller than the 11x11 window");
    }
    const int H = a.height, W = a.width, C = a.channels;
    const std::size_t n = a.pixel_count();
    const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
    const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
    std::vector<double> out(n, 0.0);
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (int c = 0; c < C; ++c) {
        for (std::size_t p = 0; p < n; ++p) {
            pa[p] = a.data[p * C + c];
            pb[p] = b.data[p * C + c];
            paa[p] = pa[p] * pa[p];
            pbb[p] = pb[p] * pb[p];
            pab[p] = pa[p] * pb[p];
        }
        const auto ua = blur(pa, H, W), ub = blur(pb, H, W);
        const auto uaa = blur(paa, H, W), ubb = blur(pbb, H, W), uab = blur(pab, H, W);
        for (std::size_t p = 0; p < n; ++p) {
            const double va = uaa[p] - ua[p] * ua[p];
            const double vb = ubb[p] - ub[p] * ub[p];
            const double cov = uab[p] - ua[p] * ub[p];
            const double num = (2.0 * ua[p] * ub[p] + c1) * (2.0 * cov + c2);
            const double den = (ua[p] * ua[p] + ub[p] * ub[p] + c1) * (va + vb + c2);
            out[p] += num / den / C;
        }
    }
    return out;
}

double ssim(const Field& a, const Field& b) {
    const auto map = ssim_map(a, b);
    const int pad = kSsimWindow / 2;
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = pad; y < a.height - pad; ++y) {
        for (int x = pad; x < a.width - pad; ++x) {
            sum += map[static_cast<std::size_t>(y) * a.width + x];
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

double ssim(const Field& a, const Field& b, const MaskField& mask, Region region) {
    require_same_extent(a, mask, "ssim region");
    if (region == Region::kAll) return ssim(a, b);
    const auto map = ssim_map(a, b);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < map.size(); ++p) {
        if (!in_region(mask, p, region)) continue;
        sum += map[p];
        ++n;
    }
    if (n == 0) throw InvalidArgument(std::string("ssim: empty ") + region_name(region) + " region");
    return sum / static_cast<double>(n);
}

double rmse_lab(const Image& a, const Image& b, RmseConvention conv) {
    return rmse_lab(a, b, MaskField(a.height, a.width), Region::kAll, conv);
}

double rmse_lab(const Image& a, const Image& b, const MaskField& mask, Region region, RmseConvention conv) {
    require_same_shape(a, b, "rmse_lab");
    require_same_extent(a, mask, "rmse_lab region");
    const bool gray = a.channels == 1;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        if (!in_region(mask, p, region)) continue;
        const auto la = lab_of(a, p), lb = lab_of(b, p);
        const int k = gray ? 1 : 3;
        if (conv == RmseConvention::kEuclidean) {
            double s = 0.0;
            for (int c = 0; c < k; ++c) s += (la[c] - lb[c]) * (la[c] - lb[c]);
            sum += std::sqrt(s);
        } else {
            double s = 0.0;
            for (int c = 0; c < k; ++c) s += std::abs(la[c] - lb[c]);
            sum += s / k;
        }
        ++n;
    }
    if (n == 0) throw InvalidArgument(std::string("rmse_lab: empty ") + region_name(region) + " region");
    return sum / static_cast<double>(n);
}

double mask_iou(const MaskField& pred, const MaskField& gt, double threshold) {
    require_same_shape(pred, gt, "mask_iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.data[i] >= threshold;
        const bool g = gt.data[i] >= 0.5f;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

RegionReport evaluate(const std::string& id, const Image& output, const Image& truth, const MaskField& mask,
                      RmseConvention conv, const MaskField* predicted_mask) {
    require_same_shape(output, truth, "evaluate");
    require_same_extent(output, mask, "evaluate mask");
    RegionReport r;
    r.id = id;
    const auto map = ssim_map(output, truth);
    auto fill = [&](Region region, RegionMetrics& m) {
        if (region_pixels(mask, region) == 0) {
            m = {kNaN, kNaN, kNaN};
            return;
        }
        m.psnr = psnr(output, truth, mask, region);
        m.rmse_lab = rmse_lab(output, truth, mask, region, conv);
        if (region == Region::kAll) {
            m.ssim = ssim(output, truth);
        } else {
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t p = 0; p < map.size(); ++p) {
                if (!in_region(mask, p, region)) continue;
                sum += map[p];
                ++n;
            }
            m.ssim = sum / static_cast<double>(n);
        }
    };
    fill(Region::kShadow, r.shadow);
    fill(Region::kNonShadow, r.non_shadow);
    fill(Region::kAll, r.all);
    if (predicted_mask) r.mask_iou = mask_iou(*predicted_mask, mask);
    return r;
}

RegionReport aggregate(const std::vector<RegionReport>& reports) {
    RegionReport mean;
    mean.id = "mean";
    if (reports.empty()) return mean;
    auto column = [&](auto getter) {
        std::vector<double> v;
        v.reserve(reports.size());
        for (const auto& r : reports) v.push_back(getter(r));
        return mean_skipping_nan(v);
    };
    auto region = [&](RegionMetrics RegionReport::*slot) {
        RegionMetrics m;
        m.psnr = column([&](const RegionReport& r) { return (r.*slot).psnr; });
        m.ssim = column([&](const RegionReport& r) { return (r.*slot).ssim; });
        m.rmse_lab = column([&](const RegionReport& r) { return (r.*slot).rmse_lab; });
        return m;
    };
    mean.shadow = region(&RegionReport::shadow);
    mean.non_shadow = region(&RegionReport::non_shadow);
    mean.all = region(&RegionReport::all);
    bool any_iou = false;
    for (const auto& r : reports) any_iou = any_iou || r.mask_iou.has_value();
    if (any_iou) {
        mean.mask_iou = column([](const RegionReport& r) { return r.mask_iou.value_or(kNaN); });
    }
    return mean;
}

EvaluationSet evaluate_set(const std::vector<std::string>& ids, const std::vector<Image>& outputs,
                           const std::vector<Image>& truths, const std::vector<MaskField>& masks,
                           RmseConvention conv, const std::vector<MaskField>& predicted_masks) {
    if (ids.size() != outputs.size() || outputs.size() != truths.size() || truths.size() != masks.size()) {
        throw InvalidArgument("evaluate_set: lists are not aligned");
    }
    if (!predicted_masks.empty() && predicted_masks.size() != outputs.size()) {
        throw InvalidArgument("evaluate_set: predicted masks are not aligned");
    }
    EvaluationSet set;
    set.reports.reserve(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        set.reports.push_back(evaluate(ids[i], outputs[i], truths[i], masks[i], conv,
                                       predicted_masks.empty() ? nullptr : &predicted_masks[i]));
    }
    set.mean = aggregate(set.reports);
    return set;
}

std::string reports_jsonl(const EvaluationSet& set, RmseConvention conv) {
    std::string out;
    nlohmann::json header = {{"kind", "header"}, {"rmse_convention", convention_name(conv)}, {"count", set.reports.size()}};
    out += header.dump() + "\n";
    auto line = [&](const RegionReport& r) {
        nlohmann::json j = {{"id", r.id},
                            {"shadow", metrics_json(r.shadow)},
                            {"non_shadow", metrics_json(r.non_shadow)},
                            {"all", metrics_json(r.all)}};
        if (r.mask_iou) j["mask_iou"] = *r.mask_iou;
        out += j.dump() + "\n";
    };
    for (const auto& r : set.reports) line(r);
    line(set.mean);
    return out;
}

std::string summary_csv(const EvaluationSet& set, RmseConvention conv) {
    std::string out = "region,psnr,ssim,rmse_lab,mask_iou,convention\n";
    char buf[256];
    auto row = [&](const char* name, const RegionMetrics& m) {
        std::string iou;
        if (set.mean.mask_iou) {
            std::snprintf(buf, sizeof(buf), "%.6f", *set.mean.mask_iou);
            iou = buf;
        }
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%s,%s\n", name, m.psnr, m.ssim, m.rmse_lab, iou.c_str(),
                      convention_name(conv));
        out += buf;
    };
    row("shadow", set.mean.shadow);
    row("non_shadow", set.mean.non_shadow);
    row("all", set.mean.all);
    return out;
}

}  // namespace shadowdiff
