// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shadowdiff/field.hpp"

namespace shadowdiff {

inline constexpr double kPsnrCap = 100.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kIouThreshold = 0.5;

enum class RmseConvention {
    kMeanAbs,    // mean over pixels and channels of |Lab difference|
    kEuclidean,  // mean over pixels of the Lab difference vector norm
};

const char* convention_name(RmseConvention c);
RmseConvention parse_convention(const std::string& name);

enum class Region { kShadow, kNonShadow, kAll };

/// 10 log10(1 / MSE) with peak 1, capped at kPsnrCap.
double psnr(const Field& a, const Field& b);

/// PSNR over the pixels selected by `region` of `mask` (binarized at 0.5).
/// Throws InvalidArgument on an empty region.
double psnr(const Field& a, const Field& b, const MaskField& mask, Region region);

/// Per-pixel SSIM map (channel mean) with reflect-padded Gaussian filtering.
std::vector<double> ssim_map(const Field& a, const Field& b);

/// Mean SSIM over the interior (border of half the window cropped), which
/// agrees with scikit-image's gaussian_weights=True,
/// use_sample_covariance=False reference.
double ssim(const Field& a, const Field& b);

/// Mean of the SSIM map over a region's pixels.
double ssim(const Field& a, const Field& b, const MaskField& mask, Region region);

/// Lab error of two images. 1-channel images use L only.
double rmse_lab(const Image& a, const Image& b, RmseConvention conv = RmseConvention::kMeanAbs);
double rmse_lab(const Image& a, const Image& b, const MaskField& mask, Region region,
                RmseConvention conv = RmseConvention::kMeanAbs);

/// |pred >= thr AND gt >= 0.5| / |pred >= thr OR gt >= 0.5|; 1 for an empty union.
double mask_iou(const MaskField& pred, const MaskField& gt, double threshold = kIouThreshold);

/// Number of pixels in the region; shadow + non-shadow equals all.
std::size_t region_pixels(const MaskField& mask, Region region);

struct RegionMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
    double rmse_lab = 0.0;
};

struct RegionReport {
    std::string id;
    RegionMetrics shadow;
    RegionMetrics non_shadow;
    RegionMetrics all;
    std::optional<double> mask_iou;
};

/// Metrics of `output` against `truth` split by `mask` (binarized at 0.5).
/// A region without pixels reports NaN.
RegionReport evaluate(const std::string& id, const Image& output, const Image& truth, const MaskField& mask,
                      RmseConvention conv = RmseConvention::kMeanAbs, const MaskField* predicted_mask = nullptr);

struct EvaluationSet {
    std::vector<RegionReport> reports;
    RegionReport mean;  // id "mean"; NaN entries are skipped per column
};

/// Evaluates aligned lists. `predicted_masks` may be empty or aligned.
EvaluationSet evaluate_set(const std::vector<std::string>& ids, const std::vector<Image>& outputs,
                           const std::vector<Image>& truths, const std::vector<MaskField>& masks,
                           RmseConvention conv = RmseConvention::kMeanAbs,
                           const std::vector<MaskField>& predicted_masks = {});

RegionReport aggregate(const std::vector<RegionReport>& reports);

/// One JSON object per line; the first line is a header echoing the convention.
std::string reports_jsonl(const EvaluationSet& set, RmseConvention conv);

/// Mean per region per metric: header "region,psnr,ssim,rmse_lab,mask_iou,convention".
std::string summary_csv(const EvaluationSet& set, RmseConvention conv);

}  // namespace shadowdiff
