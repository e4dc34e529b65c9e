// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "shadowdiff/denoiser.hpp"
#include "shadowdiff/metrics.hpp"
#include "shadowdiff/sampler.hpp"
#include "shadowdiff/scene.hpp"

namespace shadowdiff {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the `shadowdiff` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct AblationRow {
    std::string mode;  // plain | unrolled | unrolled_fixed_mask
    double severity = 0.0;
    double rho = 0.0;
    std::string seed;  // checkpoint label, or "mean"
    double psnr_all = 0.0;
    double psnr_shadow = 0.0;
    double ssim_all = 0.0;
    double rmse_lab_all = 0.0;
    double iou_m0 = 0.0;
    double iou_m_tilde = 0.0;
    double unrolled_minus_plain = 0.0;  // PSNR delta against the paired plain row
};

struct AblationInputs {
    std::vector<std::string> labels;  // one per checkpoint
    std::vector<const DenoiserParams*> denoisers;
    const EstimatorParams* estimator = nullptr;  // null: oracle h from the scene
    std::vector<double> severities{0.5};
    std::vector<double> rhos;  // penalty sweep; empty means {sampler.rho}
    SamplerConfig sampler;     // mode, refine_mask and rho are overridden per row
    RmseConvention convention = RmseConvention::kMeanAbs;
    std::uint64_t seed = 0;
};

/// Paired plain / unrolled / fixed-mask runs for every (rho, severity,
/// checkpoint), followed by one "mean" row per (rho, severity, mode).
/// Row order is fixed.
std::vector<AblationRow> run_ablation(const AblationInputs& in, const std::vector<SceneSample>& scenes,
                                      const NoiseSchedule& schedule);

std::string ablation_csv(const std::vector<AblationRow>& rows, RmseConvention conv);

}  // namespace shadowdiff
