// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "shadowdiff/config.hpp"
#include "shadowdiff/denoiser.hpp"
#include "shadowdiff/estimator.hpp"
#include "shadowdiff/field.hpp"
#include "shadowdiff/schedule.hpp"

namespace shadowdiff {

enum class SamplerMode {
    kPlain,     // conditional DDIM with the fixed initial mask
    kUnrolled,  // DDIM interleaved with the image and mask data-consistency steps
};

enum class RhoMode { kConstant, kGeometric };

struct SamplerConfig {
    double rho = 1.0;      // penalty weight; start value in geometric mode
    double rho_end = 1.0;  // geometric mode only
    RhoMode rho_mode = RhoMode::kConstant;
    double phi = 1.0;  // weight anchoring the mask to the initial estimate
    /// Regularizer weight of the prior term. Recorded for provenance only:
    /// the learned sampler replaces that sub-problem entirely.
    double psi = 1.0;
    int n_infer = kDefaultInferenceSteps;
    SamplerMode mode = SamplerMode::kUnrolled;
    /// When false the unrolled sampler keeps conditioning on the initial
    /// mask instead of the refined one (ablation switch).
    bool refine_mask = true;
    std::uint64_t seed = 0;
    /// Keep per-iteration fields in the trace (PSNR is always recorded).
    bool keep_trace_fields = false;

    void validate() const;
    KeyValues to_key_values() const;
    static SamplerConfig from_key_values(const KeyValues& kv);
};

struct TraceRecord {
    int iteration = 0;
    int t = 0;
    int t_prev = 0;
    double rho = 0.0;
    std::optional<double> psnr;
    // Populated when SamplerConfig::keep_trace_fields is set.
    Field x;  // DDIM output, state units
    Field z;  // after data consistency, state units
    MaskField v;
    MaskField m;
};

struct SampleTrace {
    std::vector<TraceRecord> records;
};

struct SampleResult {
    Image x0;
    MaskField m0;
    SampleTrace trace;
};

/// Scalar forms of the two data-consistency steps below.
double dc_image_value(double x, double y, double h, double rho);
double dc_mask_value(double m, double m_tilde, double phi, double rho);

/// Closed-form image data-consistency step on intensities:
/// z = (h*y + rho*x) / (h*h + rho), the minimizer of
/// 1/2 (h z - y)^2 + rho/2 (x - z)^2 per element.
Field dc_image(const Field& x, const Image& y, const DegradationMap& h, double rho);

/// Closed-form mask step v = (phi*m_tilde + rho*m) / (phi + rho), the
/// minimizer of phi/2 (v - m_tilde)^2 + rho/2 (m - v)^2.
MaskField dc_mask(const MaskField& m, const MaskField& m_tilde, double phi, double rho);

/// Penalty weight used at plan position `iteration` (0-based).
double rho_schedule(const SamplerConfig& cfg, int iteration);

/// Runs the sampler from z_T ~ N(0, I) (seeded by cfg.seed). When `truth`
/// is given, each trace record carries the PSNR of the current estimate.
SampleResult sample(const NoisePredictor& predictor, const DegradationMap& h, const Image& y,
                    const MaskField& m_tilde, const SamplerConfig& cfg, const NoiseSchedule& schedule,
                    const Image* truth = nullptr);

/// Estimates h once from (y, m_tilde), then samples.
SampleResult sample(const NoisePredictor& predictor, const DegradationSource& estimator, const Image& y,
                    const MaskField& m_tilde, const SamplerConfig& cfg, const NoiseSchedule& schedule,
                    const Image* truth = nullptr);

/// Writes trace.csv (iter,t,rho,psnr) and, for records with fields,
/// trace/<iter>/{x,z,v,m}.rpln under `dir`.
void dump_trace(const SampleTrace& trace, const std::filesystem::path& dir);

}  // namespace shadowdiff
