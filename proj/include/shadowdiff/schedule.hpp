// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "shadowdiff/field.hpp"

namespace shadowdiff {

/// Tables indexed by timestep t in [0, T]; index 0 holds the clean-image
/// convention (beta = 0, alpha = alpha_bar = 1).
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    double sqrt_alpha_bar(int t) const;
    double sqrt_one_minus_alpha_bar(int t) const;
};

inline constexpr int kDefaultTimesteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;
inline constexpr int kDefaultInferenceSteps = 25;

/// beta_t interpolated linearly from beta_start at t=1 to beta_end at t=T.
NoiseSchedule linear_schedule(int T = kDefaultTimesteps, double beta_start = kDefaultBetaStart,
                              double beta_end = kDefaultBetaEnd);

/// (T+1) x 1 plane with channels (beta, alpha, alpha_bar), row t = timestep t.
Field schedule_table(const NoiseSchedule& s);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, for t in [0, T].
Field forward_sample(const Field& x0, int t, const Field& eps, const NoiseSchedule& s);

/// Deterministic DDIM update from t to t_prev < t (t_prev = 0 lands on abar = 1):
/// x_prev = sqrt(abar_prev) * (z - sqrt(1-abar_t) e) / sqrt(abar_t) + sqrt(1-abar_prev) * e.
Field ddim_step(const Field& z, const Field& e, int t, int t_prev, const NoiseSchedule& s);

/// Double-precision state. The sampler carries its state in this form
/// between steps: near t = T, float32 rounding of z is amplified by
/// 1/sqrt(abar_T) (about 157x for the default schedule).
using State = std::vector<double>;
State forward_sample(const State& x0, int t, const State& eps, const NoiseSchedule& s);
State ddim_step(const State& z, const State& e, int t, int t_prev, const NoiseSchedule& s);

/// Predicted clean state (z - sqrt(1-abar_t) e) / sqrt(abar_t).
Field predict_x0(const Field& z, const Field& e, int t, const NoiseSchedule& s);

/// Strictly decreasing timesteps, uniformly spaced over [1, T] and ending at 1.
/// The step taken from plan[i] lands on plan[i+1], and from the last entry on 0.
using TimestepPlan = std::vector<int>;
TimestepPlan plan_timesteps(int T, int n_infer);

/// Previous timestep of plan entry i (0 after the last).
inline int previous_timestep(const TimestepPlan& plan, std::size_t i) {
    return i + 1 < plan.size() ? plan[i + 1] : 0;
}

}  // namespace shadowdiff
