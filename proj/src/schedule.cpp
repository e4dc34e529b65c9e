// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/schedule.hpp"

#include <cmath>

#include "shadowdiff/error.hpp"

namespace shadowdiff {

namespace {

void check_t(const NoiseSchedule& s, int t) {
    if (t < 0 || t > s.T) {
        throw InvalidArgument("timestep " + std::to_string(t) + " outside [0, " + std::to_string(s.T) + "]");
    }
}

}  // namespace

double NoiseSchedule::sqrt_alpha_bar(int t) const {
    check_t(*this, t);
    return std::sqrt(alpha_bar[t]);
}

double NoiseSchedule::sqrt_one_minus_alpha_bar(int t) const {
    check_t(*this, t);
    return std::sqrt(1.0 - alpha_bar[t]);
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw InvalidArgument("schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw InvalidArgument("schedule bounds must satisfy 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        s.beta[t] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    return s;
}

Field schedule_table(const NoiseSchedule& s) {
    Field f(s.T + 1, 1, 3);
    for (int t = 0; t <= s.T; ++t) {
        f.at(t, 0, 0) = static_cast<float>(s.beta[t]);
        f.at(t, 0, 1) = static_cast<float>(s.alpha[t]);
        f.at(t, 0, 2) = static_cast<float>(s.alpha_bar[t]);
    }
    return f;
}

namespace {

struct Coefficients {
    double a_t, b_t, a_prev, b_prev;
};

template <typename Z, typename E, typename Out>
void ddim_kernel(const Z* z, const E* e, std::size_t n, const Coefficients& k, Out* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = (static_cast<double>(z[i]) - k.b_t * e[i]) / k.a_t;
        out[i] = static_cast<Out>(k.a_prev * x0 + k.b_prev * e[i]);
    }
}

Coefficients ddim_coefficients(int t, int t_prev, const NoiseSchedule& s) {
    if (t_prev >= t) throw InvalidArgument("ddim_step requires t_prev < t");
    return {s.sqrt_alpha_bar(t), s.sqrt_one_minus_alpha_bar(t), s.sqrt_alpha_bar(t_prev),
            s.sqrt_one_minus_alpha_bar(t_prev)};
}

void require_same_size(const State& a, const State& b, const char* what) {
    if (a.size() != b.size()) throw InvalidArgument(std::string(what) + ": size mismatch");
}

}  // namespace

Field forward_sample(const Field& x0, int t, const Field& eps, const NoiseSchedule& s) {
    require_same_shape(x0, eps, "forward_sample");
    const double a = s.sqrt_alpha_bar(t);
    const double b = s.sqrt_one_minus_alpha_bar(t);
    Field out(x0.height, x0.width, x0.channels);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        out.data[i] = static_cast<float>(a * x0.data[i] + b * eps.data[i]);
    }
    return out;
}

State forward_sample(const State& x0, int t, const State& eps, const NoiseSchedule& s) {
    require_same_size(x0, eps, "forward_sample");
    const double a = s.sqrt_alpha_bar(t);
    const double b = s.sqrt_one_minus_alpha_bar(t);
    State out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

Field predict_x0(const Field& z, const Field& e, int t, const NoiseSchedule& s) {
    require_same_shape(z, e, "predict_x0");
    const double a = s.sqrt_alpha_bar(t);
    const double b = s.sqrt_one_minus_alpha_bar(t);
    Field out(z.height, z.width, z.channels);
    for (std::size_t i = 0; i < z.size(); ++i) out.data[i] = static_cast<float>((z.data[i] - b * e.data[i]) / a);
    return out;
}

Field ddim_step(const Field& z, const Field& e, int t, int t_prev, const NoiseSchedule& s) {
    require_same_shape(z, e, "ddim_step");
    const Coefficients k = ddim_coefficients(t, t_prev, s);
    Field out(z.height, z.width, z.channels);
    ddim_kernel(z.data.data(), e.data.data(), z.size(), k, out.data.data());
    return out;
}

State ddim_step(const State& z, const State& e, int t, int t_prev, const NoiseSchedule& s) {
    require_same_size(z, e, "ddim_step");
    const Coefficients k = ddim_coefficients(t, t_prev, s);
    State out(z.size());
    ddim_kernel(z.data(), e.data(), z.size(), k, out.data());
    return out;
}

TimestepPlan plan_timesteps(int T, int n_infer) {
    if (T < 1) throw InvalidArgument("plan needs T >= 1");
    if (n_infer < 1 || n_infer > T) {
        throw InvalidArgument("inference steps must lie in [1, " + std::to_string(T) + "]");
    }
    TimestepPlan plan(n_infer);
    if (n_infer == 1) {
        plan[0] = 1;
        return plan;
    }
    // Uniform spacing from T down to 1; rounding keeps the endpoints exact
    // and a spacing >= 1 keeps the sequence strictly decreasing.
    for (int i = 0; i < n_infer; ++i) {
        const double pos = static_cast<double>(T - 1) * (n_infer - 1 - i) / (n_infer - 1);
        plan[i] = 1 + static_cast<int>(std::lround(pos));
    }
    return plan;
}

}  // namespace shadowdiff
