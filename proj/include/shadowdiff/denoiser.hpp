// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shadowdiff/config.hpp"
#include "shadowdiff/field.hpp"
#include "shadowdiff/nn/optim.hpp"
#include "shadowdiff/nn/unet.hpp"
#include "shadowdiff/scene.hpp"
#include "shadowdiff/schedule.hpp"

namespace shadowdiff {

/// Noise prediction e (same shape as the state) and refined mask m in (0,1).
struct DenoiserOutput {
    Field e;
    MaskField m;
};

/// Anything that maps (state, condition image, condition mask, t) to a
/// noise estimate and a refined mask. The trained network is one; tests
/// plug in exact oracles.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual DenoiserOutput predict(const Field& state, const Image& y, const MaskField& mask, int t) const = 0;
};

inline constexpr double kReferenceLearningRate = 3e-5;
inline constexpr double kDefaultEmaDecay = 0.9999;
inline constexpr double kDefaultMaskWeight = 0.5;

enum class MaskTarget {
    kResidual,      // binarized x - y residual (the training rule)
    kConstruction,  // the generator's mask m
};

struct TrainConfig {
    double lr = 1e-3;  // desk-scale override of kReferenceLearningRate
    double beta1 = 0.9;
    double beta2 = 0.999;
    int batch = 8;
    long steps = 3000;
    double lambda = kDefaultMaskWeight;
    double ema_decay = kDefaultEmaDecay;
    MaskTarget mask_target = MaskTarget::kResidual;
    std::uint64_t seed = 0;

    void validate() const;
    KeyValues to_key_values() const;
    static TrainConfig from_key_values(const KeyValues& kv);
};

struct LossRecord {
    long step = 0;
    double l_diff = 0.0;
    double l_mask = 0.0;
    double l_total = 0.0;
};

/// Trainable weights of the reference network plus their EMA copy.
struct DenoiserParams {
    nn::UNetSpec spec;
    int timesteps = kDefaultTimesteps;
    std::vector<float> weights;
    std::vector<float> ema;
    nn::AdamState adam;
    long step = 0;
    /// Echo of the most recent training configuration (e.g. lambda).
    KeyValues train_echo;
};

/// Reference desk-scale architecture for the given channel count and width.
nn::UNetSpec reference_architecture(int channels, int base_width);

/// Human-readable listing of every parameter tensor and the total count.
std::string describe_architecture(const nn::UNetSpec& spec);

/// Fresh Kaiming-initialized parameters; the EMA copy starts equal to them.
DenoiserParams init_denoiser(const nn::UNetSpec& spec, std::uint64_t seed, int timesteps = kDefaultTimesteps);

enum class WeightSet { kLive, kEma };

/// One forward pass. `x_t` is a state in [-1,1] units with the image's
/// channel count; `y` and `m_cond` are the conditions.
DenoiserOutput denoise(const DenoiserParams& params, const Field& x_t, const Image& y, const MaskField& m_cond,
                       int t, WeightSet which = WeightSet::kEma);

class DenoiserPredictor final : public NoisePredictor {
public:
    explicit DenoiserPredictor(const DenoiserParams& params, WeightSet which = WeightSet::kEma)
        : params_(params), which_(which) {}
    DenoiserOutput predict(const Field& state, const Image& y, const MaskField& mask, int t) const override {
        return denoise(params_, state, y, mask, t, which_);
    }

private:
    const DenoiserParams& params_;
    WeightSet which_;
};

template <typename T>
struct LossTerms {
    T diff = 0;
    T mask = 0;
    T total = 0;
};

/// L = mean((e - eps)^2) + lambda * mean((m - m_gt)^2). Writes dL/de and
/// dL/dm when the output spans are non-empty.
template <typename T>
LossTerms<T> loss_total(std::span<const T> e, std::span<const T> eps, std::span<const T> m, std::span<const T> m_gt,
                        double lambda, std::span<T> d_e = {}, std::span<T> d_m = {}) {
    if (e.size() != eps.size() || m.size() != m_gt.size()) throw InvalidArgument("loss_total: shape mismatch");
    if (!(lambda >= 0.0)) throw InvalidArgument("loss_total: lambda must be non-negative");
    LossTerms<T> out;
    const T ne = static_cast<T>(e.size()), nm = static_cast<T>(m.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        const T r = e[i] - eps[i];
        out.diff += r * r;
        if (!d_e.empty()) d_e[i] = T(2) * r / ne;
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        const T r = m[i] - m_gt[i];
        out.mask += r * r;
        if (!d_m.empty()) d_m[i] = T(2) * static_cast<T>(lambda) * r / nm;
    }
    out.diff /= ne;
    out.mask /= nm;
    out.total = out.diff + static_cast<T>(lambda) * out.mask;
    return out;
}

/// Copies HWC fields into the network's CHW input [state | 2y-1 | 2m-1].
template <typename T>
void assemble_input(nn::Tensor<T>& input, const Field& state, const Image& y, const MaskField& mask) {
    require_same_shape(state, y, "denoiser state/condition");
    require_same_extent(state, mask, "denoiser mask");
    const int C = state.channels, H = state.height, W = state.width;
    input.resize(2 * C + 1, H, W);
    const std::size_t n = state.pixel_count();
    for (int c = 0; c < C; ++c) {
        T* s = input.channel(c);
        T* yc = input.channel(C + c);
        for (std::size_t p = 0; p < n; ++p) {
            s[p] = static_cast<T>(state.data[p * C + c]);
            yc[p] = static_cast<T>(2.0f * y.data[p * C + c] - 1.0f);
        }
    }
    T* mc = input.channel(2 * C);
    for (std::size_t p = 0; p < n; ++p) mc[p] = static_cast<T>(2.0f * mask.data[p] - 1.0f);
}

/// Forward + loss + reverse pass for one sample. `cache.input` must be
/// assembled. Parameter gradients scaled by `scale` are added to `grads`.
template <typename T>
LossTerms<T> accumulate_gradient(const nn::UNet<T>& net, std::span<const T> params, typename nn::UNet<T>::Cache& cache,
                                 int t, std::span<const T> eps_chw, std::span<const T> m_gt, double lambda,
                                 std::span<T> grads, T scale = T(1)) {
    net.forward(params, t, cache);
    nn::Tensor<T> d_e(cache.noise.c, cache.noise.h, cache.noise.w);
    nn::Tensor<T> d_m(1, cache.mask.h, cache.mask.w);
    const auto terms = loss_total<T>(cache.noise.v, eps_chw, cache.mask.v, m_gt, lambda, d_e.v, d_m.v);
    if (scale != T(1)) {
        for (auto& v : d_e.v) v *= scale;
        for (auto& v : d_m.v) v *= scale;
    }
    net.backward(params, cache, d_e, d_m, grads);
    return terms;
}

/// Runs `cfg.steps` steps of the mask-aware diffusion training loop on
/// `params`, continuing its step counter. Throws NumericalError on a
/// non-finite loss or gradient.
std::vector<LossRecord> train(DenoiserParams& params, const std::vector<SceneSample>& dataset,
                              const TrainConfig& cfg, const NoiseSchedule& schedule,
                              const std::function<void(const LossRecord&)>& on_step = {});

/// Convenience: fresh initialization (seeded from cfg.seed) then train.
DenoiserParams train_denoiser(const std::vector<SceneSample>& dataset, const TrainConfig& cfg,
                              const nn::UNetSpec& spec, const NoiseSchedule& schedule,
                              std::vector<LossRecord>* log = nullptr);

void save_denoiser(const DenoiserParams& params, const std::filesystem::path& path);
DenoiserParams load_denoiser(const std::filesystem::path& path);

/// CSV with header "step,l_diff,l_mask,l_total".
std::string loss_log_csv(const std::vector<LossRecord>& log);

}  // namespace shadowdiff
