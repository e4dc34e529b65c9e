// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "shadowdiff/degradation.hpp"
#include "shadowdiff/denoiser.hpp"
#include "shadowdiff/nn/layers.hpp"
#include "shadowdiff/nn/optim.hpp"
#include "shadowdiff/scene.hpp"

namespace shadowdiff {

struct EstimatorSpec {
    int channels = 3;
    int width = 16;
};

/// Three dilated 3x3 convolutions (dilation 1, 2, 4) over [y | m_tilde]
/// with a sigmoid head scaled into (floor, 1).
template <typename T>
class EstimatorNet {
public:
    struct Cache {
        nn::Tensor<T> input, pre1, act1, pre2, act2, logit, h;
        std::vector<T> col1, col2, col3;
    };

    explicit EstimatorNet(EstimatorSpec spec) : spec_(spec) {
        if (spec.channels != 1 && spec.channels != 3) throw InvalidArgument("estimator: channels must be 1 or 3");
        if (spec.width < 1) throw InvalidArgument("estimator: width must be positive");
        conv1_ = nn::Conv2d(reg_, "conv1", spec.channels + 1, spec.width, 3, 1);
        conv2_ = nn::Conv2d(reg_, "conv2", spec.width, spec.width, 3, 2);
        conv3_ = nn::Conv2d(reg_, "conv3", spec.width, spec.channels, 3, 4);
    }

    const nn::ParamRegistry& registry() const { return reg_; }
    std::size_t param_count() const { return reg_.total(); }

    void forward(std::span<const T> p, Cache& c) const {
        conv1_.forward(p, c.input, c.pre1, c.col1);
        c.act1.resize(c.pre1.c, c.pre1.h, c.pre1.w);
        nn::silu_forward(c.pre1.v, c.act1.v);
        conv2_.forward(p, c.act1, c.pre2, c.col2);
        c.act2.resize(c.pre2.c, c.pre2.h, c.pre2.w);
        nn::silu_forward(c.pre2.v, c.act2.v);
        conv3_.forward(p, c.act2, c.logit, c.col3);
        c.h.resize(c.logit.c, c.logit.h, c.logit.w);
        const T floor = static_cast<T>(kDegradationFloor);
        for (std::size_t i = 0; i < c.h.size(); ++i) c.h.v[i] = floor + (T(1) - floor) * nn::sigmoid(c.logit.v[i]);
    }

    /// dL/dh -> parameter gradients.
    void backward(std::span<const T> p, const Cache& c, const nn::Tensor<T>& d_h, std::span<T> grads) const {
        const T floor = static_cast<T>(kDegradationFloor);
        nn::Tensor<T> d_logit(c.logit.c, c.logit.h, c.logit.w);
        for (std::size_t i = 0; i < d_logit.size(); ++i) {
            const T s = nn::sigmoid(c.logit.v[i]);
            d_logit.v[i] = d_h.v[i] * (T(1) - floor) * s * (T(1) - s);
        }
        nn::Tensor<T> d2, d1;
        conv3_.backward(p, c.act2, c.col3, d_logit, grads, &d2);
        nn::silu_backward(c.pre2.v, d2.v);
        conv2_.backward(p, c.act1, c.col2, d2, grads, &d1);
        nn::silu_backward(c.pre1.v, d1.v);
        conv1_.backward(p, c.input, c.col1, d1, grads, static_cast<nn::Tensor<T>*>(nullptr));
    }

private:
    EstimatorSpec spec_;
    nn::ParamRegistry reg_;
    nn::Conv2d conv1_, conv2_, conv3_;
};

/// Copies [y | m_tilde] (raw [0,1] values) into CHW.
template <typename T>
void assemble_estimator_input(nn::Tensor<T>& input, const Image& y, const MaskField& m_tilde) {
    require_same_extent(y, m_tilde, "estimator input");
    const int C = y.channels;
    input.resize(C + 1, y.height, y.width);
    const std::size_t n = y.pixel_count();
    for (int c = 0; c < C; ++c) {
        T* d = input.channel(c);
        for (std::size_t p = 0; p < n; ++p) d[p] = static_cast<T>(y.data[p * C + c]);
    }
    T* m = input.channel(C);
    for (std::size_t p = 0; p < n; ++p) m[p] = static_cast<T>(m_tilde.data[p]);
}

struct EstimatorParams {
    EstimatorSpec spec;
    std::vector<float> weights;
    nn::AdamState adam;
    long step = 0;
    KeyValues train_echo;
};

struct EstimatorTrainConfig {
    double lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int batch = 8;
    long steps = 2000;
    float eta = kDefaultEta;
    std::uint64_t seed = 0;

    void validate() const;
    KeyValues to_key_values() const;
    static EstimatorTrainConfig from_key_values(const KeyValues& kv);
};

EstimatorParams init_estimator(const EstimatorSpec& spec, std::uint64_t seed);

/// h = D(y, m_tilde), bounded in (kDegradationFloor, 1].
DegradationMap estimate_h(const EstimatorParams& params, const Image& y, const MaskField& m_tilde);

/// Regresses h_gt = y / (x + eta) with mean squared error. Returns the
/// per-step loss log (l_total holds the MSE).
std::vector<LossRecord> train_estimator(EstimatorParams& params, const std::vector<SceneSample>& dataset,
                                        const EstimatorTrainConfig& cfg);

EstimatorParams train_new_estimator(const std::vector<SceneSample>& dataset, const EstimatorTrainConfig& cfg,
                                    const EstimatorSpec& spec, std::vector<LossRecord>* log = nullptr);

void save_estimator(const EstimatorParams& params, const std::filesystem::path& path);
EstimatorParams load_estimator(const std::filesystem::path& path);

/// Source of the degradation map consumed by the sampler.
class DegradationSource {
public:
    virtual ~DegradationSource() = default;
    virtual DegradationMap estimate(const Image& y, const MaskField& m_tilde) const = 0;
};

class LearnedEstimator final : public DegradationSource {
public:
    explicit LearnedEstimator(const EstimatorParams& params) : params_(params) {}
    DegradationMap estimate(const Image& y, const MaskField& m_tilde) const override {
        return estimate_h(params_, y, m_tilde);
    }

private:
    const EstimatorParams& params_;
};

/// Returns a known map (e.g. the generator's compose_h) regardless of input.
class OracleEstimator final : public DegradationSource {
public:
    explicit OracleEstimator(DegradationMap h) : h_(std::move(h)) {}
    DegradationMap estimate(const Image& y, const MaskField& m_tilde) const override;

private:
    DegradationMap h_;
};

}  // namespace shadowdiff
