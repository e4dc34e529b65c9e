// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "shadowdiff/nn/layers.hpp"

namespace shadowdiff::nn {

struct UNetSpec {
    int channels = 3;     // image channels C
    int base_width = 16;  // widths per level: w, 2w, 4w
    int time_dim = 32;    // sinusoidal embedding size (even)

    int input_channels() const { return 2 * channels + 1; }
    int time_hidden() const { return 4 * base_width; }
};

/// conv3x3 -> (+ timestep bias) -> SiLU -> conv3x3 -> SiLU
struct ConvBlock {
    Conv2d conv_a;
    Linear temb;
    Conv2d conv_b;

    ConvBlock() = default;
    ConvBlock(ParamRegistry& reg, const std::string& name, int in, int out, int time_hidden)
        : conv_a(reg, name + ".conv_a", in, out, 3), temb(reg, name + ".temb", time_hidden, out),
          conv_b(reg, name + ".conv_b", out, out, 3) {}

    template <typename T>
    struct Cache {
        std::vector<T> col_a, col_b, bias;
        Tensor<T> pre_a, act_a, pre_b, out;
    };

    template <typename T>
    void forward(std::span<const T> p, const Tensor<T>& x, const std::vector<T>& t_act, Cache<T>& c) const {
        conv_a.forward(p, x, c.pre_a, c.col_a);
        temb.forward(p, t_act, c.bias);
        add_channel_bias(c.pre_a, c.bias);
        c.act_a.resize(c.pre_a.c, c.pre_a.h, c.pre_a.w);
        silu_forward(c.pre_a.v, c.act_a.v);
        conv_b.forward(p, c.act_a, c.pre_b, c.col_b);
        c.out.resize(c.pre_b.c, c.pre_b.h, c.pre_b.w);
        silu_forward(c.pre_b.v, c.out.v);
    }

    /// `dout` is consumed. Adds the timestep-activation gradient into `d_t_act`.
    template <typename T>
    void backward(std::span<const T> p, const Tensor<T>& x, const std::vector<T>& t_act, const Cache<T>& c,
                  Tensor<T>& dout, std::span<T> grads, std::vector<T>& d_t_act, Tensor<T>* dx) const {
        silu_backward(c.pre_b.v, dout.v);
        Tensor<T> d_act;
        conv_b.backward(p, c.act_a, c.col_b, dout, grads, &d_act);
        silu_backward(c.pre_a.v, d_act.v);
        std::vector<T> dbias, dt;
        channel_bias_backward(d_act, dbias);
        temb.backward(p, t_act, dbias, grads, &dt);
        for (std::size_t i = 0; i < dt.size(); ++i) d_t_act[i] += dt[i];
        conv_a.backward(p, x, c.col_a, d_act, grads, dx);
    }
};

/// Three-level encoder-decoder with skip connections and two heads: a
/// linear noise head (C channels) and a 1x1 + sigmoid mask head.
/// Input channels: [state (C) | condition image (C) | condition mask (1)].
/// Spatial size must be divisible by 4.
template <typename T>
class UNet {
public:
    struct Cache {
        Tensor<T> input;
        std::vector<T> t_emb, t_pre, t_act;
        ConvBlock::Cache<T> enc1, enc2, mid, dec2, dec1;
        Tensor<T> pool1, pool2, up2, cat2, up1, cat1;
        std::vector<T> col_noise, col_mask;
        Tensor<T> noise, mask_logit, mask;
    };

    explicit UNet(UNetSpec spec) : spec_(spec) {
        if (spec.channels != 1 && spec.channels != 3) throw InvalidArgument("unet: channels must be 1 or 3");
        if (spec.base_width < 1) throw InvalidArgument("unet: base width must be positive");
        if (spec.time_dim < 2 || spec.time_dim % 2) throw InvalidArgument("unet: time_dim must be even");
        const int w = spec.base_width, th = spec.time_hidden();
        time_fc_ = Linear(reg_, "time.fc", spec.time_dim, th);
        enc1_ = ConvBlock(reg_, "enc1", spec.input_channels(), w, th);
        enc2_ = ConvBlock(reg_, "enc2", w, 2 * w, th);
        mid_ = ConvBlock(reg_, "mid", 2 * w, 4 * w, th);
        dec2_ = ConvBlock(reg_, "dec2", 4 * w + 2 * w, 2 * w, th);
        dec1_ = ConvBlock(reg_, "dec1", 2 * w + w, w, th);
        noise_head_ = Conv2d(reg_, "noise_head", w, spec.channels, 1);
        mask_head_ = Conv2d(reg_, "mask_head", w, 1, 1);
    }

    const UNetSpec& spec() const { return spec_; }
    const ParamRegistry& registry() const { return reg_; }
    std::size_t param_count() const { return reg_.total(); }

    void forward(std::span<const T> p, int t, Cache& c) const {
        const Tensor<T>& x = c.input;
        if (x.c != spec_.input_channels()) throw InvalidArgument("unet: wrong input channel count");
        if (x.h % 4 || x.w % 4) throw InvalidArgument("unet: spatial size must be divisible by 4");
        c.t_emb = timestep_embedding<T>(t, spec_.time_dim);
        time_fc_.forward(p, c.t_emb, c.t_pre);
        silu_forward(c.t_pre, c.t_act);

        enc1_.forward(p, x, c.t_act, c.enc1);
        avgpool2_forward(c.enc1.out, c.pool1);
        enc2_.forward(p, c.pool1, c.t_act, c.enc2);
        avgpool2_forward(c.enc2.out, c.pool2);
        mid_.forward(p, c.pool2, c.t_act, c.mid);
        upsample2_forward(c.mid.out, c.up2);
        concat_forward(c.up2, c.enc2.out, c.cat2);
        dec2_.forward(p, c.cat2, c.t_act, c.dec2);
        upsample2_forward(c.dec2.out, c.up1);
        concat_forward(c.up1, c.enc1.out, c.cat1);
        dec1_.forward(p, c.cat1, c.t_act, c.dec1);

        noise_head_.forward(p, c.dec1.out, c.noise, c.col_noise);
        mask_head_.forward(p, c.dec1.out, c.mask_logit, c.col_mask);
        c.mask.resize(1, x.h, x.w);
        for (std::size_t i = 0; i < c.mask.size(); ++i) c.mask.v[i] = sigmoid(c.mask_logit.v[i]);
    }

    /// Accumulates dL/dparams given dL/d(noise) and dL/d(mask) (post-sigmoid).
    void backward(std::span<const T> p, const Cache& c, const Tensor<T>& d_noise, const Tensor<T>& d_mask,
                  std::span<T> grads) const {
        Tensor<T> d_logit(1, c.mask.h, c.mask.w);
        for (std::size_t i = 0; i < d_logit.size(); ++i) {
            const T m = c.mask.v[i];
            d_logit.v[i] = d_mask.v[i] * m * (T(1) - m);
        }
        Tensor<T> d_feat, d_feat_mask;
        noise_head_.backward(p, c.dec1.out, c.col_noise, d_noise, grads, &d_feat);
        mask_head_.backward(p, c.dec1.out, c.col_mask, d_logit, grads, &d_feat_mask);
        for (std::size_t i = 0; i < d_feat.size(); ++i) d_feat.v[i] += d_feat_mask.v[i];

        std::vector<T> d_t_act(c.t_act.size(), T(0));
        const int w = spec_.base_width;

        Tensor<T> d_cat1, d_up1, d_skip1, d_dec2_out;
        dec1_.backward(p, c.cat1, c.t_act, c.dec1, d_feat, grads, d_t_act, &d_cat1);
        concat_backward(d_cat1, 2 * w, d_up1, d_skip1);
        upsample2_backward(d_up1, d_dec2_out);

        Tensor<T> d_cat2, d_up2, d_skip2, d_mid_out;
        dec2_.backward(p, c.cat2, c.t_act, c.dec2, d_dec2_out, grads, d_t_act, &d_cat2);
        concat_backward(d_cat2, 4 * w, d_up2, d_skip2);
        upsample2_backward(d_up2, d_mid_out);

        Tensor<T> d_pool2;
        mid_.backward(p, c.pool2, c.t_act, c.mid, d_mid_out, grads, d_t_act, &d_pool2);
        Tensor<T> d_enc2_out;
        avgpool2_backward(d_pool2, d_enc2_out);
        for (std::size_t i = 0; i < d_enc2_out.size(); ++i) d_enc2_out.v[i] += d_skip2.v[i];

        Tensor<T> d_pool1;
        enc2_.backward(p, c.pool1, c.t_act, c.enc2, d_enc2_out, grads, d_t_act, &d_pool1);
        Tensor<T> d_enc1_out;
        avgpool2_backward(d_pool1, d_enc1_out);
        for (std::size_t i = 0; i < d_enc1_out.size(); ++i) d_enc1_out.v[i] += d_skip1.v[i];

        enc1_.backward(p, c.input, c.t_act, c.enc1, d_enc1_out, grads, d_t_act, static_cast<Tensor<T>*>(nullptr));

        silu_backward(c.t_pre, d_t_act);
        time_fc_.backward(p, c.t_emb, d_t_act, grads, static_cast<std::vector<T>*>(nullptr));
    }

private:
    UNetSpec spec_;
    ParamRegistry reg_;
    Linear time_fc_;
    ConvBlock enc1_, enc2_, mid_, dec2_, dec1_;
    Conv2d noise_head_, mask_head_;
};

}  // namespace shadowdiff::nn
