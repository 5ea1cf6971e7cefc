/*
 * Copyright 2026 ParticleAugment Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "particleaugment/dataset.hpp"
#include "particleaugment/errors.hpp"
#include "particleaugment/image.hpp"
#include "particleaugment/rng.hpp"

namespace pa {

/// Per-sample image hook applied before the forward pass during training.
/// An empty function means no augmentation.
using Augmenter = std::function<Image(const Image&)>;

struct OptimizerConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    bool nesterov = true;
    double weight_decay = 5e-4;
    int batch_size = 128;
    /// Horizon T of the cosine schedule, in epochs.
    long schedule_epochs = 1;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("optimizer.lr: must be positive");
        if (momentum < 0.0 || momentum >= 1.0)
            throw ConfigError("optimizer.momentum: must be in [0, 1)");
        if (weight_decay < 0.0) throw ConfigError("optimizer.weight_decay: must be >= 0");
        if (batch_size < 1) throw ConfigError("optimizer.batch_size: must be >= 1");
        if (schedule_epochs < 1) throw ConfigError("optimizer.schedule_epochs: must be >= 1");
    }
};

/// Annealing cosine decay: lr(t) = lr0 * 0.5 * (1 + cos(pi * t / T)),
/// clamped to the final value past the horizon.
inline double cosine_lr(const OptimizerConfig& config, double t) {
    const double T = static_cast<double>(config.schedule_epochs);
    const double clamped = std::clamp(t, 0.0, T);
    return config.learning_rate * 0.5 *
           (1.0 + std::cos(3.14159265358979323846 * clamped / T));
}

/// Numerically stable softmax; outputs are positive and sum to 1.
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    std::vector<double> p(logits.begin(), logits.end());
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto& v : p) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

/// Stable -log softmax(logits)[true class] for a one-hot label.
inline double cross_entropy(std::span<const double> logits, std::span<const double> one_hot) {
    if (logits.size() != one_hot.size() || logits.empty())
        throw std::invalid_argument("cross_entropy: logits and label sizes differ");
    std::size_t true_class = 0;
    for (std::size_t c = 0; c < one_hot.size(); ++c)
        if (one_hot[c] > one_hot[true_class]) true_class = c;

    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - m);
    return m + std::log(sum) - logits[true_class];
}

struct ModelConfig {
    int input_height = 16;
    int input_width = 16;
    int class_count = 4;
    int hidden_units = 32;
    bool use_conv = false;
    int conv_channels = 8;

    void validate() const {
        if (input_height < 1 || input_width < 1)
            throw ConfigError("model.input: dimensions must be positive");
        if (class_count < 2) throw ConfigError("model.classes: must be >= 2");
        if (hidden_units < 1) throw ConfigError("model.hidden: must be >= 1");
        if (use_conv && (input_height < 2 || input_width < 2))
            throw ConfigError("model.conv: needs at least 2x2 inputs");
        if (use_conv && conv_channels < 1)
            throw ConfigError("model.conv_channels: must be >= 1");
    }

    bool operator==(const ModelConfig&) const = default;
};

/**
 * Abstract classifier handle used by the policy-search pipeline: it only
 * needs cloning, training, and loss evaluation, so the search is
 * independent of the concrete architecture.
 */
class TrainableModel {
public:
    virtual ~TrainableModel() = default;

    /// Independent deep copy, optimizer state included; training the copy
    /// must never perturb the original.
    virtual std::unique_ptr<TrainableModel> clone() const = 0;

    virtual int class_count() const = 0;
    virtual std::vector<double> logits(const Image& img) const = 0;

    virtual void train_epochs(const Dataset& ds, const Augmenter& augmenter, int epochs,
                              const OptimizerConfig& config, Rng& rng) = 0;

    /// Sum of per-sample cross-entropy losses.
    virtual double loss_sum(std::span<const LabeledSample> samples) const = 0;

    int predict_class(const Image& img) const {
        const auto l = logits(img);
        return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
    }
};

/**
 * Flatten -> dense(hidden) -> ReLU -> dense(C) classifier over [0,1]
 * normalized pixels, optionally preceded by a 3x3 same-pad convolution
 * with ReLU and 2x2 max pooling. All parameters are 64-bit floats in one
 * flat vector; the momentum buffer and the schedule position travel with
 * the model so a clone continues training exactly where the original
 * stood.
 */
class BuiltinClassifier final : public TrainableModel {
public:
    BuiltinClassifier(const ModelConfig& config, Rng& init_rng) : config_(config) {
        config_.validate();
        feature_count_ = config_.use_conv
                             ? config_.conv_channels * pooled_h() * pooled_w()
                             : 3 * config_.input_height * config_.input_width;
        if (config_.use_conv) {
            conv_w_off_ = 0;
            conv_b_off_ = conv_w_off_ + config_.conv_channels * 27;
            w1_off_ = conv_b_off_ + config_.conv_channels;
        } else {
            w1_off_ = 0;
        }
        b1_off_ = w1_off_ + config_.hidden_units * feature_count_;
        w2_off_ = b1_off_ + config_.hidden_units;
        b2_off_ = w2_off_ + config_.class_count * config_.hidden_units;
        params_.assign(static_cast<std::size_t>(b2_off_ + config_.class_count), 0.0);
        momentum_.assign(params_.size(), 0.0);

        if (config_.use_conv)
            xavier_init(init_rng, conv_w_off_, config_.conv_channels * 27, 27,
                        9 * config_.conv_channels);
        xavier_init(init_rng, w1_off_, config_.hidden_units * feature_count_, feature_count_,
                    config_.hidden_units);
        xavier_init(init_rng, w2_off_, config_.class_count * config_.hidden_units,
                    config_.hidden_units, config_.class_count);
    }

    std::unique_ptr<TrainableModel> clone() const override {
        return std::make_unique<BuiltinClassifier>(*this);
    }

    int class_count() const override { return config_.class_count; }
    const ModelConfig& config() const { return config_; }

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& momentum_buffer() { return momentum_; }
    const std::vector<double>& momentum_buffer() const { return momentum_; }
    long epochs_trained() const { return epochs_trained_; }
    void set_epochs_trained(long epochs) { epochs_trained_ = epochs; }
    /// Offset of the final dense layer inside parameters().
    std::size_t output_layer_offset() const { return static_cast<std::size_t>(w2_off_); }

    std::vector<double> logits(const Image& img) const override {
        Workspace ws;
        forward(img, ws);
        return ws.logits;
    }

    double loss_sum(std::span<const LabeledSample> samples) const override {
        if (samples.empty()) throw std::invalid_argument("loss_sum: no samples");
        double sum = 0.0;
        Workspace ws;
        for (const auto& s : samples) {
            forward(s.image, ws);
            sum += cross_entropy(ws.logits, s.one_hot(config_.class_count));
        }
        return sum;
    }

    double mean_loss(std::span<const LabeledSample> samples) const {
        return loss_sum(samples) / static_cast<double>(samples.size());
    }

    /// Mean-loss gradient over a batch, same layout as parameters().
    std::vector<double> backward(std::span<const LabeledSample> batch) const {
        if (batch.empty()) throw std::invalid_argument("backward: empty batch");
        std::vector<double> grad(params_.size(), 0.0);
        Workspace ws;
        for (const auto& s : batch) accumulate_gradient(s, ws, grad);
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (auto& g : grad) g *= inv;
        return grad;
    }

    void train_epochs(const Dataset& ds, const Augmenter& augmenter, int epochs,
                      const OptimizerConfig& config, Rng& rng) override;

    friend void sgd_step(BuiltinClassifier& model, const std::vector<double>& grad,
                         const OptimizerConfig& config, double t);

private:
    struct Workspace {
        std::vector<double> input;      // normalized pixels
        std::vector<double> conv_pre;   // pre-ReLU conv activations
        std::vector<double> features;   // flattened dense input
        std::vector<double> hidden_pre;
        std::vector<double> hidden;
        std::vector<double> logits;
    };

    int pooled_h() const { return config_.input_height / 2; }
    int pooled_w() const { return config_.input_width / 2; }

    void xavier_init(Rng& rng, long offset, long count, long fan_in, long fan_out) {
        const double limit =
            std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
        for (long i = 0; i < count; ++i)
            params_[static_cast<std::size_t>(offset + i)] = rng.uniform(-limit, limit);
    }

    void check_shape(const Image& img) const {
        if (img.height != config_.input_height || img.width != config_.input_width)
            throw ConfigError("image is " + std::to_string(img.height) + "x" +
                              std::to_string(img.width) + ", model expects " +
                              std::to_string(config_.input_height) + "x" +
                              std::to_string(config_.input_width));
    }

    void forward(const Image& img, Workspace& ws) const {
        check_shape(img);
        const int h = config_.input_height, w = config_.input_width;
        ws.input.resize(static_cast<std::size_t>(3 * h * w));
        // channel-major normalized input: input[c][y][x]
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    ws.input[static_cast<std::size_t>((c * h + y) * w + x)] =
                        img.at(y, x, c) / 255.0;

        if (config_.use_conv) {
            conv_forward(ws);
        } else {
            ws.features = ws.input;
        }

        const long hidden = config_.hidden_units;
        const long feat = feature_count_;
        ws.hidden_pre.assign(static_cast<std::size_t>(hidden), 0.0);
        for (long j = 0; j < hidden; ++j) {
            const double* row = params_.data() + w1_off_ + j * feat;
            double acc = params_[static_cast<std::size_t>(b1_off_ + j)];
            for (long k = 0; k < feat; ++k) acc += row[k] * ws.features[static_cast<std::size_t>(k)];
            ws.hidden_pre[static_cast<std::size_t>(j)] = acc;
        }
        ws.hidden.resize(static_cast<std::size_t>(hidden));
        for (long j = 0; j < hidden; ++j)
            ws.hidden[static_cast<std::size_t>(j)] =
                std::max(0.0, ws.hidden_pre[static_cast<std::size_t>(j)]);

        const long classes = config_.class_count;
        ws.logits.assign(static_cast<std::size_t>(classes), 0.0);
        for (long c = 0; c < classes; ++c) {
            const double* row = params_.data() + w2_off_ + c * hidden;
            double acc = params_[static_cast<std::size_t>(b2_off_ + c)];
            for (long j = 0; j < hidden; ++j) acc += row[j] * ws.hidden[static_cast<std::size_t>(j)];
            ws.logits[static_cast<std::size_t>(c)] = acc;
        }
    }

    void conv_forward(Workspace& ws) const {
        const int h = config_.input_height, w = config_.input_width;
        const int oc_count = config_.conv_channels;
        ws.conv_pre.assign(static_cast<std::size_t>(oc_count * h * w), 0.0);
        for (int oc = 0; oc < oc_count; ++oc) {
            const double* kernel = params_.data() + conv_w_off_ + oc * 27;
            const double bias = params_[static_cast<std::size_t>(conv_b_off_ + oc)];
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double acc = bias;
                    for (int ic = 0; ic < 3; ++ic)
                        for (int ky = 0; ky < 3; ++ky) {
                            const int sy = y + ky - 1;
                            if (sy < 0 || sy >= h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sx = x + kx - 1;
                                if (sx < 0 || sx >= w) continue;
                                acc += kernel[(ic * 3 + ky) * 3 + kx] *
                                       ws.input[static_cast<std::size_t>((ic * h + sy) * w + sx)];
                            }
                        }
                    ws.conv_pre[static_cast<std::size_t>((oc * h + y) * w + x)] = acc;
                }
        }
        // ReLU then 2x2 max pool with stride 2 (odd trailing row/column dropped)
        const int ph = pooled_h(), pw = pooled_w();
        ws.features.assign(static_cast<std::size_t>(oc_count * ph * pw), 0.0);
        for (int oc = 0; oc < oc_count; ++oc)
            for (int py = 0; py < ph; ++py)
                for (int px = 0; px < pw; ++px) {
                    double best = 0.0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const double v = std::max(
                                0.0, ws.conv_pre[static_cast<std::size_t>(
                                         (oc * h + 2 * py + dy) * w + 2 * px + dx)]);
                            best = std::max(best, v);
                        }
                    ws.features[static_cast<std::size_t>((oc * ph + py) * pw + px)] = best;
                }
    }

    void accumulate_gradient(const LabeledSample& sample, Workspace& ws,
                             std::vector<double>& grad) const {
        if (sample.label < 0 || sample.label >= config_.class_count)
            throw ConfigError("sample label " + std::to_string(sample.label) +
                              " outside [0, " + std::to_string(config_.class_count) + ")");
        forward(sample.image, ws);
        const long classes = config_.class_count;
        const long hidden = config_.hidden_units;
        const long feat = feature_count_;

        // d loss / d logits = softmax(logits) - one_hot
        std::vector<double> dlogits = softmax(ws.logits);
        dlogits[static_cast<std::size_t>(sample.label)] -= 1.0;

        std::vector<double> dhidden(static_cast<std::size_t>(hidden), 0.0);
        for (long c = 0; c < classes; ++c) {
            const double dc = dlogits[static_cast<std::size_t>(c)];
            grad[static_cast<std::size_t>(b2_off_ + c)] += dc;
            double* gw2 = grad.data() + w2_off_ + c * hidden;
            const double* w2 = params_.data() + w2_off_ + c * hidden;
            for (long j = 0; j < hidden; ++j) {
                gw2[j] += dc * ws.hidden[static_cast<std::size_t>(j)];
                dhidden[static_cast<std::size_t>(j)] += dc * w2[j];
            }
        }
        for (long j = 0; j < hidden; ++j)
            if (ws.hidden_pre[static_cast<std::size_t>(j)] <= 0.0)
                dhidden[static_cast<std::size_t>(j)] = 0.0;

        std::vector<double> dfeatures;
        if (config_.use_conv) dfeatures.assign(static_cast<std::size_t>(feat), 0.0);
        for (long j = 0; j < hidden; ++j) {
            const double dj = dhidden[static_cast<std::size_t>(j)];
            if (dj == 0.0) continue;
            grad[static_cast<std::size_t>(b1_off_ + j)] += dj;
            double* gw1 = grad.data() + w1_off_ + j * feat;
            const double* w1 = params_.data() + w1_off_ + j * feat;
            for (long k = 0; k < feat; ++k) {
                gw1[k] += dj * ws.features[static_cast<std::size_t>(k)];
                if (config_.use_conv) dfeatures[static_cast<std::size_t>(k)] += dj * w1[k];
            }
        }
        if (config_.use_conv) conv_backward(ws, dfeatures, grad);
    }

    void conv_backward(const Workspace& ws, const std::vector<double>& dfeatures,
                       std::vector<double>& grad) const {
        const int h = config_.input_height, w = config_.input_width;
        const int ph = pooled_h(), pw = pooled_w();
        for (int oc = 0; oc < config_.conv_channels; ++oc) {
            double* gkernel = grad.data() + conv_w_off_ + oc * 27;
            for (int py = 0; py < ph; ++py)
                for (int px = 0; px < pw; ++px) {
                    const double df =
                        dfeatures[static_cast<std::size_t>((oc * ph + py) * pw + px)];
                    if (df == 0.0) continue;
                    // route through the first arg max of the pooling window;
                    // a window whose max is the ReLU zero passes no gradient
                    int best_y = -1, best_x = -1;
                    double best = 0.0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int y = 2 * py + dy, x = 2 * px + dx;
                            const double v = std::max(
                                0.0,
                                ws.conv_pre[static_cast<std::size_t>((oc * h + y) * w + x)]);
                            if (v > best) {
                                best = v;
                                best_y = y;
                                best_x = x;
                            }
                        }
                    if (best_y < 0) continue;
                    grad[static_cast<std::size_t>(conv_b_off_ + oc)] += df;
                    for (int ic = 0; ic < 3; ++ic)
                        for (int ky = 0; ky < 3; ++ky) {
                            const int sy = best_y + ky - 1;
                            if (sy < 0 || sy >= h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sx = best_x + kx - 1;
                                if (sx < 0 || sx >= w) continue;
                                gkernel[(ic * 3 + ky) * 3 + kx] +=
                                    df *
                                    ws.input[static_cast<std::size_t>((ic * h + sy) * w + sx)];
                            }
                        }
                }
        }
    }

    ModelConfig config_;
    long feature_count_ = 0;
    long conv_w_off_ = 0, conv_b_off_ = 0, w1_off_ = 0, b1_off_ = 0, w2_off_ = 0, b2_off_ = 0;
    std::vector<double> params_;
    std::vector<double> momentum_;
    long epochs_trained_ = 0;
};

/**
 * One Nesterov SGD update at schedule position t (in epochs): the weight
 * decay joins the gradient as an L2 term, the momentum buffer is
 * v <- mu v + g, and the applied direction is g + mu v.
 */
inline void sgd_step(BuiltinClassifier& model, const std::vector<double>& grad,
                     const OptimizerConfig& config, double t) {
    if (grad.size() != model.params_.size())
        throw std::invalid_argument("sgd_step: gradient shape mismatch");
    config.validate();
    const double lr = cosine_lr(config, t);
    const double mu = config.momentum;
    for (std::size_t i = 0; i < model.params_.size(); ++i) {
        double g = grad[i] + config.weight_decay * model.params_[i];
        double& v = model.momentum_[i];
        v = mu * v + g;
        if (config.nesterov) g += mu * v;
        else g = v;
        model.params_[i] -= lr * g;
    }
}

inline void BuiltinClassifier::train_epochs(const Dataset& ds, const Augmenter& augmenter,
                                            int epochs, const OptimizerConfig& config,
                                            Rng& rng) {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    config.validate();
    ds.validate();
    if (ds.class_count > config_.class_count)
        throw ConfigError("dataset has more classes than the model");

    std::vector<std::size_t> order(ds.size());
    std::vector<LabeledSample> batch;
    for (int e = 0; e < epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order.begin(), order.end());
        const double t = static_cast<double>(epochs_trained_);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const auto& src = ds.samples[order[i]];
                batch.push_back(
                    {augmenter ? augmenter(src.image) : src.image, src.label});
            }
            const auto grad = backward(batch);
            sgd_step(*this, grad, config, t);
        }
        ++epochs_trained_;
    }
}

/// Fraction of samples whose arg max logit equals the label.
inline double accuracy(const TrainableModel& model, const Dataset& ds) {
    ds.validate();
    std::size_t hits = 0;
    for (const auto& s : ds.samples)
        if (model.predict_class(s.image) == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace pa
