#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tal/losses.hpp"
#include "tal/model.hpp"
#include "tal/synth.hpp"
#include "tal/tape.hpp"
#include "tal/targets.hpp"

namespace tal {

struct TrainConfig {
    int steps = 200;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double grad_clip_norm = 1.0;
    double ema_decay = 0.999;
    int batch_size = 2;
    std::uint64_t seed = 1;
    FocalConfig focal;
    AssignConfig assign;

    void validate() const {
        if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
        if (lr < 0.0) throw std::invalid_argument("TrainConfig: lr must be >= 0");
        if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
        if (!(ema_decay >= 0.0 && ema_decay < 1.0)) {
            throw std::invalid_argument("TrainConfig: ema_decay must be in [0, 1)");
        }
        if (!(grad_clip_norm > 0.0)) {
            throw std::invalid_argument("TrainConfig: grad_clip_norm must be > 0");
        }
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    }
};

template <class Params>
inline auto tensor_refs(Params& p) {
    std::vector<std::pair<std::string, decltype(&p.e1.conv.w)>> refs;
    for_each_tensor(p, [&refs](const std::string& name, auto& v) {
        refs.emplace_back(name, &v);
    });
    return refs;
}

inline double grad_global_norm(const ModelParams& grads) {
    double sq = 0.0;
    for_each_tensor(const_cast<ModelParams&>(grads),
                    [&sq](const std::string&, const std::vector<double>& v) {
                        for (double g : v) sq += g * g;
                    });
    return std::sqrt(sq);
}

// Global L2 clipping: scales by max_norm / norm when the norm exceeds
// max_norm. Returns the pre-clip norm.
inline double clip_grad_norm(ModelParams& grads, double max_norm) {
    const double norm = grad_global_norm(grads);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for_each_tensor(grads, [scale](const std::string&, std::vector<double>& v) {
            for (double& g : v) g *= scale;
        });
    }
    return norm;
}

struct AdamState {
    ModelParams m, v;
    long step = 0;
};

inline AdamState make_adam_state(const ModelParams& params) {
    return AdamState{zeros_like(params), zeros_like(params), 0};
}

// Decoupled-weight-decay Adam with bias-corrected moments.
inline void adamw_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                       const TrainConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    constexpr double eps = 1e-8;

    auto ps = tensor_refs(params);
    auto gs = tensor_refs(const_cast<ModelParams&>(grads));
    auto ms = tensor_refs(state.m);
    auto vs = tensor_refs(state.v);
    for (std::size_t k = 0; k < ps.size(); ++k) {
        std::vector<double>& p = *ps[k].second;
        const std::vector<double>& g = *gs[k].second;
        std::vector<double>& m = *ms[k].second;
        std::vector<double>& v = *vs[k].second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw std::runtime_error("adamw_step: non-finite gradient in parameter group '" +
                                         ps[k].first + "'");
            }
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            const double p0 = p[i];
            p[i] = p0 - cfg.lr * m_hat / (std::sqrt(v_hat) + eps) -
                   cfg.lr * cfg.weight_decay * p0;
        }
    }
}

// ema <- decay * ema + (1 - decay) * params
inline void ema_update(ModelParams& ema, const ModelParams& params, double decay) {
    auto es = tensor_refs(ema);
    auto ps = tensor_refs(const_cast<ModelParams&>(params));
    for (std::size_t k = 0; k < es.size(); ++k) {
        std::vector<double>& e = *es[k].second;
        const std::vector<double>& p = *ps[k].second;
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] = decay * e[i] + (1.0 - decay) * p[i];
        }
    }
}

inline std::vector<int> pyramid_lengths(int T, int num_levels) {
    std::vector<int> out{T};
    for (int l = 1; l < num_levels; ++l) out.push_back(ceil_div(out.back(), 2));
    return out;
}

struct TrainResult {
    ModelParams params;  // raw weights after the last step
    ModelParams ema;     // evaluation weights
    std::vector<double> loss_history;
};

namespace detail {

inline SeqTensor pad_to(const SeqTensor& x, int len) {
    if (x.len() == len) return x;
    SeqTensor padded(len, x.channels(), 0.0);
    for (int t = 0; t < x.len(); ++t) {
        const double* src = x.row(t);
        double* dst = padded.row(t);
        for (int c = 0; c < x.channels(); ++c) dst[c] = src[c];
    }
    return padded;
}

template <class RngT>
inline void shuffle_order(std::vector<int>& order, RngT& rng) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
        std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
}

} // namespace detail

// Fixed-step loop: forward -> loss -> backward -> clip -> adamw -> ema.
// Videos are shuffled per epoch; shorter videos in a batch are zero-padded to
// the batch maximum and masked so padded moments never touch the loss or the
// gradients.
inline TrainResult train(const std::vector<VideoSample>& dataset, const ModelConfig& mcfg,
                         const TrainConfig& tcfg) {
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    mcfg.validate();
    tcfg.validate();
    for (const VideoSample& v : dataset) {
        for (const ActionInstance& a : v.instances) {
            validate_instance(a, v.features.len(), mcfg.num_classes);
        }
    }

    ModelParams params = init_params(mcfg, tcfg.seed);
    ModelParams ema = params;
    AdamState state = make_adam_state(params);
    Rng shuffle_rng(tcfg.seed * 0x9e3779b97f4a7c15ull + 0x51ed270b8a03u);

    // assignment depends only on the (unpadded) video length
    std::vector<TargetAssignment> assignments;
    assignments.reserve(dataset.size());
    for (const VideoSample& v : dataset) {
        assignments.push_back(assign_targets(
            v.instances, pyramid_lengths(v.features.len(), mcfg.num_levels), tcfg.assign));
    }

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    TrainResult result;
    result.loss_history.reserve(tcfg.steps);
    for (int step = 0; step < tcfg.steps; ++step) {
        std::vector<int> batch;
        batch.reserve(tcfg.batch_size);
        for (int b = 0; b < tcfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                detail::shuffle_order(order, shuffle_rng);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        int t_max = 0;
        for (int vid : batch) t_max = std::max(t_max, dataset[vid].features.len());

        ModelParams grads = zeros_like(params);
        const double scale = 1.0 / batch.size();
        double loss_sum = 0.0;
        for (int vid : batch) {
            const VideoSample& video = dataset[vid];
            GradTape tape;
            TapedForward fw =
                model_forward_taped(tape, detail::pad_to(video.features, t_max),
                                    video.features.len(), params, &grads, mcfg);
            HeadOutputs out_grads;
            loss_sum += total_loss(fw.outputs, assignments[vid], tcfg.focal, &out_grads,
                                   &fw.level_valid);
            for (std::size_t l = 0; l < fw.logit_ids.size(); ++l) {
                SeqTensor& gl = tape.grad(fw.logit_ids[l]);
                SeqTensor& go = tape.grad(fw.offset_ids[l]);
                for (std::size_t i = 0; i < gl.data().size(); ++i) {
                    gl.data()[i] = scale * out_grads.class_logits[l].data()[i];
                }
                for (std::size_t i = 0; i < go.data().size(); ++i) {
                    go.data()[i] = scale * out_grads.offsets[l].data()[i];
                }
            }
            tape.backward();
        }
        const double loss = loss_sum * scale;
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
        }
        result.loss_history.push_back(loss);

        clip_grad_norm(grads, tcfg.grad_clip_norm);
        adamw_step(params, grads, state, tcfg);
        ema_update(ema, params, tcfg.ema_decay);
    }
    result.params = std::move(params);
    result.ema = std::move(ema);
    return result;
}

} // namespace tal
