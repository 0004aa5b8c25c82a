#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tal/ops.hpp"
#include "tal/rng.hpp"
#include "tal/tape.hpp"

namespace tal {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// The block applied between pyramid levels (kernel tcm_kernel, downsampling
// by 2 in every case).
enum class TcmVariant { kMaxPool, kAvgPool, kSubsample, kConv, kAttention };

inline std::string to_string(TcmVariant v) {
    switch (v) {
        case TcmVariant::kMaxPool: return "maxpool";
        case TcmVariant::kAvgPool: return "avgpool";
        case TcmVariant::kSubsample: return "subsample";
        case TcmVariant::kConv: return "conv";
        case TcmVariant::kAttention: return "attention";
    }
    throw std::invalid_argument("unknown TCM variant");
}

inline TcmVariant tcm_variant_from_string(const std::string& s) {
    if (s == "maxpool") return TcmVariant::kMaxPool;
    if (s == "avgpool") return TcmVariant::kAvgPool;
    if (s == "subsample") return TcmVariant::kSubsample;
    if (s == "conv") return TcmVariant::kConv;
    if (s == "attention") return TcmVariant::kAttention;
    throw std::invalid_argument("unknown TCM variant '" + s + "'");
}

struct ModelConfig {
    int input_dim = 16;   // D_in
    int embed_dim = 64;   // D
    int num_levels = 6;   // L
    TcmVariant tcm_variant = TcmVariant::kMaxPool;
    int tcm_kernel = 3;
    int num_classes = 2;  // C
    int head_kernel = 3;

    void validate() const {
        if (num_levels < 2) throw std::invalid_argument("ModelConfig: num_levels must be >= 2");
        if (input_dim < 1 || embed_dim < 1 || num_classes < 1) {
            throw std::invalid_argument("ModelConfig: dims and classes must be >= 1");
        }
        if (tcm_kernel < 1 || head_kernel < 1) {
            throw std::invalid_argument("ModelConfig: kernels must be >= 1");
        }
    }
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// conv -> layer norm -> relu
struct ProjBlock {
    ConvParam conv;
    NormParam norm;

    ProjBlock() = default;
    ProjBlock(int out, int in, int k) : conv(out, in, k), norm(out) {}
};

// All learnable weights. e1/e2 project the input, e3..e6 plus the two head
// convs form the decoder (shared across every pyramid level), and the
// optional per-level blocks exist only for the conv/attention TCM variants.
struct ModelParams {
    ProjBlock e1, e2;
    ProjBlock e3, e4;  // classification tower
    ProjBlock e5, e6;  // regression tower
    ConvParam cls_head;
    ConvParam reg_head;
    std::vector<ProjBlock> tcm_conv;
    std::vector<AttnParam> tcm_attn;
};

// Visits every parameter tensor in a fixed order. The same order is used for
// gradients, optimizer state, EMA and checkpoints.
template <class Params, class Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    auto visit_block = [&fn](const std::string& name, auto& b) {
        fn(name + ".conv.w", b.conv.w);
        fn(name + ".conv.b", b.conv.b);
        fn(name + ".norm.gamma", b.norm.gamma);
        fn(name + ".norm.beta", b.norm.beta);
    };
    visit_block("e1", p.e1);
    visit_block("e2", p.e2);
    for (std::size_t i = 0; i < p.tcm_conv.size(); ++i) {
        visit_block("tcm" + std::to_string(i + 2), p.tcm_conv[i]);
    }
    for (std::size_t i = 0; i < p.tcm_attn.size(); ++i) {
        const std::string name = "tcm" + std::to_string(i + 2);
        fn(name + ".wq", p.tcm_attn[i].wq);
        fn(name + ".wk", p.tcm_attn[i].wk);
        fn(name + ".wv", p.tcm_attn[i].wv);
        fn(name + ".wo", p.tcm_attn[i].wo);
    }
    visit_block("e3", p.e3);
    visit_block("e4", p.e4);
    fn("cls_head.w", p.cls_head.w);
    fn("cls_head.b", p.cls_head.b);
    visit_block("e5", p.e5);
    visit_block("e6", p.e6);
    fn("reg_head.w", p.reg_head.w);
    fn("reg_head.b", p.reg_head.b);
}

inline ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    for_each_tensor(z, [](const std::string&, std::vector<double>& v) {
        std::fill(v.begin(), v.end(), 0.0);
    });
    return z;
}

inline long long count_params(const ModelParams& p) {
    long long n = 0;
    for_each_tensor(const_cast<ModelParams&>(p),
                    [&n](const std::string&, const std::vector<double>& v) {
                        n += static_cast<long long>(v.size());
                    });
    return n;
}

// Parameter shapes for a config, all zeros.
inline ModelParams make_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    const int d = cfg.embed_dim;
    p.e1 = ProjBlock(d, cfg.input_dim, 3);
    p.e2 = ProjBlock(d, d, 3);
    if (cfg.tcm_variant == TcmVariant::kConv) {
        p.tcm_conv.assign(cfg.num_levels - 1, ProjBlock(d, d, cfg.tcm_kernel));
    } else if (cfg.tcm_variant == TcmVariant::kAttention) {
        p.tcm_attn.assign(cfg.num_levels - 1, AttnParam(d));
    }
    p.e3 = ProjBlock(d, d, cfg.head_kernel);
    p.e4 = ProjBlock(d, d, cfg.head_kernel);
    p.e5 = ProjBlock(d, d, cfg.head_kernel);
    p.e6 = ProjBlock(d, d, cfg.head_kernel);
    p.cls_head = ConvParam(cfg.num_classes, d, cfg.head_kernel);
    p.reg_head = ConvParam(2, d, cfg.head_kernel);
    return p;
}

// Prior probability of the classification head at init; biasing the logits
// this low keeps the focal loss stable when nearly all moments are background.
constexpr double kClsPrior = 0.01;

inline void init_conv(ConvParam& c, Rng& rng) {
    const double bound = std::sqrt(1.0 / (static_cast<double>(c.in_ch) * c.kernel));
    for (double& w : c.w) w = rng.uniform(-bound, bound);
    std::fill(c.b.begin(), c.b.end(), 0.0);
}

inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = make_params(cfg);
    Rng rng(seed);
    init_conv(p.e1.conv, rng);
    init_conv(p.e2.conv, rng);
    for (auto& b : p.tcm_conv) init_conv(b.conv, rng);
    for (auto& a : p.tcm_attn) {
        const double bound = std::sqrt(1.0 / a.dim);
        for (auto* m : {&a.wq, &a.wk, &a.wv, &a.wo}) {
            for (double& w : *m) w = rng.uniform(-bound, bound);
        }
    }
    init_conv(p.e3.conv, rng);
    init_conv(p.e4.conv, rng);
    init_conv(p.cls_head, rng);
    init_conv(p.e5.conv, rng);
    init_conv(p.e6.conv, rng);
    init_conv(p.reg_head, rng);
    const double prior_bias = -std::log((1.0 - kClsPrior) / kClsPrior);
    std::fill(p.cls_head.b.begin(), p.cls_head.b.end(), prior_bias);
    return p;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct FeaturePyramid {
    std::vector<SeqTensor> levels;  // levels[0] has length T, halving after
};

struct HeadOutputs {
    std::vector<SeqTensor> class_logits;  // per level: len_l x C
    std::vector<SeqTensor> offsets;       // per level: len_l x 2, entries >= 0
};

namespace detail {

// stride-1 same-length block (conv -> LN -> relu)
inline SeqTensor apply_block_same(const SeqTensor& x, const ProjBlock& b, int valid) {
    const int k = b.conv.kernel;
    SeqTensor y = conv1d_core(x, b.conv, 1, (k - 1) / 2, x.len(), valid);
    y = layer_norm_core(y, b.norm.gamma.data(), b.norm.beta.data(), kLayerNormEps, nullptr);
    return relu(y);
}

inline int apply_block_same_taped(GradTape& t, int x, const ProjBlock* b, ProjBlock* gb,
                                  int valid) {
    const int k = b->conv.kernel;
    int c = taped::conv1d(t, x, &b->conv, gb ? &gb->conv : nullptr, 1, (k - 1) / 2,
                          t.value(x).len(), valid);
    int n = taped::layer_norm(t, c, &b->norm, gb ? &gb->norm : nullptr, kLayerNormEps);
    return taped::relu(t, n);
}

} // namespace detail

inline SeqTensor project_features(const SeqTensor& x, const ModelParams& p) {
    if (x.channels() != p.e1.conv.in_ch) {
        throw std::invalid_argument("project_features: input has " +
                                    std::to_string(x.channels()) + " channels, expected " +
                                    std::to_string(p.e1.conv.in_ch));
    }
    SeqTensor z = detail::apply_block_same(x, p.e1, x.len());
    return detail::apply_block_same(z, p.e2, z.len());
}

// One downsampling step of the configured TCM block: length T -> ceil(T/2).
// Even kernels pad one less on the left so every variant keeps the exact
// halving rule.
inline SeqTensor apply_tcm(const SeqTensor& z, const ModelParams& p, const ModelConfig& cfg,
                           int level_idx, int valid) {
    const int k = cfg.tcm_kernel;
    const int out_len = ceil_div(z.len(), 2);
    switch (cfg.tcm_variant) {
        case TcmVariant::kMaxPool:
            return maxpool1d_core(z, k, 2, (k - 1) / 2, out_len, valid, nullptr);
        case TcmVariant::kAvgPool:
            return avgpool1d_core(z, k, 2, (k - 1) / 2, out_len, valid, nullptr);
        case TcmVariant::kSubsample:
            return subsample(z, 2);
        case TcmVariant::kConv: {
            const ProjBlock& b = p.tcm_conv[level_idx];
            SeqTensor y = conv1d_core(z, b.conv, 2, (k - 1) / 2, out_len, valid);
            y = layer_norm_core(y, b.norm.gamma.data(), b.norm.beta.data(), kLayerNormEps,
                                nullptr);
            return relu(y);
        }
        case TcmVariant::kAttention:
            return self_attention_core(z, p.tcm_attn[level_idx], 2, valid, nullptr);
    }
    throw std::invalid_argument("apply_tcm: unknown variant");
}

inline FeaturePyramid build_pyramid(const SeqTensor& z1, const ModelParams& p,
                                    const ModelConfig& cfg) {
    if (z1.channels() != cfg.embed_dim) {
        throw std::invalid_argument("build_pyramid: channel count != embed_dim");
    }
    if (z1.len() < (1 << (cfg.num_levels - 1))) {
        throw std::invalid_argument("build_pyramid: input of length " +
                                    std::to_string(z1.len()) + " too short for " +
                                    std::to_string(cfg.num_levels) + " levels");
    }
    FeaturePyramid pyr;
    pyr.levels.push_back(z1);
    for (int l = 1; l < cfg.num_levels; ++l) {
        pyr.levels.push_back(apply_tcm(pyr.levels.back(), p, cfg, l - 1,
                                       pyr.levels.back().len()));
    }
    return pyr;
}

inline HeadOutputs heads_forward(const FeaturePyramid& pyr, const ModelParams& p,
                                 const ModelConfig& cfg) {
    const int hk = cfg.head_kernel;
    HeadOutputs out;
    for (const SeqTensor& z : pyr.levels) {
        SeqTensor c = detail::apply_block_same(z, p.e3, z.len());
        c = detail::apply_block_same(c, p.e4, c.len());
        out.class_logits.push_back(
            conv1d_core(c, p.cls_head, 1, (hk - 1) / 2, c.len(), c.len()));

        SeqTensor r = detail::apply_block_same(z, p.e5, z.len());
        r = detail::apply_block_same(r, p.e6, r.len());
        out.offsets.push_back(
            relu(conv1d_core(r, p.reg_head, 1, (hk - 1) / 2, r.len(), r.len())));
    }
    return out;
}

inline HeadOutputs model_forward(const SeqTensor& x, const ModelParams& p,
                                 const ModelConfig& cfg) {
    return heads_forward(build_pyramid(project_features(x, p), p, cfg), p, cfg);
}

// ---------------------------------------------------------------------------
// Taped forward for training. `valid` marks the unpadded prefix of x; every
// op masks rows beyond its level's valid count so a padded run matches the
// unpadded run bit for bit on the valid region.
// ---------------------------------------------------------------------------

struct TapedForward {
    HeadOutputs outputs;
    std::vector<int> logit_ids;
    std::vector<int> offset_ids;
    std::vector<int> level_valid;  // valid moments per level
    int input_id = -1;
};

inline TapedForward model_forward_taped(GradTape& tape, const SeqTensor& x, int valid,
                                        const ModelParams& p, ModelParams* grads,
                                        const ModelConfig& cfg) {
    if (x.channels() != cfg.input_dim) {
        throw std::invalid_argument("model_forward: input channel count != input_dim");
    }
    if (valid < 1 || valid > x.len()) {
        throw std::invalid_argument("model_forward: valid length out of range");
    }
    if (x.len() < (1 << (cfg.num_levels - 1))) {
        throw std::invalid_argument("model_forward: input too short for pyramid");
    }

    TapedForward fw;
    fw.input_id = tape.leaf(x);

    auto gb = [&grads](ProjBlock ModelParams::* member) -> ProjBlock* {
        return grads ? &(grads->*member) : nullptr;
    };

    int z = detail::apply_block_same_taped(tape, fw.input_id, &p.e1, gb(&ModelParams::e1),
                                           valid);
    z = detail::apply_block_same_taped(tape, z, &p.e2, gb(&ModelParams::e2), valid);

    std::vector<int> level_ids{z};
    fw.level_valid.push_back(valid);
    const int k = cfg.tcm_kernel;
    for (int l = 1; l < cfg.num_levels; ++l) {
        const int cur = level_ids.back();
        const int cur_len = tape.value(cur).len();
        const int cur_valid = fw.level_valid.back();
        const int out_len = ceil_div(cur_len, 2);
        int next = -1;
        switch (cfg.tcm_variant) {
            case TcmVariant::kMaxPool:
                next = taped::maxpool1d(tape, cur, k, 2, (k - 1) / 2, out_len, cur_valid);
                break;
            case TcmVariant::kAvgPool:
                next = taped::avgpool1d(tape, cur, k, 2, (k - 1) / 2, out_len, cur_valid);
                break;
            case TcmVariant::kSubsample:
                next = taped::subsample(tape, cur, 2);
                break;
            case TcmVariant::kConv: {
                const ProjBlock* b = &p.tcm_conv[l - 1];
                ProjBlock* g = grads ? &grads->tcm_conv[l - 1] : nullptr;
                int c = taped::conv1d(tape, cur, &b->conv, g ? &g->conv : nullptr, 2,
                                      (k - 1) / 2, out_len, cur_valid);
                int n = taped::layer_norm(tape, c, &b->norm, g ? &g->norm : nullptr,
                                          kLayerNormEps);
                next = taped::relu(tape, n);
                break;
            }
            case TcmVariant::kAttention:
                next = taped::self_attention(tape, cur, &p.tcm_attn[l - 1],
                                             grads ? &grads->tcm_attn[l - 1] : nullptr, 2,
                                             cur_valid);
                break;
        }
        level_ids.push_back(next);
        fw.level_valid.push_back(ceil_div(cur_valid, 2));
    }

    const int hk = cfg.head_kernel;
    for (int l = 0; l < cfg.num_levels; ++l) {
        const int z_l = level_ids[l];
        const int len_l = tape.value(z_l).len();
        const int valid_l = fw.level_valid[l];

        int c = detail::apply_block_same_taped(tape, z_l, &p.e3, gb(&ModelParams::e3),
                                               valid_l);
        c = detail::apply_block_same_taped(tape, c, &p.e4, gb(&ModelParams::e4), valid_l);
        int logits = taped::conv1d(tape, c, &p.cls_head,
                                   grads ? &grads->cls_head : nullptr, 1, (hk - 1) / 2,
                                   len_l, valid_l);

        int r = detail::apply_block_same_taped(tape, z_l, &p.e5, gb(&ModelParams::e5),
                                               valid_l);
        r = detail::apply_block_same_taped(tape, r, &p.e6, gb(&ModelParams::e6), valid_l);
        int off = taped::conv1d(tape, r, &p.reg_head, grads ? &grads->reg_head : nullptr,
                                1, (hk - 1) / 2, len_l, valid_l);
        off = taped::relu(tape, off);

        fw.logit_ids.push_back(logits);
        fw.offset_ids.push_back(off);
        fw.outputs.class_logits.push_back(tape.value(logits));
        fw.outputs.offsets.push_back(tape.value(off));
    }
    return fw;
}

// ---------------------------------------------------------------------------
// Efficiency accounting: multiply-accumulates of one forward pass. Only conv
// and matmul work counts; pooling, subsampling, normalization and activations
// contribute zero.
// ---------------------------------------------------------------------------

inline unsigned long long count_macs(const ModelConfig& cfg, int T) {
    cfg.validate();
    if (T < (1 << (cfg.num_levels - 1))) {
        throw std::invalid_argument("count_macs: T too short for the pyramid");
    }
    const unsigned long long d = cfg.embed_dim;
    const unsigned long long din = cfg.input_dim;
    const unsigned long long nc = cfg.num_classes;
    const unsigned long long hk = cfg.head_kernel;

    std::vector<unsigned long long> len;
    len.push_back(T);
    for (int l = 1; l < cfg.num_levels; ++l) {
        len.push_back((len.back() + 1) / 2);
    }

    unsigned long long macs = 0;
    macs += len[0] * d * din * 3;  // e1
    macs += len[0] * d * d * 3;    // e2

    for (int l = 1; l < cfg.num_levels; ++l) {
        const unsigned long long t_in = len[l - 1];
        const unsigned long long t_out = len[l];
        switch (cfg.tcm_variant) {
            case TcmVariant::kMaxPool:
            case TcmVariant::kAvgPool:
            case TcmVariant::kSubsample:
                break;
            case TcmVariant::kConv:
                macs += t_out * d * d * cfg.tcm_kernel;
                break;
            case TcmVariant::kAttention:
                macs += t_out * d * d;       // Q projection
                macs += 2 * t_in * d * d;    // K, V projections
                macs += t_out * t_in * d;    // scores
                macs += t_out * t_in * d;    // value mixing
                macs += t_out * d * d;       // output projection
                break;
        }
    }

    for (int l = 0; l < cfg.num_levels; ++l) {
        const unsigned long long t = len[l];
        macs += t * (2 * d * d * hk + nc * d * hk);  // e3, e4, F_c
        macs += t * (2 * d * d * hk + 2 * d * hk);   // e5, e6, F_o
    }
    return macs;
}

} // namespace tal
