#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tal/seq_tensor.hpp"
#include "tal/tape.hpp"

namespace tal {

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

// 1D convolution weights, w laid out [out][in][k].
struct ConvParam {
    int out_ch = 0;
    int in_ch = 0;
    int kernel = 0;
    std::vector<double> w;
    std::vector<double> b;

    ConvParam() = default;
    ConvParam(int out, int in, int k)
        : out_ch(out), in_ch(in), kernel(k),
          w(static_cast<std::size_t>(out) * in * k, 0.0), b(out, 0.0) {}

    double& wat(int o, int i, int j) {
        return w[(static_cast<std::size_t>(o) * in_ch + i) * kernel + j];
    }
    double wat(int o, int i, int j) const {
        return w[(static_cast<std::size_t>(o) * in_ch + i) * kernel + j];
    }
};

// Per-channel affine of layer normalization.
struct NormParam {
    std::vector<double> gamma;
    std::vector<double> beta;

    NormParam() = default;
    explicit NormParam(int channels) : gamma(channels, 1.0), beta(channels, 0.0) {}
};

// Single-head attention projections, each dim x dim row-major [in][out].
struct AttnParam {
    int dim = 0;
    std::vector<double> wq, wk, wv, wo;

    AttnParam() = default;
    explicit AttnParam(int d)
        : dim(d),
          wq(static_cast<std::size_t>(d) * d, 0.0),
          wk(static_cast<std::size_t>(d) * d, 0.0),
          wv(static_cast<std::size_t>(d) * d, 0.0),
          wo(static_cast<std::size_t>(d) * d, 0.0) {}
};

constexpr double kLayerNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Shape helpers
// ---------------------------------------------------------------------------

inline int conv_out_len(int T, int k, int stride, int pad_left, int pad_right) {
    if (T + pad_left + pad_right < k) {
        throw std::invalid_argument("conv/pool: input shorter than kernel after padding");
    }
    return (T + pad_left + pad_right - k) / stride + 1;
}

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

namespace detail {

// weights repacked [k][in][out] so the inner channel loops are unit-stride
inline std::vector<double> repack_conv(const ConvParam& p) {
    std::vector<double> wt(p.w.size());
    for (int o = 0; o < p.out_ch; ++o) {
        for (int i = 0; i < p.in_ch; ++i) {
            for (int j = 0; j < p.kernel; ++j) {
                wt[(static_cast<std::size_t>(j) * p.in_ch + i) * p.out_ch + o] =
                    p.w[(static_cast<std::size_t>(o) * p.in_ch + i) * p.kernel + j];
            }
        }
    }
    return wt;
}

} // namespace detail

// out[t,o] = b[o] + sum_{j,i} w[o,i,j] * x[t*stride - pad_left + j, i];
// positions outside [0, valid) read as zero (zero padding).
inline SeqTensor conv1d_core(const SeqTensor& x, const ConvParam& p, int stride,
                             int pad_left, int out_len, int valid) {
    if (x.channels() != p.in_ch) {
        throw std::invalid_argument("conv1d: input has " + std::to_string(x.channels()) +
                                    " channels, weights expect " + std::to_string(p.in_ch));
    }
    std::vector<double> wt = detail::repack_conv(p);
    SeqTensor y(out_len, p.out_ch);
    for (int t = 0; t < out_len; ++t) {
        double* yr = y.row(t);
        for (int o = 0; o < p.out_ch; ++o) yr[o] = p.b[o];
        for (int j = 0; j < p.kernel; ++j) {
            int ti = t * stride - pad_left + j;
            if (ti < 0 || ti >= valid) continue;
            const double* xr = x.row(ti);
            const double* wj = wt.data() + static_cast<std::size_t>(j) * p.in_ch * p.out_ch;
            for (int i = 0; i < p.in_ch; ++i) {
                const double xv = xr[i];
                const double* wrow = wj + static_cast<std::size_t>(i) * p.out_ch;
                for (int o = 0; o < p.out_ch; ++o) yr[o] += wrow[o] * xv;
            }
        }
    }
    return y;
}

inline void conv1d_core_backward(const SeqTensor& x, const ConvParam& p, int stride,
                                 int pad_left, int valid, const SeqTensor& gy,
                                 SeqTensor* gx, ConvParam* gp) {
    std::vector<double> wt = detail::repack_conv(p);
    std::vector<double> gwt;
    if (gp) gwt.assign(p.w.size(), 0.0);
    for (int t = 0; t < gy.len(); ++t) {
        const double* gyr = gy.row(t);
        if (gp) {
            for (int o = 0; o < p.out_ch; ++o) gp->b[o] += gyr[o];
        }
        for (int j = 0; j < p.kernel; ++j) {
            int ti = t * stride - pad_left + j;
            if (ti < 0 || ti >= valid) continue;
            const double* xr = x.row(ti);
            double* gxr = gx ? gx->row(ti) : nullptr;
            const std::size_t joff = static_cast<std::size_t>(j) * p.in_ch * p.out_ch;
            for (int i = 0; i < p.in_ch; ++i) {
                const double* wrow = wt.data() + joff + static_cast<std::size_t>(i) * p.out_ch;
                const double xv = xr[i];
                double acc = 0.0;
                if (gp) {
                    double* gwrow = gwt.data() + joff + static_cast<std::size_t>(i) * p.out_ch;
                    for (int o = 0; o < p.out_ch; ++o) {
                        const double g = gyr[o];
                        acc += wrow[o] * g;
                        gwrow[o] += xv * g;
                    }
                } else {
                    for (int o = 0; o < p.out_ch; ++o) acc += wrow[o] * gyr[o];
                }
                if (gxr) gxr[i] += acc;
            }
        }
    }
    if (gp) {
        for (int o = 0; o < p.out_ch; ++o) {
            for (int i = 0; i < p.in_ch; ++i) {
                for (int j = 0; j < p.kernel; ++j) {
                    gp->wat(o, i, j) +=
                        gwt[(static_cast<std::size_t>(j) * p.in_ch + i) * p.out_ch + o];
                }
            }
        }
    }
}

inline SeqTensor conv1d(const SeqTensor& x, const ConvParam& p, int stride, int pad) {
    if (p.kernel < 1 || stride < 1 || pad < 0) {
        throw std::invalid_argument("conv1d: bad kernel/stride/pad");
    }
    int out_len = conv_out_len(x.len(), p.kernel, stride, pad, pad);
    return conv1d_core(x, p, stride, pad, out_len, x.len());
}

// ---------------------------------------------------------------------------
// layer_norm (normalizes over the channel axis, per time step)
// ---------------------------------------------------------------------------

struct NormStats {
    std::vector<double> mean;
    std::vector<double> inv_std;
};

inline SeqTensor layer_norm_core(const SeqTensor& x, const double* gamma,
                                 const double* beta, double eps, NormStats* stats) {
    const int T = x.len(), C = x.channels();
    SeqTensor y(T, C);
    if (stats) {
        stats->mean.resize(T);
        stats->inv_std.resize(T);
    }
    for (int t = 0; t < T; ++t) {
        const double* xr = x.row(t);
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += xr[c];
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = xr[c] - mean;
            var += d * d;
        }
        var /= C;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        if (stats) {
            stats->mean[t] = mean;
            stats->inv_std[t] = inv_std;
        }
        double* yr = y.row(t);
        for (int c = 0; c < C; ++c) {
            const double xhat = (xr[c] - mean) * inv_std;
            yr[c] = (gamma ? gamma[c] : 1.0) * xhat + (beta ? beta[c] : 0.0);
        }
    }
    return y;
}

inline void layer_norm_core_backward(const SeqTensor& x, const double* gamma,
                                     const NormStats& stats, const SeqTensor& gy,
                                     SeqTensor* gx, NormParam* gp) {
    const int T = x.len(), C = x.channels();
    for (int t = 0; t < T; ++t) {
        const double* xr = x.row(t);
        const double* gyr = gy.row(t);
        const double mean = stats.mean[t];
        const double inv_std = stats.inv_std[t];
        double g_mean = 0.0, gx_mean = 0.0;
        for (int c = 0; c < C; ++c) {
            const double xhat = (xr[c] - mean) * inv_std;
            const double g = gyr[c] * (gamma ? gamma[c] : 1.0);
            g_mean += g;
            gx_mean += g * xhat;
            if (gp) {
                gp->gamma[c] += gyr[c] * xhat;
                gp->beta[c] += gyr[c];
            }
        }
        g_mean /= C;
        gx_mean /= C;
        if (gx) {
            double* gxr = gx->row(t);
            for (int c = 0; c < C; ++c) {
                const double xhat = (xr[c] - mean) * inv_std;
                const double g = gyr[c] * (gamma ? gamma[c] : 1.0);
                gxr[c] += inv_std * (g - g_mean - xhat * gx_mean);
            }
        }
    }
}

inline SeqTensor layer_norm(const SeqTensor& x, const NormParam& p, double eps) {
    if (eps < 0.0) throw std::invalid_argument("layer_norm: eps must be >= 0");
    if (static_cast<int>(p.gamma.size()) != x.channels()) {
        throw std::invalid_argument("layer_norm: gamma/beta size mismatch");
    }
    return layer_norm_core(x, p.gamma.data(), p.beta.data(), eps, nullptr);
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

inline SeqTensor relu(const SeqTensor& x) {
    SeqTensor y = x;
    for (double& v : y.data()) v = std::max(v, 0.0);
    return y;
}

// subgradient at 0 is 0
inline void relu_backward(const SeqTensor& x, const SeqTensor& gy, SeqTensor* gx) {
    const std::size_t n = x.data().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (x.data()[i] > 0.0) gx->data()[i] += gy.data()[i];
    }
}

// ---------------------------------------------------------------------------
// maxpool1d / avgpool1d
// ---------------------------------------------------------------------------

// Padding (and rows >= valid) contributes -inf, so it never wins; ties go to
// the lowest time index. winners records the winning input row per output
// element for the backward pass. A window with no physical position at all is
// an error; a window whose physical positions are all masked out by `valid`
// belongs to the padded tail and yields a plain zero with no winner.
inline SeqTensor maxpool1d_core(const SeqTensor& x, int k, int stride, int pad_left,
                                int out_len, int valid, std::vector<int>* winners) {
    const int C = x.channels();
    SeqTensor y(out_len, C);
    if (winners) winners->assign(static_cast<std::size_t>(out_len) * C, -1);
    for (int t = 0; t < out_len; ++t) {
        double* yr = y.row(t);
        bool any_physical = false;
        bool any_valid = false;
        for (int c = 0; c < C; ++c) yr[c] = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
            int ti = t * stride - pad_left + j;
            if (ti < 0 || ti >= x.len()) continue;
            any_physical = true;
            if (ti >= valid) continue;
            any_valid = true;
            const double* xr = x.row(ti);
            for (int c = 0; c < C; ++c) {
                if (xr[c] > yr[c]) {
                    yr[c] = xr[c];
                    if (winners) (*winners)[static_cast<std::size_t>(t) * C + c] = ti;
                }
            }
        }
        if (!any_physical) throw std::invalid_argument("maxpool1d: window entirely in padding");
        if (!any_valid) {
            for (int c = 0; c < C; ++c) yr[c] = 0.0;
        }
    }
    return y;
}

inline void maxpool1d_core_backward(const std::vector<int>& winners, const SeqTensor& gy,
                                    SeqTensor* gx) {
    const int C = gy.channels();
    for (int t = 0; t < gy.len(); ++t) {
        const double* gyr = gy.row(t);
        for (int c = 0; c < C; ++c) {
            int ti = winners[static_cast<std::size_t>(t) * C + c];
            if (ti >= 0) gx->at(ti, c) += gyr[c];
        }
    }
}

inline SeqTensor maxpool1d(const SeqTensor& x, int k, int stride, int pad) {
    if (k < 1 || stride < 1 || pad < 0) {
        throw std::invalid_argument("maxpool1d: bad kernel/stride/pad");
    }
    int out_len = conv_out_len(x.len(), k, stride, pad, pad);
    return maxpool1d_core(x, k, stride, pad, out_len, x.len(), nullptr);
}

// Mean over the in-range part of each window; padding is excluded from the
// divisor. counts records the divisor per output row for the backward pass.
// Fully masked windows in the padded tail yield zero (count 0).
inline SeqTensor avgpool1d_core(const SeqTensor& x, int k, int stride, int pad_left,
                                int out_len, int valid, std::vector<int>* counts) {
    const int C = x.channels();
    SeqTensor y(out_len, C, 0.0);
    if (counts) counts->assign(out_len, 0);
    for (int t = 0; t < out_len; ++t) {
        double* yr = y.row(t);
        bool any_physical = false;
        int cnt = 0;
        for (int j = 0; j < k; ++j) {
            int ti = t * stride - pad_left + j;
            if (ti < 0 || ti >= x.len()) continue;
            any_physical = true;
            if (ti >= valid) continue;
            ++cnt;
            const double* xr = x.row(ti);
            for (int c = 0; c < C; ++c) yr[c] += xr[c];
        }
        if (!any_physical) throw std::invalid_argument("avgpool1d: window entirely in padding");
        if (cnt > 0) {
            for (int c = 0; c < C; ++c) yr[c] /= cnt;
        }
        if (counts) (*counts)[t] = cnt;
    }
    return y;
}

inline void avgpool1d_core_backward(int k, int stride, int pad_left, int valid,
                                    const std::vector<int>& counts, const SeqTensor& gy,
                                    SeqTensor* gx) {
    const int C = gy.channels();
    for (int t = 0; t < gy.len(); ++t) {
        if (counts[t] == 0) continue;
        const double* gyr = gy.row(t);
        const double inv = 1.0 / counts[t];
        for (int j = 0; j < k; ++j) {
            int ti = t * stride - pad_left + j;
            if (ti < 0 || ti >= valid) continue;
            double* gxr = gx->row(ti);
            for (int c = 0; c < C; ++c) gxr[c] += gyr[c] * inv;
        }
    }
}

inline SeqTensor avgpool1d(const SeqTensor& x, int k, int stride, int pad) {
    if (k < 1 || stride < 1 || pad < 0) {
        throw std::invalid_argument("avgpool1d: bad kernel/stride/pad");
    }
    int out_len = conv_out_len(x.len(), k, stride, pad, pad);
    return avgpool1d_core(x, k, stride, pad, out_len, x.len(), nullptr);
}

// ---------------------------------------------------------------------------
// subsample (keep indices 0, stride, 2*stride, ...)
// ---------------------------------------------------------------------------

inline SeqTensor subsample(const SeqTensor& x, int stride) {
    if (stride < 1) throw std::invalid_argument("subsample: stride must be >= 1");
    const int out_len = ceil_div(x.len(), stride);
    SeqTensor y(out_len, x.channels());
    for (int t = 0; t < out_len; ++t) {
        const double* xr = x.row(t * stride);
        double* yr = y.row(t);
        for (int c = 0; c < x.channels(); ++c) yr[c] = xr[c];
    }
    return y;
}

inline void subsample_backward(int stride, const SeqTensor& gy, SeqTensor* gx) {
    for (int t = 0; t < gy.len(); ++t) {
        const double* gyr = gy.row(t);
        double* gxr = gx->row(t * stride);
        for (int c = 0; c < gy.channels(); ++c) gxr[c] += gyr[c];
    }
}

// ---------------------------------------------------------------------------
// self_attention
// ---------------------------------------------------------------------------
// Single-head scaled dot-product attention. Queries are taken at strided
// positions and attend over all keys/values in [0, valid); the output gets a
// projection, a residual from the strided input, and a plain (no-affine)
// layer norm so it is scale-comparable with the pooling blocks.

namespace detail {

// y += x * w, w row-major [in][out]
inline void matmul_xw(const SeqTensor& x, const std::vector<double>& w, SeqTensor& y) {
    const int T = x.len(), in = x.channels(), out = y.channels();
    for (int t = 0; t < T; ++t) {
        const double* xr = x.row(t);
        double* yr = y.row(t);
        for (int i = 0; i < in; ++i) {
            const double xv = xr[i];
            const double* wrow = w.data() + static_cast<std::size_t>(i) * out;
            for (int o = 0; o < out; ++o) yr[o] += wrow[o] * xv;
        }
    }
}

// gx += gy * w^T and gw += x^T * gy
inline void matmul_xw_backward(const SeqTensor& x, const std::vector<double>& w,
                               const SeqTensor& gy, SeqTensor* gx, std::vector<double>* gw) {
    const int T = x.len(), in = x.channels(), out = gy.channels();
    for (int t = 0; t < T; ++t) {
        const double* xr = x.row(t);
        const double* gyr = gy.row(t);
        double* gxr = gx ? gx->row(t) : nullptr;
        for (int i = 0; i < in; ++i) {
            const double* wrow = w.data() + static_cast<std::size_t>(i) * out;
            double* gwrow = gw ? gw->data() + static_cast<std::size_t>(i) * out : nullptr;
            double acc = 0.0;
            const double xv = xr[i];
            for (int o = 0; o < out; ++o) {
                acc += wrow[o] * gyr[o];
                if (gwrow) gwrow[o] += xv * gyr[o];
            }
            if (gxr) gxr[i] += acc;
        }
    }
}

} // namespace detail

struct AttnSaved {
    SeqTensor x_strided;   // T_q x C
    SeqTensor q, k, v;     // T_q x C, T x C, T x C
    SeqTensor attn;        // T_q x T softmax weights (zero at cols >= valid)
    SeqTensor mixed;       // T_q x C, attn * v
    SeqTensor residual;    // T_q x C, x_strided + mixed * wo
    NormStats norm_stats;
    int valid = 0;
};

inline SeqTensor self_attention_core(const SeqTensor& x, const AttnParam& p,
                                     int query_stride, int valid, AttnSaved* saved) {
    const int T = x.len(), C = x.channels();
    if (C != p.dim) throw std::invalid_argument("self_attention: channel mismatch");
    const int Tq = ceil_div(T, query_stride);

    SeqTensor xs(Tq, C);
    for (int t = 0; t < Tq; ++t) {
        const double* xr = x.row(t * query_stride);
        for (int c = 0; c < C; ++c) xs.at(t, c) = xr[c];
    }

    SeqTensor q(Tq, C, 0.0), k(T, C, 0.0), v(T, C, 0.0);
    detail::matmul_xw(xs, p.wq, q);
    detail::matmul_xw(x, p.wk, k);
    detail::matmul_xw(x, p.wv, v);

    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    SeqTensor attn(Tq, T, 0.0);
    for (int t = 0; t < Tq; ++t) {
        const double* qr = q.row(t);
        double* ar = attn.row(t);
        double mx = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < valid; ++s) {
            const double* kr = k.row(s);
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += qr[c] * kr[c];
            ar[s] = dot * scale;
            mx = std::max(mx, ar[s]);
        }
        double denom = 0.0;
        for (int s = 0; s < valid; ++s) {
            ar[s] = std::exp(ar[s] - mx);
            denom += ar[s];
        }
        for (int s = 0; s < valid; ++s) ar[s] /= denom;
    }

    SeqTensor mixed(Tq, C, 0.0);
    for (int t = 0; t < Tq; ++t) {
        const double* ar = attn.row(t);
        double* mr = mixed.row(t);
        for (int s = 0; s < valid; ++s) {
            const double* vr = v.row(s);
            const double a = ar[s];
            for (int c = 0; c < C; ++c) mr[c] += a * vr[c];
        }
    }

    SeqTensor residual = xs;
    detail::matmul_xw(mixed, p.wo, residual);

    NormStats stats;
    SeqTensor out = layer_norm_core(residual, nullptr, nullptr, kLayerNormEps, &stats);

    if (saved) {
        saved->x_strided = std::move(xs);
        saved->q = std::move(q);
        saved->k = std::move(k);
        saved->v = std::move(v);
        saved->attn = std::move(attn);
        saved->mixed = std::move(mixed);
        saved->residual = std::move(residual);
        saved->norm_stats = std::move(stats);
        saved->valid = valid;
    }
    return out;
}

inline void self_attention_core_backward(const SeqTensor& x, const AttnParam& p,
                                         int query_stride, const AttnSaved& s,
                                         const SeqTensor& gy, SeqTensor* gx, AttnParam* gp) {
    const int T = x.len(), C = x.channels();
    const int Tq = s.x_strided.len();
    const int valid = s.valid;
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));

    SeqTensor g_res(Tq, C, 0.0);
    layer_norm_core_backward(s.residual, nullptr, s.norm_stats, gy, &g_res, nullptr);

    SeqTensor g_xs = g_res; // residual path
    SeqTensor g_mixed(Tq, C, 0.0);
    detail::matmul_xw_backward(s.mixed, p.wo, g_res, &g_mixed, gp ? &gp->wo : nullptr);

    SeqTensor g_attn(Tq, T, 0.0);
    SeqTensor g_v(T, C, 0.0);
    for (int t = 0; t < Tq; ++t) {
        const double* gmr = g_mixed.row(t);
        const double* ar = s.attn.row(t);
        double* gar = g_attn.row(t);
        for (int sp = 0; sp < valid; ++sp) {
            const double* vr = s.v.row(sp);
            double* gvr = g_v.row(sp);
            const double a = ar[sp];
            double dot = 0.0;
            for (int c = 0; c < C; ++c) {
                dot += gmr[c] * vr[c];
                gvr[c] += a * gmr[c];
            }
            gar[sp] = dot;
        }
        // softmax backward: g_score = (g_attn - <g_attn, attn>) .* attn
        double inner = 0.0;
        for (int sp = 0; sp < valid; ++sp) inner += gar[sp] * ar[sp];
        for (int sp = 0; sp < valid; ++sp) gar[sp] = (gar[sp] - inner) * ar[sp];
    }

    SeqTensor g_q(Tq, C, 0.0);
    SeqTensor g_k(T, C, 0.0);
    for (int t = 0; t < Tq; ++t) {
        const double* gar = g_attn.row(t);
        const double* qr = s.q.row(t);
        double* gqr = g_q.row(t);
        for (int sp = 0; sp < valid; ++sp) {
            const double g = gar[sp] * scale;
            const double* kr = s.k.row(sp);
            double* gkr = g_k.row(sp);
            for (int c = 0; c < C; ++c) {
                gqr[c] += g * kr[c];
                gkr[c] += g * qr[c];
            }
        }
    }

    detail::matmul_xw_backward(s.x_strided, p.wq, g_q, &g_xs, gp ? &gp->wq : nullptr);
    if (gx) {
        detail::matmul_xw_backward(x, p.wk, g_k, gx, gp ? &gp->wk : nullptr);
        detail::matmul_xw_backward(x, p.wv, g_v, gx, gp ? &gp->wv : nullptr);
        for (int t = 0; t < Tq; ++t) {
            const double* gr = g_xs.row(t);
            double* gxr = gx->row(t * query_stride);
            for (int c = 0; c < C; ++c) gxr[c] += gr[c];
        }
    } else {
        detail::matmul_xw_backward(x, p.wk, g_k, nullptr, gp ? &gp->wk : nullptr);
        detail::matmul_xw_backward(x, p.wv, g_v, nullptr, gp ? &gp->wv : nullptr);
    }
}

inline SeqTensor self_attention(const SeqTensor& x, const AttnParam& p, int query_stride) {
    if (query_stride < 1) throw std::invalid_argument("self_attention: query_stride >= 1");
    return self_attention_core(x, p, query_stride, x.len(), nullptr);
}

// ---------------------------------------------------------------------------
// Taped variants. Parameter structs (and their gradient sinks) must outlive
// the tape; gradient sinks may be null when only input gradients are wanted.
// The node id of a push equals tape.size() beforehand, which lets the
// backward closure address its own output gradient.
// ---------------------------------------------------------------------------

namespace taped {

inline int conv1d(GradTape& tape, int x_id, const ConvParam* p, ConvParam* gp,
                  int stride, int pad_left, int out_len, int valid) {
    SeqTensor y = conv1d_core(tape.value(x_id), *p, stride, pad_left, out_len, valid);
    const int out_id = static_cast<int>(tape.size());
    tape.push(std::move(y), [=](GradTape& t) {
        conv1d_core_backward(t.value(x_id), *p, stride, pad_left, valid,
                             t.grad(out_id), &t.grad(x_id), gp);
    });
    return out_id;
}

inline int layer_norm(GradTape& tape, int x_id, const NormParam* p, NormParam* gp,
                      double eps) {
    NormStats stats;
    SeqTensor y = layer_norm_core(tape.value(x_id), p->gamma.data(), p->beta.data(),
                                  eps, &stats);
    const int out_id = static_cast<int>(tape.size());
    tape.push(std::move(y), [x_id, out_id, p, gp, stats = std::move(stats)](GradTape& t) {
        layer_norm_core_backward(t.value(x_id), p->gamma.data(), stats,
                                 t.grad(out_id), &t.grad(x_id), gp);
    });
    return out_id;
}

inline int relu(GradTape& tape, int x_id) {
    SeqTensor y = tal::relu(tape.value(x_id));
    const int out_id = static_cast<int>(tape.size());
    tape.push(std::move(y), [x_id, out_id](GradTape& t) {
        relu_backward(t.value(x_id), t.grad(out_id), &t.grad(x_id));
    });
    return out_id;
}

inline int maxpool1d(GradTape& tape, int x_id, int k, int stride, int pad_left,
                     int out_len, int valid) {
    std::vector<int> winners;
    SeqTensor y = maxpool1d_core(tape.value(x_id), k, stride, pad_left, out_len,
                                 valid, &winners);
    const int out_id = static_cast<int>(tape.size());
    tape.push(std::move(y), [x_id, out_id, winners = std::move(winners)](GradTape& t) {
        maxpool1d_core_backward(winners, t.grad(out_id), &t.grad(x_id));
    });
    return out_id;
}

inline int avgpool1d(GradTape& tape, int x_id, int k, int stride, int pad_left,
                     int out_len, int valid) {
    std::vector<int> counts;
    SeqTensor y = avgpool1d_core(tape.value(x_id), k, stride, pad_left, out_len,
                                 valid, &counts);
    const int out_id = static_cast<int>(tape.size());
    tape.push(std::move(y),
              [x_id, out_id, k, stride, pad_left, valid, counts = std::move(counts)](GradTape& t) {
                  avgpool1d_core_backward(k, stride, pad_left, valid, counts,
                                          t.grad(out_id), &t.grad(x_id));
              });
    return out_id;
}

inline int subsample(GradTape& tape, int x_id, int stride) {
    SeqTensor y = tal::subsample(tape.value(x_id), stride);
    const int out_id = static_cast<int>(tape.size());
    tape.push(std::move(y), [x_id, out_id, stride](GradTape& t) {
        subsample_backward(stride, t.grad(out_id), &t.grad(x_id));
    });
    return out_id;
}

inline int self_attention(GradTape& tape, int x_id, const AttnParam* p, AttnParam* gp,
                          int query_stride, int valid) {
    auto saved = std::make_shared<AttnSaved>();
    SeqTensor y = self_attention_core(tape.value(x_id), *p, query_stride, valid,
                                      saved.get());
    const int out_id = static_cast<int>(tape.size());
    tape.push(std::move(y), [x_id, out_id, p, gp, query_stride, saved](GradTape& t) {
        self_attention_core_backward(t.value(x_id), *p, query_stride, *saved,
                                     t.grad(out_id), &t.grad(x_id), gp);
    });
    return out_id;
}

} // namespace taped

} // namespace tal
