#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tal/model.hpp"
#include "tal/targets.hpp"

namespace tal {

struct FocalConfig {
    double alpha = 0.25;  // negative disables the alpha weighting
    double gamma = 2.0;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace detail {

inline double pow_g(double x, double g) {
    if (g == 2.0) return x * x;
    if (g == 1.0) return x;
    if (g == 0.0) return 1.0;
    return std::pow(x, g);
}

} // namespace detail

// One-vs-all sigmoid focal loss over C classes, summed over classes.
// target_cls = -1 marks a background moment (every class negative).
inline double focal_loss(const double* logits, int num_classes, int target_cls,
                         double alpha, double gamma, double* grad_logits = nullptr) {
    if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
    if (alpha > 1.0) throw std::invalid_argument("focal_loss: alpha must be <= 1");
    double loss = 0.0;
    for (int i = 0; i < num_classes; ++i) {
        const double p = sigmoid(logits[i]);
        const bool pos = (i == target_cls);
        const double pt = pos ? p : 1.0 - p;
        const double at = alpha < 0.0 ? 1.0 : (pos ? alpha : 1.0 - alpha);
        const double pt_safe = std::clamp(pt, 1e-12, 1.0);
        const double one_m = std::max(1.0 - pt, 0.0);
        loss += -at * detail::pow_g(one_m, gamma) * std::log(pt_safe);
        if (grad_logits) {
            double dl_dpt = -at * detail::pow_g(one_m, gamma) / pt_safe;
            if (gamma > 0.0) {
                dl_dpt += at * gamma * detail::pow_g(one_m, gamma - 1.0) * std::log(pt_safe);
            }
            const double dpt_dz = (pos ? 1.0 : -1.0) * p * (1.0 - p);
            grad_logits[i] = dl_dpt * dpt_dz;
        }
    }
    return loss;
}

inline double focal_loss(const std::vector<double>& logits, int target_cls,
                         double alpha = 0.25, double gamma = 2.0,
                         double* grad_logits = nullptr) {
    return focal_loss(logits.data(), static_cast<int>(logits.size()), target_cls, alpha,
                      gamma, grad_logits);
}

// 1D DIoU between segments [ps, pe] and [ts, te]; the target must be
// nonempty. loss = 1 - IoU + (center distance)^2 / (enclosing length)^2.
inline double diou_segments(double ps, double pe, double ts, double te,
                            double* g_ps = nullptr, double* g_pe = nullptr) {
    if (!(ts < te)) throw std::invalid_argument("diou: target segment must have ts < te");
    if (!(ps <= pe)) throw std::invalid_argument("diou: pred segment must have ps <= pe");
    const double lp = pe - ps;
    const double lg = te - ts;
    const double inter = std::max(0.0, std::min(pe, te) - std::max(ps, ts));
    const double uni = lp + lg - inter;
    const double iou = inter / uni;
    const double dc = 0.5 * ((ps + pe) - (ts + te));
    const double cl = std::max(pe, te) - std::min(ps, ts);
    const double loss = 1.0 - iou + (dc * dc) / (cl * cl);
    if (g_ps || g_pe) {
        const double di_dps = (inter > 0.0 && ps > ts) ? -1.0 : 0.0;
        const double di_dpe = (inter > 0.0 && pe < te) ? 1.0 : 0.0;
        const double du_dps = -1.0 - di_dps;
        const double du_dpe = 1.0 - di_dpe;
        const double diou_dps = (di_dps * uni - inter * du_dps) / (uni * uni);
        const double diou_dpe = (di_dpe * uni - inter * du_dpe) / (uni * uni);
        const double dcl_dps = (ps < ts) ? -1.0 : 0.0;
        const double dcl_dpe = (pe > te) ? 1.0 : 0.0;
        const double dpen_dps = dc / (cl * cl) - 2.0 * dc * dc / (cl * cl * cl) * dcl_dps;
        const double dpen_dpe = dc / (cl * cl) - 2.0 * dc * dc / (cl * cl * cl) * dcl_dpe;
        if (g_ps) *g_ps = -diou_dps + dpen_dps;
        if (g_pe) *g_pe = -diou_dpe + dpen_dpe;
    }
    return loss;
}

// DIoU over (o^s, o^e) offsets around a shared anchor coordinate.
inline double diou_loss(const std::array<double, 2>& pred, const std::array<double, 2>& tgt,
                        double coord, std::array<double, 2>* grad = nullptr) {
    if (!(tgt[0] > 0.0) || !(tgt[1] > 0.0)) {
        throw std::invalid_argument("diou_loss: target offsets must be > 0");
    }
    if (pred[0] < 0.0 || pred[1] < 0.0) {
        throw std::invalid_argument("diou_loss: pred offsets must be >= 0");
    }
    double gs = 0.0, ge = 0.0;
    const double loss = diou_segments(coord - pred[0], coord + pred[1], coord - tgt[0],
                                      coord + tgt[1], grad ? &gs : nullptr,
                                      grad ? &ge : nullptr);
    if (grad) (*grad) = {-gs, ge};
    return loss;
}

// Per-video objective: sum over all pyramid levels and (valid) moments of the
// classification loss plus the positive-gated regression loss, divided by
// max(T_+, 1). When grads is given it receives d loss / d head outputs in
// matching shapes.
inline double total_loss(const HeadOutputs& out, const TargetAssignment& tgt,
                         const FocalConfig& fc, HeadOutputs* grads = nullptr,
                         const std::vector<int>* level_valid = nullptr) {
    const std::size_t num_levels = out.class_logits.size();
    if (tgt.levels.size() != num_levels) {
        throw std::invalid_argument("total_loss: level count mismatch");
    }
    if (grads) {
        grads->class_logits.clear();
        grads->offsets.clear();
        for (std::size_t l = 0; l < num_levels; ++l) {
            grads->class_logits.emplace_back(out.class_logits[l].len(),
                                             out.class_logits[l].channels(), 0.0);
            grads->offsets.emplace_back(out.offsets[l].len(), out.offsets[l].channels(),
                                        0.0);
        }
    }
    const double denom = std::max(tgt.num_positive, 1);
    double loss = 0.0;
    std::vector<double> gbuf;
    for (std::size_t l = 0; l < num_levels; ++l) {
        const SeqTensor& logits = out.class_logits[l];
        const SeqTensor& offs = out.offsets[l];
        const int C = logits.channels();
        const int n = level_valid ? (*level_valid)[l] : logits.len();
        if (n > logits.len() || static_cast<std::size_t>(n) != tgt.levels[l].cls.size()) {
            throw std::invalid_argument("total_loss: assignment/output shape mismatch");
        }
        gbuf.resize(C);
        const double stride = static_cast<double>(1 << l);
        for (int t = 0; t < n; ++t) {
            loss += focal_loss(logits.row(t), C, tgt.levels[l].cls[t], fc.alpha, fc.gamma,
                               grads ? gbuf.data() : nullptr) /
                    denom;
            if (grads) {
                double* gr = grads->class_logits[l].row(t);
                for (int c = 0; c < C; ++c) gr[c] += gbuf[c] / denom;
            }
            if (tgt.levels[l].cls[t] >= 0) {
                const std::array<double, 2> pred{offs.at(t, 0), offs.at(t, 1)};
                std::array<double, 2> goff{0.0, 0.0};
                loss += diou_loss(pred, tgt.levels[l].offsets[t], t * stride,
                                  grads ? &goff : nullptr) /
                        denom;
                if (grads) {
                    grads->offsets[l].at(t, 0) += goff[0] / denom;
                    grads->offsets[l].at(t, 1) += goff[1] / denom;
                }
            }
        }
    }
    return loss;
}

} // namespace tal
