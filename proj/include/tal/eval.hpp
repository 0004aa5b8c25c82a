#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "tal/losses.hpp"
#include "tal/model.hpp"
#include "tal/targets.hpp"

namespace tal {

struct ScoredSegment {
    int video_id = 0;
    double start = 0.0;
    double end = 0.0;
    int label = 0;
    double score = 0.0;
};

// temporal IoU: the 1D Jaccard index of two segments
inline double tiou(double s1, double e1, double s2, double e2) {
    const double inter = std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
    const double uni = (e1 - s1) + (e2 - s2) - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

inline double tiou(const ScoredSegment& a, const ScoredSegment& b) {
    return tiou(a.start, a.end, b.start, b.end);
}

// deterministic ordering: score desc, then start, end, label
inline bool score_order(const ScoredSegment& a, const ScoredSegment& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.label < b.label;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

struct DecodeConfig {
    double score_threshold = 0.05;
    int pre_nms_topk = 200;
};

// Turns per-moment head outputs into scored segments. Moment t of level l
// sits at coordinate t * 2^l; each class above the score threshold emits
// (coord - o^s, coord + o^e). Keeps the top pre_nms_topk by score and drops
// segments shorter than 1e-6.
inline std::vector<ScoredSegment> decode_predictions(const HeadOutputs& out, int video_id,
                                                     const DecodeConfig& cfg) {
    if (cfg.score_threshold < 0.0 || cfg.score_threshold > 1.0) {
        throw std::invalid_argument("decode: score_threshold must be in [0, 1]");
    }
    if (cfg.pre_nms_topk < 1) throw std::invalid_argument("decode: pre_nms_topk must be >= 1");
    std::vector<ScoredSegment> segs;
    for (std::size_t l = 0; l < out.class_logits.size(); ++l) {
        const SeqTensor& logits = out.class_logits[l];
        const SeqTensor& offs = out.offsets[l];
        const double stride = static_cast<double>(1 << l);
        for (int t = 0; t < logits.len(); ++t) {
            const double coord = t * stride;
            const double s = coord - offs.at(t, 0);
            const double e = coord + offs.at(t, 1);
            if (e - s <= 1e-6) continue;
            const double* lr = logits.row(t);
            for (int c = 0; c < logits.channels(); ++c) {
                const double score = sigmoid(lr[c]);
                if (score > cfg.score_threshold) {
                    segs.push_back({video_id, s, e, c, score});
                }
            }
        }
    }
    std::sort(segs.begin(), segs.end(), score_order);
    if (static_cast<int>(segs.size()) > cfg.pre_nms_topk) segs.resize(cfg.pre_nms_topk);
    return segs;
}

// ---------------------------------------------------------------------------
// NMS
// ---------------------------------------------------------------------------

struct NmsConfig {
    bool soft = true;  // false = classic hard suppression at hard_threshold
    double sigma = 0.5;
    double min_score = 1e-3;
    double hard_threshold = 0.5;
};

// Class-agnostic suppression over one video's segments. Soft mode decays
// overlapping scores by exp(-tIoU^2 / sigma); hard mode removes overlaps
// above hard_threshold. Output is sorted by (decayed) score, non-increasing.
inline std::vector<ScoredSegment> soft_nms(std::vector<ScoredSegment> segs,
                                           const NmsConfig& cfg) {
    if (!(cfg.sigma > 0.0)) throw std::invalid_argument("soft_nms: sigma must be > 0");
    std::vector<ScoredSegment> kept;
    kept.reserve(segs.size());
    while (!segs.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < segs.size(); ++i) {
            if (score_order(segs[i], segs[best])) best = i;
        }
        ScoredSegment top = segs[best];
        segs.erase(segs.begin() + best);
        kept.push_back(top);
        std::vector<ScoredSegment> rest;
        rest.reserve(segs.size());
        for (ScoredSegment& s : segs) {
            const double ov = tiou(top, s);
            if (cfg.soft) {
                s.score *= std::exp(-(ov * ov) / cfg.sigma);
            } else if (ov > cfg.hard_threshold) {
                continue;
            }
            if (s.score >= cfg.min_score) rest.push_back(s);
        }
        segs = std::move(rest);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// AP / mAP
// ---------------------------------------------------------------------------

struct VideoInstance {
    int video_id = 0;
    ActionInstance inst;
};

// All-point interpolated AP for a single class. Predictions are matched
// greedily in score order (ties broken by start, then end) against the
// unmatched ground truth of the same video with the highest tIoU >= threshold.
inline double average_precision(std::vector<ScoredSegment> preds,
                                const std::vector<VideoInstance>& gt, double threshold) {
    if (gt.empty()) {
        throw std::invalid_argument("average_precision: empty ground truth (class must be skipped)");
    }
    if (preds.empty()) return 0.0;
    std::sort(preds.begin(), preds.end(), score_order);

    std::vector<char> matched(gt.size(), 0);
    std::vector<double> precision(preds.size()), recall(preds.size());
    int tp = 0, fp = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        double best_tiou = -1.0;
        int best = -1;
        for (std::size_t j = 0; j < gt.size(); ++j) {
            if (matched[j] || gt[j].video_id != preds[i].video_id) continue;
            const double ov = tiou(preds[i].start, preds[i].end, gt[j].inst.start,
                                   gt[j].inst.end);
            if (ov >= threshold && ov > best_tiou) {
                best_tiou = ov;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            matched[best] = 1;
            ++tp;
        } else {
            ++fp;
        }
        precision[i] = static_cast<double>(tp) / (tp + fp);
        recall[i] = static_cast<double>(tp) / gt.size();
    }
    for (int i = static_cast<int>(preds.size()) - 2; i >= 0; --i) {
        precision[i] = std::max(precision[i], precision[i + 1]);
    }
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

struct EvalReport {
    std::vector<double> thresholds;
    std::map<int, std::vector<double>> per_class_ap;  // class -> AP per threshold
    std::vector<double> map_per_threshold;
    double average_map = 0.0;
    int num_gt = 0;
    int num_predictions = 0;
};

inline std::vector<double> default_tiou_thresholds() {
    return {0.3, 0.4, 0.5, 0.6, 0.7};
}

// Per threshold, mAP is the mean AP over the classes present in the ground
// truth; classes with no ground truth are skipped. average_map is the mean
// over thresholds.
inline EvalReport mean_ap(const std::vector<ScoredSegment>& preds,
                          const std::vector<VideoInstance>& gt,
                          const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw std::invalid_argument("mean_ap: no thresholds");
    EvalReport report;
    report.thresholds = thresholds;
    report.num_gt = static_cast<int>(gt.size());
    report.num_predictions = static_cast<int>(preds.size());

    std::set<int> classes;
    for (const VideoInstance& g : gt) classes.insert(g.inst.label);

    report.map_per_threshold.assign(thresholds.size(), 0.0);
    for (int cls : classes) {
        std::vector<ScoredSegment> cls_preds;
        for (const ScoredSegment& p : preds) {
            if (p.label == cls) cls_preds.push_back(p);
        }
        std::vector<VideoInstance> cls_gt;
        for (const VideoInstance& g : gt) {
            if (g.inst.label == cls) cls_gt.push_back(g);
        }
        std::vector<double>& aps = report.per_class_ap[cls];
        for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
            const double ap = average_precision(cls_preds, cls_gt, thresholds[ti]);
            aps.push_back(ap);
            report.map_per_threshold[ti] += ap;
        }
    }
    if (!classes.empty()) {
        for (double& m : report.map_per_threshold) m /= static_cast<double>(classes.size());
    }
    double sum = 0.0;
    for (double m : report.map_per_threshold) sum += m;
    report.average_map = sum / static_cast<double>(thresholds.size());
    return report;
}

// ---------------------------------------------------------------------------
// Similarity diagnostics
// ---------------------------------------------------------------------------

// S[i][j] = <x_i, x_j> / (|x_i| |x_j|); zero-norm rows map to similarity 0.
inline SeqTensor cosine_similarity_matrix(const SeqTensor& x) {
    const int T = x.len(), C = x.channels();
    std::vector<double> norms(T);
    for (int t = 0; t < T; ++t) {
        double sq = 0.0;
        const double* r = x.row(t);
        for (int c = 0; c < C; ++c) sq += r[c] * r[c];
        norms[t] = std::sqrt(sq);
    }
    SeqTensor sim(T, T, 0.0);
    for (int i = 0; i < T; ++i) {
        if (norms[i] == 0.0) continue;
        for (int j = i; j < T; ++j) {
            if (norms[j] == 0.0) continue;
            double dot = 0.0;
            const double* ri = x.row(i);
            const double* rj = x.row(j);
            for (int c = 0; c < C; ++c) dot += ri[c] * rj[c];
            const double s = dot / (norms[i] * norms[j]);
            sim.at(i, j) = s;
            sim.at(j, i) = s;
        }
    }
    return sim;
}

inline double mean_adjacent_similarity(const SeqTensor& x) {
    if (x.len() < 2) return 1.0;
    double sum = 0.0;
    for (int t = 0; t + 1 < x.len(); ++t) {
        double dot = 0.0, n1 = 0.0, n2 = 0.0;
        const double* a = x.row(t);
        const double* b = x.row(t + 1);
        for (int c = 0; c < x.channels(); ++c) {
            dot += a[c] * b[c];
            n1 += a[c] * a[c];
            n2 += b[c] * b[c];
        }
        const double denom = std::sqrt(n1) * std::sqrt(n2);
        sum += denom == 0.0 ? 0.0 : dot / denom;
    }
    return sum / (x.len() - 1);
}

} // namespace tal
