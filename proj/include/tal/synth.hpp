#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tal/rng.hpp"
#include "tal/seq_tensor.hpp"
#include "tal/targets.hpp"

namespace tal {

// Desk-scale stand-in for pre-extracted clip embeddings: a shared background
// prototype, per-class prototypes correlated with it, per-clip noise, and a
// moving-average smoothing so adjacent clips end up highly similar.
struct SyntheticDatasetSpec {
    int num_videos = 8;
    int seq_len = 128;    // T
    int input_dim = 16;   // D_in
    int num_classes = 3;  // C
    int min_instances = 1;
    int max_instances = 3;
    int min_duration = 8;
    int max_duration = 24;
    double prototype_scale = 0.5;
    double noise_scale = 0.5;
    int smoothing_width = 3;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_videos < 1) throw std::invalid_argument("synth: num_videos must be >= 1");
        if (seq_len < 1 || input_dim < 1 || num_classes < 1) {
            throw std::invalid_argument("synth: seq_len, input_dim, num_classes must be >= 1");
        }
        if (min_instances < 0 || max_instances < min_instances) {
            throw std::invalid_argument("synth: bad instance count range");
        }
        if (min_duration < 2 || max_duration < min_duration) {
            throw std::invalid_argument("synth: durations must be >= 2 and min <= max");
        }
        if (max_duration > seq_len) {
            throw std::invalid_argument("synth: max_duration exceeds seq_len");
        }
        if (noise_scale < 0.0) throw std::invalid_argument("synth: noise_scale must be >= 0");
        if (smoothing_width < 1) throw std::invalid_argument("synth: smoothing_width must be >= 1");
    }
};

struct VideoSample {
    SeqTensor features;
    std::vector<ActionInstance> instances;
};

inline std::vector<VideoSample> generate_synthetic_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int d = spec.input_dim;
    const int T = spec.seq_len;

    std::vector<double> base(d);
    for (double& v : base) v = rng.normal();
    std::vector<std::vector<double>> protos(spec.num_classes, std::vector<double>(d));
    for (auto& proto : protos) {
        for (int c = 0; c < d; ++c) proto[c] = base[c] + spec.prototype_scale * rng.normal();
    }

    std::vector<VideoSample> out;
    out.reserve(spec.num_videos);
    for (int v = 0; v < spec.num_videos; ++v) {
        const int count =
            spec.min_instances + rng.uniform_int(spec.max_instances - spec.min_instances + 1);
        std::vector<ActionInstance> instances;
        for (int i = 0; i < count; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                const int dur = spec.min_duration +
                                rng.uniform_int(spec.max_duration - spec.min_duration + 1);
                if (dur > T) continue;
                const int start = rng.uniform_int(T - dur + 1);
                bool clear = true;
                // 2-clip gap keeps instances separable after smoothing
                for (const ActionInstance& a : instances) {
                    if (!(start + dur + 2 <= a.start || a.end + 2 <= start)) {
                        clear = false;
                        break;
                    }
                }
                if (!clear) continue;
                instances.push_back({static_cast<double>(start),
                                     static_cast<double>(start + dur),
                                     rng.uniform_int(spec.num_classes)});
                placed = true;
            }
            if (!placed) {
                throw std::runtime_error(
                    "generate_synthetic_dataset: could not place instance " +
                    std::to_string(i) + " of video " + std::to_string(v) +
                    " after 200 attempts");
            }
        }
        std::sort(instances.begin(), instances.end(),
                  [](const ActionInstance& a, const ActionInstance& b) {
                      return a.start < b.start;
                  });

        SeqTensor raw(T, d);
        for (int t = 0; t < T; ++t) {
            const double* proto = base.data();
            for (const ActionInstance& a : instances) {
                if (t >= a.start && t < a.end) {
                    proto = protos[a.label].data();
                    break;
                }
            }
            double* row = raw.row(t);
            for (int c = 0; c < d; ++c) row[c] = proto[c] + spec.noise_scale * rng.normal();
        }

        SeqTensor feat(T, d);
        const int w = spec.smoothing_width;
        const int half = (w - 1) / 2;
        for (int t = 0; t < T; ++t) {
            const int lo = std::max(0, t - half);
            const int hi = std::min(T - 1, t - half + w - 1);
            double* row = feat.row(t);
            for (int s = lo; s <= hi; ++s) {
                const double* rr = raw.row(s);
                for (int c = 0; c < d; ++c) row[c] += rr[c];
            }
            const double inv = 1.0 / (hi - lo + 1);
            for (int c = 0; c < d; ++c) row[c] *= inv;
        }
        out.push_back({std::move(feat), std::move(instances)});
    }
    return out;
}

} // namespace tal
