#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tal {

// Ground-truth action segment in clip-grid units.
struct ActionInstance {
    double start = 0.0;
    double end = 0.0;
    int label = 0;
};

inline void validate_instance(const ActionInstance& a, double seq_len, int num_classes) {
    if (!(a.start >= 0.0) || !(a.end <= seq_len)) {
        throw std::invalid_argument("instance [" + std::to_string(a.start) + ", " +
                                    std::to_string(a.end) + ") outside [0, " +
                                    std::to_string(seq_len) + "]");
    }
    if (!(a.start < a.end)) {
        throw std::invalid_argument("instance start must be < end");
    }
    if (a.label < 0 || a.label >= num_classes) {
        throw std::invalid_argument("instance label " + std::to_string(a.label) +
                                    " outside [0, " + std::to_string(num_classes) + ")");
    }
}

// FCOS-style assignment knobs. A moment is positive for an instance when its
// input coordinate falls in the instance's center region (radius scaled by
// the level stride, clipped to the instance) and the larger target offset
// falls in the level's regression range.
struct AssignConfig {
    double center_radius = 1.5;
    double range_base = 4.0;  // level 1 covers max offsets in [0, range_base), doubling after
    bool prefer_shortest = true;
    std::vector<std::pair<double, double>> explicit_ranges;  // overrides the doubling rule

    std::pair<double, double> level_range(int level, int num_levels) const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        if (!explicit_ranges.empty()) {
            if (static_cast<int>(explicit_ranges.size()) != num_levels) {
                throw std::invalid_argument("AssignConfig: explicit_ranges size mismatch");
            }
            auto r = explicit_ranges[level];
            if (level + 1 == num_levels) r.second = inf;
            return r;
        }
        const double lo = level == 0 ? 0.0 : range_base * static_cast<double>(1 << (level - 1));
        const double hi = level + 1 == num_levels
                              ? inf
                              : range_base * static_cast<double>(1 << level);
        return {lo, hi};
    }
};

struct LevelTargets {
    std::vector<int> cls;                         // -1 = background
    std::vector<std::array<double, 2>> offsets;   // (o^s, o^e), meaningful when cls >= 0
};

struct TargetAssignment {
    std::vector<LevelTargets> levels;
    int num_positive = 0;
};

// level_lengths are the (valid) moment counts of a feature pyramid; the
// moment t of level l sits at input coordinate t * 2^l (0-based level index).
inline TargetAssignment assign_targets(const std::vector<ActionInstance>& instances,
                                       const std::vector<int>& level_lengths,
                                       const AssignConfig& cfg) {
    const int num_levels = static_cast<int>(level_lengths.size());
    TargetAssignment out;
    out.levels.resize(num_levels);
    for (int l = 0; l < num_levels; ++l) {
        const int n = level_lengths[l];
        LevelTargets& lt = out.levels[l];
        lt.cls.assign(n, -1);
        lt.offsets.assign(n, {0.0, 0.0});
        const double stride = static_cast<double>(1 << l);
        const auto [lo, hi] = cfg.level_range(l, num_levels);
        for (int t = 0; t < n; ++t) {
            const double coord = t * stride;
            double best_dur = std::numeric_limits<double>::infinity();
            int best = -1;
            for (std::size_t i = 0; i < instances.size(); ++i) {
                const ActionInstance& a = instances[i];
                const double os = coord - a.start;
                const double oe = a.end - coord;
                if (!(os > 0.0) || !(oe > 0.0)) continue;
                const double center = 0.5 * (a.start + a.end);
                const double radius = cfg.center_radius * stride;
                if (coord < std::max(center - radius, a.start) ||
                    coord > std::min(center + radius, a.end)) {
                    continue;
                }
                const double m = std::max(os, oe);
                if (m < lo || m >= hi) continue;
                const double dur = a.end - a.start;
                if (best < 0 || (cfg.prefer_shortest && dur < best_dur)) {
                    best = static_cast<int>(i);
                    best_dur = dur;
                    lt.cls[t] = a.label;
                    lt.offsets[t] = {os, oe};
                }
            }
            if (lt.cls[t] >= 0) ++out.num_positive;
        }
    }
    return out;
}

} // namespace tal
