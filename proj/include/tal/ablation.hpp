#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tal/eval.hpp"
#include "tal/model.hpp"
#include "tal/synth.hpp"
#include "tal/trainer.hpp"

namespace tal {

// One benchmark run: generate data, train, decode and score the held-out
// videos. The per-seed dataset is shared by every variant so rows are
// comparable.
struct BenchmarkSpec {
    SyntheticDatasetSpec data;  // num_videos is overridden to train + val
    int train_videos = 12;
    int val_videos = 6;
    ModelConfig model;
    TrainConfig train;
    DecodeConfig decode;
    NmsConfig nms;
    std::vector<double> thresholds = default_tiou_thresholds();
};

struct AblationRow {
    std::string label;  // variant name, or kernel size for sweeps
    std::uint64_t seed = 0;
    double avg_map = 0.0;
    std::vector<double> map_per_threshold;
    long long params = 0;
    unsigned long long macs = 0;
};

struct AblationTable {
    std::string label_column = "variant";
    std::vector<double> thresholds;
    std::vector<AblationRow> rows;
};

inline AblationRow run_benchmark_once(const BenchmarkSpec& spec, const ModelConfig& mcfg,
                                      std::uint64_t seed) {
    SyntheticDatasetSpec data = spec.data;
    data.num_videos = spec.train_videos + spec.val_videos;
    data.seed = seed;
    std::vector<VideoSample> all = generate_synthetic_dataset(data);
    std::vector<VideoSample> train_set(all.begin(), all.begin() + spec.train_videos);
    std::vector<VideoSample> val_set(all.begin() + spec.train_videos, all.end());

    TrainConfig tcfg = spec.train;
    tcfg.seed = seed;
    TrainResult result = train(train_set, mcfg, tcfg);

    std::vector<ScoredSegment> preds;
    std::vector<VideoInstance> gt;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
        const int vid = static_cast<int>(i);
        HeadOutputs out = model_forward(val_set[i].features, result.ema, mcfg);
        std::vector<ScoredSegment> segs = decode_predictions(out, vid, spec.decode);
        segs = soft_nms(std::move(segs), spec.nms);
        preds.insert(preds.end(), segs.begin(), segs.end());
        for (const ActionInstance& a : val_set[i].instances) gt.push_back({vid, a});
    }
    EvalReport report = mean_ap(preds, gt, spec.thresholds);

    AblationRow row;
    row.seed = seed;
    row.avg_map = report.average_map;
    row.map_per_threshold = report.map_per_threshold;
    row.params = count_params(make_params(mcfg));
    row.macs = count_macs(mcfg, data.seq_len);
    return row;
}

inline AblationTable run_ablation(const BenchmarkSpec& spec,
                                  const std::vector<TcmVariant>& variants,
                                  const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("run_ablation: need at least one seed");
    AblationTable table;
    table.label_column = "variant";
    table.thresholds = spec.thresholds;
    for (TcmVariant variant : variants) {
        ModelConfig mcfg = spec.model;
        mcfg.tcm_variant = variant;
        for (std::uint64_t seed : seeds) {
            AblationRow row = run_benchmark_once(spec, mcfg, seed);
            row.label = to_string(variant);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

inline AblationTable run_kernel_sweep(const BenchmarkSpec& spec,
                                      const std::vector<int>& kernels,
                                      const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("run_kernel_sweep: need at least one seed");
    AblationTable table;
    table.label_column = "kernel";
    table.thresholds = spec.thresholds;
    for (int k : kernels) {
        ModelConfig mcfg = spec.model;
        mcfg.tcm_kernel = k;
        for (std::uint64_t seed : seeds) {
            AblationRow row = run_benchmark_once(spec, mcfg, seed);
            row.label = std::to_string(k);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

namespace detail {

struct Aggregate {
    double mean = 0.0, lo = 0.0, hi = 0.0;
    int n = 0;
};

inline std::vector<std::pair<std::string, Aggregate>> aggregate_rows(
    const AblationTable& table) {
    std::vector<std::pair<std::string, Aggregate>> out;
    for (const AblationRow& row : table.rows) {
        Aggregate* agg = nullptr;
        for (auto& [label, a] : out) {
            if (label == row.label) agg = &a;
        }
        if (!agg) {
            out.emplace_back(row.label, Aggregate{0.0, row.avg_map, row.avg_map, 0});
            agg = &out.back().second;
        }
        agg->mean += row.avg_map;
        agg->lo = std::min(agg->lo, row.avg_map);
        agg->hi = std::max(agg->hi, row.avg_map);
        agg->n += 1;
    }
    for (auto& [label, a] : out) a.mean /= a.n;
    return out;
}

inline std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

} // namespace detail

inline std::string format_table_csv(const AblationTable& table) {
    std::string out = table.label_column + ",seed,avg_map";
    for (double t : table.thresholds) out += ",map@" + detail::fmt("%.2f", t);
    out += ",params,macs\n";
    for (const AblationRow& row : table.rows) {
        out += row.label + "," + std::to_string(row.seed) + "," +
               detail::fmt("%.6f", row.avg_map);
        for (double m : row.map_per_threshold) out += "," + detail::fmt("%.6f", m);
        out += "," + std::to_string(row.params) + "," + std::to_string(row.macs) + "\n";
    }
    for (const auto& [label, agg] : detail::aggregate_rows(table)) {
        out += label + ",mean," + detail::fmt("%.6f", agg.mean);
        for (std::size_t i = 0; i < table.thresholds.size(); ++i) out += ",";
        out += ",,\n";
    }
    return out;
}

inline std::string format_table_text(const AblationTable& table) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-10s %6s %9s", table.label_column.c_str(), "seed",
                  "avg_mAP");
    out += buf;
    for (double t : table.thresholds) {
        std::snprintf(buf, sizeof(buf), " %9s", ("mAP@" + detail::fmt("%.1f", t)).c_str());
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), " %12s %14s\n", "params", "macs");
    out += buf;
    for (const AblationRow& row : table.rows) {
        std::snprintf(buf, sizeof(buf), "%-10s %6llu %9.4f", row.label.c_str(),
                      static_cast<unsigned long long>(row.seed), row.avg_map);
        out += buf;
        for (double m : row.map_per_threshold) {
            std::snprintf(buf, sizeof(buf), " %9.4f", m);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), " %12lld %14llu\n", row.params, row.macs);
        out += buf;
    }
    out += "\naggregate (mean +/- half-range of avg_mAP):\n";
    for (const auto& [label, agg] : detail::aggregate_rows(table)) {
        std::snprintf(buf, sizeof(buf), "%-10s %9.4f +/- %6.4f  over %d seed(s)\n",
                      label.c_str(), agg.mean, 0.5 * (agg.hi - agg.lo), agg.n);
        out += buf;
    }
    return out;
}

} // namespace tal
