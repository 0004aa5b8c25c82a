#include <gtest/gtest.h>

#include <cmath>

#include "tal/tal.hpp"
#include "test_util.hpp"

using namespace tal;
using testutil::oracle_average_precision;

// ---------------------------------------------------------------------------
// tiou
// ---------------------------------------------------------------------------

TEST(TiouTest, IdenticalSegments) { EXPECT_DOUBLE_EQ(tiou(2.0, 7.0, 2.0, 7.0), 1.0); }

TEST(TiouTest, DisjointSegments) { EXPECT_DOUBLE_EQ(tiou(0.0, 2.0, 5.0, 8.0), 0.0); }

TEST(TiouTest, HandCase) { EXPECT_NEAR(tiou(0.0, 10.0, 5.0, 15.0), 5.0 / 15.0, 1e-12); }

TEST(TiouTest, SymmetricBoundedIdentity) {
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const double s1 = rng.uniform(0.0, 50.0), l1 = rng.uniform(0.01, 20.0);
        const double s2 = rng.uniform(0.0, 50.0), l2 = rng.uniform(0.01, 20.0);
        const double a = tiou(s1, s1 + l1, s2, s2 + l2);
        const double b = tiou(s2, s2 + l2, s1, s1 + l1);
        EXPECT_DOUBLE_EQ(a, b);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
        EXPECT_DOUBLE_EQ(tiou(s1, s1 + l1, s1, s1 + l1), 1.0);
        if (a == 1.0) {
            EXPECT_DOUBLE_EQ(s1, s2);
            EXPECT_DOUBLE_EQ(l1, l2);
        }
    }
}

// ---------------------------------------------------------------------------
// decode_predictions
// ---------------------------------------------------------------------------

namespace {

HeadOutputs single_level_outputs(int T, int num_classes) {
    HeadOutputs out;
    out.class_logits.emplace_back(T, num_classes, -40.0);
    out.offsets.emplace_back(T, 2, 0.0);
    return out;
}

double logit_of(double p) { return std::log(p / (1.0 - p)); }

} // namespace

TEST(DecodeTest, SingleMomentHandCase) {
    HeadOutputs out = single_level_outputs(16, 3);
    out.class_logits[0].at(10, 2) = logit_of(0.9);
    out.offsets[0].at(10, 0) = 3.0;
    out.offsets[0].at(10, 1) = 5.0;
    DecodeConfig cfg;
    cfg.score_threshold = 0.5;
    const auto segs = decode_predictions(out, 7, cfg);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].video_id, 7);
    EXPECT_NEAR(segs[0].start, 7.0, 1e-12);
    EXPECT_NEAR(segs[0].end, 15.0, 1e-12);
    EXPECT_EQ(segs[0].label, 2);
    EXPECT_NEAR(segs[0].score, 0.9, 1e-12);
}

TEST(DecodeTest, AllLowLogitsDecodeToNothing) {
    HeadOutputs out = single_level_outputs(8, 2);
    for (double& v : out.offsets[0].data()) v = 1.0;
    DecodeConfig cfg;
    cfg.score_threshold = 0.001;
    EXPECT_TRUE(decode_predictions(out, 0, cfg).empty());
}

TEST(DecodeTest, LevelTwoMomentMapsToStridedCoordinate) {
    HeadOutputs out;
    out.class_logits.emplace_back(8, 1, -40.0);
    out.offsets.emplace_back(8, 2, 0.0);
    out.class_logits.emplace_back(4, 1, -40.0);
    out.offsets.emplace_back(4, 2, 0.0);
    out.class_logits[1].at(3, 0) = logit_of(0.8);
    out.offsets[1].at(3, 0) = 2.0;
    out.offsets[1].at(3, 1) = 2.0;
    DecodeConfig cfg;
    cfg.score_threshold = 0.5;
    const auto segs = decode_predictions(out, 0, cfg);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_NEAR(segs[0].start, 6.0 - 2.0, 1e-12);  // coordinate 3 * 2 = 6
    EXPECT_NEAR(segs[0].end, 6.0 + 2.0, 1e-12);
}

TEST(DecodeTest, TopKLimitsOutput) {
    HeadOutputs out = single_level_outputs(16, 2);
    for (int t = 0; t < 16; ++t) {
        out.class_logits[0].at(t, 0) = logit_of(0.5 + 0.02 * t);
        out.offsets[0].at(t, 0) = 1.0;
        out.offsets[0].at(t, 1) = 1.0;
    }
    DecodeConfig cfg;
    cfg.score_threshold = 0.1;
    cfg.pre_nms_topk = 5;
    const auto segs = decode_predictions(out, 0, cfg);
    ASSERT_EQ(segs.size(), 5u);
    for (std::size_t i = 1; i < segs.size(); ++i) {
        EXPECT_GE(segs[i - 1].score, segs[i].score);
    }
    EXPECT_NEAR(segs[0].score, 0.5 + 0.02 * 15, 1e-12);
}

TEST(DecodeTest, DegenerateSegmentsDropped) {
    HeadOutputs out = single_level_outputs(4, 1);
    out.class_logits[0].at(2, 0) = 40.0;  // offsets stay zero -> zero length
    DecodeConfig cfg;
    EXPECT_TRUE(decode_predictions(out, 0, cfg).empty());
}

// ---------------------------------------------------------------------------
// soft_nms
// ---------------------------------------------------------------------------

TEST(SoftNmsTest, NonOverlappingScoresUnchanged) {
    std::vector<ScoredSegment> segs{{0, 0, 2, 0, 0.9}, {0, 5, 8, 0, 0.7}, {0, 10, 12, 1, 0.5}};
    const auto kept = soft_nms(segs, NmsConfig{});
    ASSERT_EQ(kept.size(), 3u);
    EXPECT_DOUBLE_EQ(kept[0].score, 0.9);
    EXPECT_DOUBLE_EQ(kept[1].score, 0.7);
    EXPECT_DOUBLE_EQ(kept[2].score, 0.5);
}

TEST(SoftNmsTest, IdenticalSegmentsDecayByGaussian) {
    std::vector<ScoredSegment> segs{{0, 1, 4, 0, 0.9}, {0, 1, 4, 1, 0.8}};
    NmsConfig cfg;
    cfg.sigma = 0.5;
    const auto kept = soft_nms(segs, cfg);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_DOUBLE_EQ(kept[0].score, 0.9);
    EXPECT_NEAR(kept[1].score, 0.8 * std::exp(-1.0 / 0.5), 1e-12);
    EXPECT_NEAR(kept[1].score, 0.1083, 5e-5);
}

TEST(SoftNmsTest, OutputScoresNonIncreasing) {
    Rng rng(3);
    std::vector<ScoredSegment> segs;
    for (int i = 0; i < 30; ++i) {
        const double s = rng.uniform(0.0, 20.0);
        segs.push_back({0, s, s + rng.uniform(0.5, 6.0), 0, rng.uniform()});
    }
    const auto kept = soft_nms(segs, NmsConfig{});
    for (std::size_t i = 1; i < kept.size(); ++i) {
        EXPECT_GE(kept[i - 1].score, kept[i].score);
    }
}

TEST(SoftNmsTest, HardModeEnforcesPairwiseTiou) {
    Rng rng(5);
    std::vector<ScoredSegment> segs;
    for (int i = 0; i < 40; ++i) {
        const double s = rng.uniform(0.0, 10.0);
        segs.push_back({0, s, s + rng.uniform(0.5, 4.0), 0, rng.uniform()});
    }
    NmsConfig cfg;
    cfg.soft = false;
    cfg.hard_threshold = 0.5;
    cfg.min_score = 0.0;
    const auto kept = soft_nms(segs, cfg);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t j = i + 1; j < kept.size(); ++j) {
            EXPECT_LE(tiou(kept[i], kept[j]), 0.5);
        }
    }
}

// ---------------------------------------------------------------------------
// average_precision
// ---------------------------------------------------------------------------

TEST(ApTest, PerfectPredictionsScoreOne) {
    std::vector<VideoInstance> gt{{0, {2, 6, 0}}, {0, {10, 14, 0}}, {1, {0, 5, 0}}};
    std::vector<ScoredSegment> preds;
    double score = 0.9;
    for (const VideoInstance& g : gt) {
        preds.push_back({g.video_id, g.inst.start, g.inst.end, 0, score});
        score -= 0.1;
    }
    EXPECT_DOUBLE_EQ(average_precision(preds, gt, 0.5), 1.0);
}

TEST(ApTest, LowerScoredMatchGivesHalf) {
    std::vector<VideoInstance> gt{{0, {10, 20, 0}}};
    std::vector<ScoredSegment> preds{
        {0, 40, 50, 0, 0.9},  // misses
        {0, 10, 20, 0, 0.8},  // matches
    };
    EXPECT_DOUBLE_EQ(average_precision(preds, gt, 0.5), 0.5);
}

TEST(ApTest, EmptyGroundTruthThrows) {
    std::vector<ScoredSegment> preds{{0, 1, 2, 0, 0.9}};
    EXPECT_THROW(average_precision(preds, {}, 0.5), std::invalid_argument);
}

TEST(ApTest, MatchesBruteForceOracleOnRandomCases) {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<VideoInstance> gt;
        const int num_gt = 1 + rng.uniform_int(5);
        for (int i = 0; i < num_gt; ++i) {
            const double s = rng.uniform(0.0, 30.0);
            gt.push_back({rng.uniform_int(2), {s, s + rng.uniform(1.0, 8.0), 0}});
        }
        std::vector<ScoredSegment> preds;
        const int num_preds = rng.uniform_int(9);
        for (int i = 0; i < num_preds; ++i) {
            const double s = rng.uniform(0.0, 30.0);
            preds.push_back({rng.uniform_int(2), s, s + rng.uniform(1.0, 8.0), 0,
                             rng.uniform()});
        }
        const double thr = 0.1 + 0.15 * rng.uniform_int(5);
        EXPECT_NEAR(average_precision(preds, gt, thr),
                    oracle_average_precision(preds, gt, thr), 1e-12);
    }
}

TEST(ApTest, InvariantToMonotoneScoreTransforms) {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<VideoInstance> gt;
        for (int i = 0; i < 4; ++i) {
            const double s = rng.uniform(0.0, 30.0);
            gt.push_back({0, {s, s + rng.uniform(1.0, 6.0), 0}});
        }
        std::vector<ScoredSegment> preds;
        for (int i = 0; i < 7; ++i) {
            const double s = rng.uniform(0.0, 30.0);
            preds.push_back({0, s, s + rng.uniform(1.0, 6.0), 0, rng.uniform()});
        }
        const double base = average_precision(preds, gt, 0.4);
        for (ScoredSegment& p : preds) p.score = 1.0 / (1.0 + std::exp(-(3.0 * p.score + 1.0)));
        EXPECT_DOUBLE_EQ(average_precision(preds, gt, 0.4), base);
    }
}

// ---------------------------------------------------------------------------
// mean_ap
// ---------------------------------------------------------------------------

TEST(MeanApTest, PerfectPredictionsAverageOne) {
    std::vector<VideoInstance> gt{{0, {2, 6, 0}}, {0, {8, 14, 1}}, {1, {3, 9, 1}}};
    std::vector<ScoredSegment> preds;
    for (const VideoInstance& g : gt) {
        preds.push_back({g.video_id, g.inst.start, g.inst.end, g.inst.label, 0.9});
    }
    const EvalReport report = mean_ap(preds, gt, default_tiou_thresholds());
    EXPECT_DOUBLE_EQ(report.average_map, 1.0);
    for (double m : report.map_per_threshold) EXPECT_DOUBLE_EQ(m, 1.0);
}

TEST(MeanApTest, NoPredictionsScoreZero) {
    std::vector<VideoInstance> gt{{0, {2, 6, 0}}};
    const EvalReport report = mean_ap({}, gt, default_tiou_thresholds());
    EXPECT_DOUBLE_EQ(report.average_map, 0.0);
    EXPECT_EQ(report.num_gt, 1);
    EXPECT_EQ(report.num_predictions, 0);
}

TEST(MeanApTest, ClassesAbsentFromGtAreSkipped) {
    std::vector<VideoInstance> gt{{0, {2, 6, 0}}};
    std::vector<ScoredSegment> preds{
        {0, 2, 6, 0, 0.9},
        {0, 2, 6, 7, 0.9},  // class 7 has no ground truth; must not count
    };
    const EvalReport report = mean_ap(preds, gt, {0.5});
    EXPECT_DOUBLE_EQ(report.average_map, 1.0);
    EXPECT_EQ(report.per_class_ap.count(7), 0u);
}

TEST(MeanApTest, AverageIsMeanOverThresholds) {
    Rng rng(13);
    std::vector<VideoInstance> gt;
    std::vector<ScoredSegment> preds;
    for (int i = 0; i < 6; ++i) {
        const double s = rng.uniform(0.0, 40.0);
        gt.push_back({0, {s, s + rng.uniform(2.0, 8.0), i % 2}});
        preds.push_back({0, s + rng.uniform(-1.0, 1.0), s + rng.uniform(2.0, 8.0), i % 2,
                         rng.uniform()});
    }
    const EvalReport report = mean_ap(preds, gt, default_tiou_thresholds());
    double mean = 0.0;
    for (double m : report.map_per_threshold) mean += m;
    EXPECT_NEAR(report.average_map, mean / report.map_per_threshold.size(), 1e-12);
}

// ---------------------------------------------------------------------------
// decode . assign round trip
// ---------------------------------------------------------------------------

TEST(RoundTripTest, PerfectOutputsReproduceInstances) {
    const std::vector<ActionInstance> instances{{2.0, 6.0, 0}, {8.0, 20.0, 1}};
    const std::vector<int> lengths = pyramid_lengths(32, 3);
    const TargetAssignment tgt = assign_targets(instances, lengths, AssignConfig{});
    ASSERT_GT(tgt.num_positive, 0);

    HeadOutputs out;
    for (std::size_t l = 0; l < tgt.levels.size(); ++l) {
        const int n = static_cast<int>(tgt.levels[l].cls.size());
        SeqTensor logits(n, 2, -40.0);
        SeqTensor offs(n, 2, 0.0);
        for (int t = 0; t < n; ++t) {
            if (tgt.levels[l].cls[t] >= 0) {
                logits.at(t, tgt.levels[l].cls[t]) = 40.0;
                offs.at(t, 0) = tgt.levels[l].offsets[t][0];
                offs.at(t, 1) = tgt.levels[l].offsets[t][1];
            }
        }
        out.class_logits.push_back(std::move(logits));
        out.offsets.push_back(std::move(offs));
    }
    DecodeConfig cfg;
    cfg.score_threshold = 0.5;
    cfg.pre_nms_topk = 1000;
    const auto segs = decode_predictions(out, 0, cfg);
    ASSERT_GE(segs.size(), instances.size());
    for (const ActionInstance& inst : instances) {
        bool found = false;
        for (const ScoredSegment& s : segs) {
            if (std::fabs(s.start - inst.start) < 1e-9 &&
                std::fabs(s.end - inst.end) < 1e-9 && s.label == inst.label) {
                found = true;
            }
        }
        EXPECT_TRUE(found);
    }
    // every decoded segment is one of the instances, reproduced exactly
    for (const ScoredSegment& s : segs) {
        bool matches = false;
        for (const ActionInstance& inst : instances) {
            if (std::fabs(s.start - inst.start) < 1e-9 &&
                std::fabs(s.end - inst.end) < 1e-9 && s.label == inst.label) {
                matches = true;
            }
        }
        EXPECT_TRUE(matches);
    }
}

// ---------------------------------------------------------------------------
// cosine_similarity_matrix
// ---------------------------------------------------------------------------

TEST(CosineTest, UnitDiagonalAndSymmetry) {
    Rng rng(17);
    const SeqTensor x = testutil::random_seq(10, 5, rng);
    const SeqTensor sim = cosine_similarity_matrix(x);
    for (int i = 0; i < 10; ++i) {
        EXPECT_NEAR(sim.at(i, i), 1.0, 1e-12);
        for (int j = 0; j < 10; ++j) {
            EXPECT_DOUBLE_EQ(sim.at(i, j), sim.at(j, i));
        }
    }
}

TEST(CosineTest, OrthogonalRowsGiveZero) {
    SeqTensor x(2, 2, 0.0);
    x.at(0, 0) = 1.0;
    x.at(1, 1) = 1.0;
    EXPECT_DOUBLE_EQ(cosine_similarity_matrix(x).at(0, 1), 0.0);
}

TEST(CosineTest, ScaleInvariance) {
    Rng rng(19);
    SeqTensor x(2, 4);
    for (int c = 0; c < 4; ++c) {
        x.at(0, c) = rng.normal();
        x.at(1, c) = 2.0 * x.at(0, c);
    }
    EXPECT_NEAR(cosine_similarity_matrix(x).at(0, 1), 1.0, 1e-12);
}

TEST(CosineTest, ZeroRowsMapToZeroSimilarity) {
    SeqTensor x(2, 3, 0.0);
    x.at(1, 0) = 2.0;
    const SeqTensor sim = cosine_similarity_matrix(x);
    EXPECT_DOUBLE_EQ(sim.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(sim.at(0, 1), 0.0);
}
