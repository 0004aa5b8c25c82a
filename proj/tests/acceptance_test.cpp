// Acceptance suite: one test per criterion, each printing an [ACCEPT] line.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <tuple>

#include "tal/tal.hpp"
#include "test_util.hpp"

using namespace tal;
namespace fs = std::filesystem;

namespace {

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int criterion, const char* what) {
    std::printf("[ACCEPT] criterion %d: %s - %s\n", criterion,
                ::testing::Test::HasFailure() ? "FAIL" : "PASS", what);
    std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Criterion 6 benchmark configuration (pinned here, used by criteria 6/10)
// ---------------------------------------------------------------------------

BenchmarkSpec benchmark_spec() {
    BenchmarkSpec spec;
    spec.data.seq_len = 128;
    spec.data.input_dim = 16;
    spec.data.num_classes = 3;
    spec.data.min_instances = 1;
    spec.data.max_instances = 3;
    spec.data.min_duration = 8;
    spec.data.max_duration = 24;
    spec.data.noise_scale = 0.75;
    spec.data.prototype_scale = 0.5;
    spec.data.smoothing_width = 7;
    spec.train_videos = 12;
    spec.val_videos = 6;
    spec.model.input_dim = 16;
    spec.model.embed_dim = 32;
    spec.model.num_levels = 4;
    spec.model.num_classes = 3;
    spec.train.steps = 600;
    spec.train.lr = 0.005;
    spec.train.batch_size = 4;
    spec.train.ema_decay = 0.98;
    spec.decode.score_threshold = 0.02;
    return spec;
}

const std::vector<std::uint64_t> kBenchSeeds{1, 2, 3, 4, 5};

} // namespace

// ---------------------------------------------------------------------------
// 1. Gradient suite
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion1GradientSuite) {
    Timer timer;
    Rng rng(101);

    // primitives: rel err < 1e-6 at h = 1e-5
    {
        SeqTensor x = testutil::random_seq(8, 4, rng);
        ConvParam p(3, 4, 3);
        for (double& w : p.w) w = rng.normal();
        for (double& b : p.b) b = rng.normal();
        ConvParam gp(3, 4, 3);
        GradTape tape;
        const int x_id = tape.leaf(x);
        const int out = taped::conv1d(tape, x_id, &p, &gp, 1, 1, 8, 8);
        tape.grad(out) = tape.value(out);
        tape.backward();
        auto loss = [&]() { return testutil::half_sq(conv1d(x, p, 1, 1)); };
        EXPECT_LT(testutil::max_rel_err(tape.grad(x_id).data(),
                                        testutil::finite_diff(x.data(), loss)),
                  1e-6);
        EXPECT_LT(testutil::max_rel_err(gp.w, testutil::finite_diff(p.w, loss)), 1e-6);
        EXPECT_LT(testutil::max_rel_err(gp.b, testutil::finite_diff(p.b, loss)), 1e-6);
    }
    {
        SeqTensor x = testutil::random_seq(7, 4, rng);
        NormParam p(4);
        for (double& g : p.gamma) g = 1.0 + 0.2 * rng.normal();
        NormParam gp(4);
        std::fill(gp.gamma.begin(), gp.gamma.end(), 0.0);
        GradTape tape;
        const int x_id = tape.leaf(x);
        const int out = taped::layer_norm(tape, x_id, &p, &gp, 1e-5);
        tape.grad(out) = tape.value(out);
        tape.backward();
        auto loss = [&]() { return testutil::half_sq(layer_norm(x, p, 1e-5)); };
        EXPECT_LT(testutil::max_rel_err(tape.grad(x_id).data(),
                                        testutil::finite_diff(x.data(), loss)),
                  1e-6);
        EXPECT_LT(testutil::max_rel_err(gp.gamma, testutil::finite_diff(p.gamma, loss)),
                  1e-6);
    }
    for (int op = 0; op < 4; ++op) {
        SeqTensor x = testutil::random_seq(8, 3, rng);
        GradTape tape;
        const int x_id = tape.leaf(x);
        int out = -1;
        std::function<double()> loss;
        switch (op) {
            case 0:
                out = taped::relu(tape, x_id);
                loss = [&]() { return testutil::half_sq(relu(x)); };
                break;
            case 1:
                out = taped::maxpool1d(tape, x_id, 3, 2, 1, 4, 8);
                loss = [&]() { return testutil::half_sq(maxpool1d(x, 3, 2, 1)); };
                break;
            case 2:
                out = taped::avgpool1d(tape, x_id, 3, 2, 1, 4, 8);
                loss = [&]() { return testutil::half_sq(avgpool1d(x, 3, 2, 1)); };
                break;
            default:
                out = taped::subsample(tape, x_id, 2);
                loss = [&]() { return testutil::half_sq(subsample(x, 2)); };
                break;
        }
        tape.grad(out) = tape.value(out);
        tape.backward();
        EXPECT_LT(testutil::max_rel_err(tape.grad(x_id).data(),
                                        testutil::finite_diff(x.data(), loss)),
                  1e-6)
            << "op " << op;
    }
    {
        SeqTensor x = testutil::random_seq(6, 3, rng);
        AttnParam p(3);
        for (auto* m : {&p.wq, &p.wk, &p.wv, &p.wo}) {
            for (double& w : *m) w = 0.6 * rng.normal();
        }
        AttnParam gp(3);
        GradTape tape;
        const int x_id = tape.leaf(x);
        const int out = taped::self_attention(tape, x_id, &p, &gp, 2, 6);
        tape.grad(out) = tape.value(out);
        tape.backward();
        auto loss = [&]() { return testutil::half_sq(self_attention(x, p, 2)); };
        EXPECT_LT(testutil::max_rel_err(tape.grad(x_id).data(),
                                        testutil::finite_diff(x.data(), loss)),
                  1e-6);
        for (auto [pv, gv] : {std::pair{&p.wq, &gp.wq}, std::pair{&p.wk, &gp.wk},
                              std::pair{&p.wv, &gp.wv}, std::pair{&p.wo, &gp.wo}}) {
            EXPECT_LT(testutil::max_rel_err(*gv, testutil::finite_diff(*pv, loss)), 1e-6);
        }
    }

    // full model loss end-to-end: rel err < 1e-5 on a T=8, D=4, C=2, L=3 instance
    for (TcmVariant variant : {TcmVariant::kMaxPool, TcmVariant::kAvgPool,
                               TcmVariant::kSubsample, TcmVariant::kConv,
                               TcmVariant::kAttention}) {
        ModelConfig cfg;
        cfg.input_dim = 4;
        cfg.embed_dim = 4;
        cfg.num_levels = 3;
        cfg.num_classes = 2;
        cfg.tcm_variant = variant;
        ModelParams params = init_params(cfg, 7);
        SeqTensor x = testutil::random_seq(8, 4, rng);
        TargetAssignment tgt = assign_targets({{1.0, 5.0, 0}, {2.0, 7.5, 1}},
                                              pyramid_lengths(8, 3), AssignConfig{});
        FocalConfig fc;

        ModelParams grads = zeros_like(params);
        GradTape tape;
        TapedForward fw = model_forward_taped(tape, x, 8, params, &grads, cfg);
        HeadOutputs ograds;
        total_loss(fw.outputs, tgt, fc, &ograds, &fw.level_valid);
        for (std::size_t l = 0; l < fw.logit_ids.size(); ++l) {
            tape.grad(fw.logit_ids[l]) = ograds.class_logits[l];
            tape.grad(fw.offset_ids[l]) = ograds.offsets[l];
        }
        tape.backward();

        auto loss_at = [&]() { return total_loss(model_forward(x, params, cfg), tgt, fc); };
        auto prefs = tensor_refs(params);
        auto grefs = tensor_refs(grads);
        for (std::size_t k = 0; k < prefs.size(); ++k) {
            std::vector<double>& pv = *prefs[k].second;
            const std::vector<double>& gv = *grefs[k].second;
            const std::size_t step = pv.size() / 3 + 1;
            for (std::size_t i = 0; i < pv.size(); i += step) {
                const double save = pv[i];
                const double h = 1e-5;
                pv[i] = save + h;
                const double lp = loss_at();
                pv[i] = save - h;
                const double lm = loss_at();
                pv[i] = save;
                EXPECT_LT(testutil::rel_err((lp - lm) / (2 * h), gv[i]), 1e-5)
                    << to_string(variant) << " " << prefs[k].first;
            }
        }
    }

    EXPECT_LT(timer.seconds(), 30.0);
    report(1, "op and full-model gradients match finite differences");
}

// ---------------------------------------------------------------------------
// 2. Pyramid structure
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion2PyramidStructure) {
    Timer timer;
    Rng rng(202);
    {
        ModelConfig cfg;
        cfg.input_dim = 3;
        cfg.embed_dim = 4;
        cfg.num_levels = 3;
        cfg.num_classes = 2;
        ModelParams p = init_params(cfg, 1);
        FeaturePyramid pyr = build_pyramid(testutil::random_seq(16, 4, rng), p, cfg);
        ASSERT_EQ(pyr.levels.size(), 3u);
        EXPECT_EQ(pyr.levels[0].len(), 16);
        EXPECT_EQ(pyr.levels[1].len(), 8);
        EXPECT_EQ(pyr.levels[2].len(), 4);
    }
    for (int trial = 0; trial < 20; ++trial) {
        const int L = 2 + rng.uniform_int(4);
        const int T = (1 << (L - 1)) + rng.uniform_int(64);
        ModelConfig cfg;
        cfg.input_dim = 3;
        cfg.embed_dim = 4;
        cfg.num_levels = L;
        cfg.num_classes = 2;
        ModelParams p = init_params(cfg, trial);
        FeaturePyramid pyr = build_pyramid(testutil::random_seq(T, 4, rng), p, cfg);
        int expect = T;
        for (int l = 0; l < L; ++l) {
            EXPECT_EQ(pyr.levels[l].len(), expect) << "T=" << T << " L=" << L;
            expect = (expect + 1) / 2;
        }
    }
    EXPECT_LT(timer.seconds(), 1.0);
    report(2, "pyramid level lengths follow the exact halving rule");
}

// ---------------------------------------------------------------------------
// 3. Metric oracle
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion3MetricOracle) {
    Timer timer;
    Rng rng(303);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<VideoInstance> gt;
        const int num_gt = 1 + rng.uniform_int(5);
        for (int i = 0; i < num_gt; ++i) {
            const double s = rng.uniform(0.0, 30.0);
            gt.push_back({rng.uniform_int(3), {s, s + rng.uniform(0.5, 9.0), 0}});
        }
        std::vector<ScoredSegment> preds;
        const int num_preds = rng.uniform_int(9);
        for (int i = 0; i < num_preds; ++i) {
            const double s = rng.uniform(0.0, 30.0);
            preds.push_back(
                {rng.uniform_int(3), s, s + rng.uniform(0.5, 9.0), 0, rng.uniform()});
        }
        const double thr = 0.1 + 0.15 * rng.uniform_int(5);
        EXPECT_NEAR(average_precision(preds, gt, thr),
                    testutil::oracle_average_precision(preds, gt, thr), 1e-12);
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const double s1 = rng.uniform(0.0, 50.0), l1 = rng.uniform(0.01, 20.0);
        const double s2 = rng.uniform(0.0, 50.0), l2 = rng.uniform(0.01, 20.0);
        const double a = tiou(s1, s1 + l1, s2, s2 + l2);
        EXPECT_DOUBLE_EQ(a, tiou(s2, s2 + l2, s1, s1 + l1));
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
        EXPECT_DOUBLE_EQ(tiou(s1, s1 + l1, s1, s1 + l1), 1.0);
    }
    EXPECT_LT(timer.seconds(), 10.0);
    report(3, "AP matches the brute-force oracle; tIoU properties hold");
}

// ---------------------------------------------------------------------------
// 4. Loss sanity
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion4LossSanity) {
    // perfect predictions
    TargetAssignment tgt = assign_targets({{2.0, 6.0, 0}, {9.0, 14.0, 1}},
                                          pyramid_lengths(16, 3), AssignConfig{});
    ASSERT_GT(tgt.num_positive, 0);
    HeadOutputs out;
    for (const LevelTargets& lt : tgt.levels) {
        const int n = static_cast<int>(lt.cls.size());
        SeqTensor logits(n, 2, -40.0);
        SeqTensor offs(n, 2, 0.1);
        for (int t = 0; t < n; ++t) {
            if (lt.cls[t] >= 0) {
                logits.at(t, lt.cls[t]) = 40.0;
                offs.at(t, 0) = lt.offsets[t][0];
                offs.at(t, 1) = lt.offsets[t][1];
            }
        }
        out.class_logits.push_back(std::move(logits));
        out.offsets.push_back(std::move(offs));
    }
    EXPECT_LT(total_loss(out, tgt, FocalConfig{}), 1e-10);

    // DIoU hand cases: 0, 0.5, 1.4444...
    EXPECT_NEAR(diou_loss({2.0, 3.0}, {2.0, 3.0}, 5.0), 0.0, 1e-9);
    EXPECT_NEAR(diou_loss({2.0, 2.0}, {1.0, 1.0}, 5.0), 0.5, 1e-9);
    EXPECT_NEAR(diou_segments(0.0, 2.0, 4.0, 6.0), 1.0 + 16.0 / 36.0, 1e-9);

    // focal closed form
    std::vector<double> logits{0.0};
    EXPECT_NEAR(focal_loss(logits, 0, 0.25, 2.0), 0.04332, 1e-5);

    report(4, "loss hand cases and perfect-prediction limits match");
}

// ---------------------------------------------------------------------------
// 5. Overfit check
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion5Overfit) {
    Timer timer;
    SyntheticDatasetSpec dspec;
    dspec.num_videos = 4;
    dspec.seq_len = 64;
    dspec.input_dim = 16;
    dspec.num_classes = 2;
    dspec.min_instances = 1;
    dspec.max_instances = 3;
    dspec.min_duration = 6;
    dspec.max_duration = 16;
    dspec.seed = 1;
    const auto dataset = generate_synthetic_dataset(dspec);

    ModelConfig mcfg;
    mcfg.input_dim = 16;
    mcfg.embed_dim = 32;
    mcfg.num_levels = 4;
    mcfg.num_classes = 2;
    mcfg.tcm_variant = TcmVariant::kMaxPool;

    TrainConfig tcfg;
    tcfg.steps = 400;  // <= 500
    tcfg.lr = 0.01;
    tcfg.batch_size = 4;
    tcfg.ema_decay = 0.98;
    tcfg.seed = 1;
    const TrainResult result = train(dataset, mcfg, tcfg);

    DecodeConfig dcfg;
    dcfg.score_threshold = 0.02;
    std::vector<ScoredSegment> preds;
    std::vector<VideoInstance> gt;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        auto segs = soft_nms(
            decode_predictions(model_forward(dataset[i].features, result.ema, mcfg),
                               static_cast<int>(i), dcfg),
            NmsConfig{});
        preds.insert(preds.end(), segs.begin(), segs.end());
        for (const ActionInstance& a : dataset[i].instances) {
            gt.push_back({static_cast<int>(i), a});
        }
    }
    const EvalReport report_map = mean_ap(preds, gt, default_tiou_thresholds());
    std::printf("  overfit training-set average mAP: %.4f\n", report_map.average_map);
    EXPECT_GE(report_map.average_map, 0.90);
    EXPECT_LT(timer.seconds(), 180.0);
    report(5, "maxpool variant overfits 4 videos to >= 0.90 average mAP");
}

// ---------------------------------------------------------------------------
// 6. Desk-scale TCM-block trend
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion6BlockTrend) {
    Timer timer;
    const BenchmarkSpec spec = benchmark_spec();

    // the premise: adjacent clips are highly similar
    {
        SyntheticDatasetSpec d = spec.data;
        d.num_videos = 6;
        d.seed = 1;
        double sim = 0.0;
        const auto ds = generate_synthetic_dataset(d);
        for (const VideoSample& v : ds) sim += mean_adjacent_similarity(v.features);
        sim /= ds.size();
        std::printf("  mean adjacent cosine similarity: %.4f\n", sim);
        EXPECT_GE(sim, 0.9);
    }

    const std::vector<TcmVariant> variants{TcmVariant::kMaxPool, TcmVariant::kAvgPool,
                                           TcmVariant::kSubsample, TcmVariant::kConv};
    const AblationTable table = run_ablation(spec, variants, kBenchSeeds);
    std::printf("%s", format_table_text(table).c_str());

    std::map<std::string, double> mean;
    std::map<std::string, int> count;
    for (const AblationRow& row : table.rows) {
        mean[row.label] += row.avg_map;
        count[row.label] += 1;
    }
    for (auto& [label, m] : mean) m /= count[label];

    EXPECT_GE(mean["maxpool"], mean["avgpool"]);
    EXPECT_GE(mean["avgpool"], mean["subsample"]);
    EXPECT_GE(mean["maxpool"], mean["conv"]);
    EXPECT_LT(timer.seconds(), 1200.0);
    report(6, "seed-mean ordering maxpool >= avgpool >= subsample and maxpool >= conv");
}

// ---------------------------------------------------------------------------
// 7. Efficiency accounting
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion7EfficiencyAccounting) {
    Timer timer;
    for (const auto& [d_in, d, levels, classes] :
         std::vector<std::tuple<int, int, int, int>>{
             {16, 32, 4, 3}, {2048, 512, 6, 20}, {64, 48, 5, 7}}) {
        ModelConfig cfg;
        cfg.input_dim = d_in;
        cfg.embed_dim = d;
        cfg.num_levels = levels;
        cfg.num_classes = classes;
        auto params_of = [&cfg](TcmVariant v) {
            ModelConfig c = cfg;
            c.tcm_variant = v;
            return count_params(make_params(c));
        };
        auto macs_of = [&cfg](TcmVariant v) {
            ModelConfig c = cfg;
            c.tcm_variant = v;
            return count_macs(c, 2304);
        };
        const long long pool = params_of(TcmVariant::kMaxPool);
        EXPECT_EQ(pool, params_of(TcmVariant::kAvgPool));
        EXPECT_EQ(pool, params_of(TcmVariant::kSubsample));
        EXPECT_LT(pool, params_of(TcmVariant::kConv));
        EXPECT_LT(pool, params_of(TcmVariant::kAttention));
        EXPECT_LT(macs_of(TcmVariant::kMaxPool), macs_of(TcmVariant::kConv));
        EXPECT_LT(macs_of(TcmVariant::kMaxPool), macs_of(TcmVariant::kAttention));
        EXPECT_EQ(macs_of(TcmVariant::kMaxPool), macs_of(TcmVariant::kSubsample));
    }
    // full-scale reference magnitudes, documented (not asserted against the
    // originally reported 7.1M / 30.5M params and 16.4 / 45.6 GMACs)
    ModelConfig full;
    full.input_dim = 2048;
    full.embed_dim = 512;
    full.num_levels = 6;
    full.num_classes = 20;
    std::printf("  full-scale pooling backbone: %.2fM params, %.1f GMACs @ T=2304\n",
                count_params(make_params(full)) / 1e6, count_macs(full, 2304) / 1e9);
    full.tcm_variant = TcmVariant::kConv;
    std::printf("  full-scale conv TCM:         %.2fM params, %.1f GMACs @ T=2304\n",
                count_params(make_params(full)) / 1e6, count_macs(full, 2304) / 1e9);
    EXPECT_LT(timer.seconds(), 1.0);
    report(7, "pooling variants tie on params and undercut learned blocks on MACs");
}

// ---------------------------------------------------------------------------
// 8. Definitional equivalence
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion8KernelOneEqualsSubsample) {
    SyntheticDatasetSpec dspec;
    dspec.num_videos = 3;
    dspec.seq_len = 48;
    dspec.input_dim = 8;
    dspec.num_classes = 2;
    dspec.min_duration = 6;
    dspec.max_duration = 14;
    dspec.seed = 9;
    const auto dataset = generate_synthetic_dataset(dspec);

    ModelConfig pool_cfg;
    pool_cfg.input_dim = 8;
    pool_cfg.embed_dim = 16;
    pool_cfg.num_levels = 3;
    pool_cfg.num_classes = 2;
    pool_cfg.tcm_variant = TcmVariant::kMaxPool;
    pool_cfg.tcm_kernel = 1;
    ModelConfig sub_cfg = pool_cfg;
    sub_cfg.tcm_variant = TcmVariant::kSubsample;
    sub_cfg.tcm_kernel = 3;

    TrainConfig tcfg;
    tcfg.steps = 25;
    tcfg.lr = 3e-3;
    tcfg.batch_size = 2;
    tcfg.seed = 5;

    const TrainResult a = train(dataset, pool_cfg, tcfg);
    const TrainResult b = train(dataset, sub_cfg, tcfg);
    EXPECT_EQ(a.loss_history, b.loss_history);
    auto ra = tensor_refs(const_cast<ModelParams&>(a.params));
    auto rb = tensor_refs(const_cast<ModelParams&>(b.params));
    for (std::size_t i = 0; i < ra.size(); ++i) {
        EXPECT_EQ(*ra[i].second, *rb[i].second) << ra[i].first;
    }
    auto ea = tensor_refs(const_cast<ModelParams&>(a.ema));
    auto eb = tensor_refs(const_cast<ModelParams&>(b.ema));
    for (std::size_t i = 0; i < ea.size(); ++i) {
        EXPECT_EQ(*ea[i].second, *eb[i].second);
    }
    report(8, "kernel-1 stride-2 maxpool training is bit-identical to subsample");
}

// ---------------------------------------------------------------------------
// 9. Round-trip and CLI determinism
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion9RoundTripAndDeterminism) {
    // file-format round trips
    const fs::path dir =
        fs::temp_directory_path() / ("tal_accept_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);

    Rng rng(909);
    SeqTensor x = testutil::random_seq(12, 6, rng);
    write_feature_file((dir / "x.feat").string(), x);
    const SeqTensor x2 = read_feature_file((dir / "x.feat").string());
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        EXPECT_DOUBLE_EQ(x2.data()[i],
                         static_cast<double>(static_cast<float>(x.data()[i])));
    }

    AnnotationSet ann;
    ann.classes = {"a", "b"};
    ann.videos.push_back({"v", 32, {{1.5, 9.25, 1}}});
    write_annotations((dir / "ann.json").string(), ann);
    const AnnotationSet ann2 = parse_annotations((dir / "ann.json").string());
    EXPECT_EQ(ann2.videos[0].instances[0].label, 1);
    EXPECT_DOUBLE_EQ(ann2.videos[0].instances[0].start, 1.5);

    std::vector<PredictionRecord> preds{{"v", 1.23456789, 8.75, "b", 0.625}};
    write_predictions((dir / "p.json").string(), preds);
    const auto preds2 = parse_predictions((dir / "p.json").string());
    EXPECT_DOUBLE_EQ(preds2[0].start, preds[0].start);
    EXPECT_DOUBLE_EQ(preds2[0].score, preds[0].score);

    ModelConfig cfg;
    cfg.input_dim = 4;
    cfg.embed_dim = 6;
    cfg.num_levels = 3;
    cfg.num_classes = 2;
    save_checkpoint((dir / "c.bin").string(), cfg, init_params(cfg, 3));
    EXPECT_NO_THROW(load_checkpoint((dir / "c.bin").string()));

    // byte-reproducible CLI pipeline across two runs
    const std::string cli = TAL_CLI_PATH;
    std::ofstream((dir / "cfg.txt").string())
        << "num_videos = 4\nseq_len = 64\ninput_dim = 8\nnum_classes = 2\n"
        << "min_duration = 6\nmax_duration = 16\nembed_dim = 16\nnum_levels = 3\n"
        << "steps = 60\nlr = 0.01\nbatch_size = 4\nema_decay = 0.9\n"
        << "score_threshold = 0.02\n";
    auto sh = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    for (const std::string tag : {"r1", "r2"}) {
        const std::string base = (dir / tag).string();
        ASSERT_EQ(sh("synth --config " + (dir / "cfg.txt").string() + " --seed 11 --out " +
                     base + "_data"),
                  0);
        ASSERT_EQ(sh("train --features " + base + "_data --annotations " + base +
                     "_data/annotations.json --config " + (dir / "cfg.txt").string() +
                     " --seed 11 --out " + base + "_ckpt.bin --loss-log " + base +
                     "_loss.csv"),
                  0);
        ASSERT_EQ(sh("infer --checkpoint " + base + "_ckpt.bin --features " + base +
                     "_data --config " + (dir / "cfg.txt").string() + " --seed 11 --out " +
                     base + "_preds.json"),
                  0);
        ASSERT_EQ(sh("eval --predictions " + base + "_preds.json --annotations " + base +
                     "_data/annotations.json --seed 11 --out " + base + "_report.json"),
                  0);
    }
    for (const std::string name :
         {"_data/annotations.json", "_data/video_0000.feat", "_ckpt.bin", "_loss.csv",
          "_preds.json", "_report.json"}) {
        EXPECT_EQ(detail::read_all_bytes((dir / ("r1" + name)).string()),
                  detail::read_all_bytes((dir / ("r2" + name)).string()))
            << name;
    }
    fs::remove_all(dir);
    report(9, "formats round-trip; the CLI pipeline is byte-reproducible");
}

// ---------------------------------------------------------------------------
// 10. Kernel sweep harness
// ---------------------------------------------------------------------------

TEST(Acceptance, Criterion10KernelSweep) {
    BenchmarkSpec spec = benchmark_spec();
    // smaller budget: the sweep only has to run end to end and emit the table
    spec.train.steps = 150;
    spec.train_videos = 6;
    spec.val_videos = 3;
    const AblationTable table = run_kernel_sweep(spec, {3, 4, 5, 6}, {1, 2});
    EXPECT_EQ(table.rows.size(), 8u);
    const std::string csv = format_table_csv(table);
    EXPECT_NE(csv.find("kernel,seed,avg_map"), std::string::npos);
    for (int k : {3, 4, 5, 6}) {
        EXPECT_NE(csv.find(std::to_string(k) + ",1,"), std::string::npos);
    }
    std::printf("%s", format_table_text(table).c_str());
    std::printf(
        "  (kernel-3 superiority is a full-scale reference, reported not asserted)\n");
    report(10, "kernel sweep runs k in {3,4,5,6} end to end and emits tables");
}
