// Command-line surface for the temporal action localization pipeline:
// synth -> train -> infer -> eval, plus the ablation/sweep harnesses and the
// params/MACs and similarity diagnostics.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tal/tal.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const std::string& tok : split_csv(s)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw std::runtime_error(what + ": invalid number '" + tok + "'");
        }
    }
    if (out.empty()) throw std::runtime_error(what + ": empty list");
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const std::string& tok : split_csv(s)) {
        try {
            out.push_back(std::stoull(tok));
        } catch (const std::exception&) {
            throw std::runtime_error("seeds: invalid integer '" + tok + "'");
        }
    }
    if (out.empty()) throw std::runtime_error("seeds: empty list");
    return out;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Config-file bindings. One file carries keys for every subcommand; each
// command reads its own group and ignores the rest. CLI flags override
// file values.
// ---------------------------------------------------------------------------

tal::SyntheticDatasetSpec dataset_spec_from(const tal::KvConfig& cfg) {
    tal::SyntheticDatasetSpec spec;
    spec.num_videos = cfg.get_int("num_videos", spec.num_videos);
    spec.seq_len = cfg.get_int("seq_len", spec.seq_len);
    spec.input_dim = cfg.get_int("input_dim", spec.input_dim);
    spec.num_classes = cfg.get_int("num_classes", spec.num_classes);
    spec.min_instances = cfg.get_int("min_instances", spec.min_instances);
    spec.max_instances = cfg.get_int("max_instances", spec.max_instances);
    spec.min_duration = cfg.get_int("min_duration", spec.min_duration);
    spec.max_duration = cfg.get_int("max_duration", spec.max_duration);
    spec.prototype_scale = cfg.get_double("prototype_scale", spec.prototype_scale);
    spec.noise_scale = cfg.get_double("noise_scale", spec.noise_scale);
    spec.smoothing_width = cfg.get_int("smoothing_width", spec.smoothing_width);
    spec.seed = cfg.get_u64("seed", spec.seed);
    return spec;
}

tal::ModelConfig model_config_from(const tal::KvConfig& cfg) {
    tal::ModelConfig mc;
    mc.input_dim = cfg.get_int("input_dim", mc.input_dim);
    mc.embed_dim = cfg.get_int("embed_dim", mc.embed_dim);
    mc.num_levels = cfg.get_int("num_levels", mc.num_levels);
    mc.tcm_variant = tal::tcm_variant_from_string(
        cfg.get_string("tcm_variant", tal::to_string(mc.tcm_variant)));
    mc.tcm_kernel = cfg.get_int("tcm_kernel", mc.tcm_kernel);
    mc.num_classes = cfg.get_int("num_classes", mc.num_classes);
    mc.head_kernel = cfg.get_int("head_kernel", mc.head_kernel);
    return mc;
}

tal::TrainConfig train_config_from(const tal::KvConfig& cfg) {
    tal::TrainConfig tc;
    tc.steps = cfg.get_int("steps", tc.steps);
    tc.lr = cfg.get_double("lr", tc.lr);
    tc.weight_decay = cfg.get_double("weight_decay", tc.weight_decay);
    tc.beta1 = cfg.get_double("beta1", tc.beta1);
    tc.beta2 = cfg.get_double("beta2", tc.beta2);
    tc.grad_clip_norm = cfg.get_double("grad_clip_norm", tc.grad_clip_norm);
    tc.ema_decay = cfg.get_double("ema_decay", tc.ema_decay);
    tc.batch_size = cfg.get_int("batch_size", tc.batch_size);
    tc.seed = cfg.get_u64("seed", tc.seed);
    tc.focal.alpha = cfg.get_double("focal_alpha", tc.focal.alpha);
    tc.focal.gamma = cfg.get_double("focal_gamma", tc.focal.gamma);
    tc.assign.center_radius = cfg.get_double("assign_radius", tc.assign.center_radius);
    tc.assign.range_base = cfg.get_double("assign_range_base", tc.assign.range_base);
    return tc;
}

tal::DecodeConfig decode_config_from(const tal::KvConfig& cfg) {
    tal::DecodeConfig dc;
    dc.score_threshold = cfg.get_double("score_threshold", dc.score_threshold);
    dc.pre_nms_topk = cfg.get_int("pre_nms_topk", dc.pre_nms_topk);
    return dc;
}

tal::NmsConfig nms_config_from(const tal::KvConfig& cfg) {
    tal::NmsConfig nc;
    const std::string mode = cfg.get_string("nms_mode", nc.soft ? "soft" : "hard");
    if (mode != "soft" && mode != "hard") {
        throw std::runtime_error("config: nms_mode must be 'soft' or 'hard'");
    }
    nc.soft = mode == "soft";
    nc.sigma = cfg.get_double("nms_sigma", nc.sigma);
    nc.min_score = cfg.get_double("nms_min_score", nc.min_score);
    nc.hard_threshold = cfg.get_double("nms_hard_threshold", nc.hard_threshold);
    return nc;
}

std::vector<double> thresholds_from(const tal::KvConfig& cfg) {
    if (!cfg.has("tiou_thresholds")) return tal::default_tiou_thresholds();
    return parse_double_list(cfg.get_string("tiou_thresholds", ""), "tiou_thresholds");
}

tal::BenchmarkSpec benchmark_spec_from(const tal::KvConfig& cfg) {
    tal::BenchmarkSpec spec;
    spec.data = dataset_spec_from(cfg);
    spec.train_videos = cfg.get_int("train_videos", spec.train_videos);
    spec.val_videos = cfg.get_int("val_videos", spec.val_videos);
    spec.model = model_config_from(cfg);
    spec.model.input_dim = spec.data.input_dim;
    spec.model.num_classes = spec.data.num_classes;
    spec.train = train_config_from(cfg);
    spec.decode = decode_config_from(cfg);
    spec.nms = nms_config_from(cfg);
    spec.thresholds = thresholds_from(cfg);
    return spec;
}

std::string video_file_name(const std::string& id) { return id + ".feat"; }

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::string seed_str;  // empty = not given

    tal::KvConfig load_config() const {
        tal::KvConfig cfg;
        if (!config_path.empty()) cfg = tal::KvConfig::from_file(config_path);
        if (!seed_str.empty()) cfg.set("seed", seed_str);
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonArgs& args, bool out_required) {
    cmd->add_option("--config", args.config_path, "key = value config file");
    auto* out = cmd->add_option("--out", args.out, "output path");
    if (out_required) out->required();
    cmd->add_option("--seed", args.seed_str, "seed override");
}

int cmd_synth(const CommonArgs& common) {
    const tal::KvConfig cfg = common.load_config();
    const tal::SyntheticDatasetSpec spec = dataset_spec_from(cfg);
    const std::vector<tal::VideoSample> dataset = tal::generate_synthetic_dataset(spec);

    fs::create_directories(common.out);
    tal::AnnotationSet ann;
    for (int c = 0; c < spec.num_classes; ++c) ann.classes.push_back("class_" + std::to_string(c));
    double sim_sum = 0.0;
    int total_instances = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "video_%04zu", i);
        tal::write_feature_file((fs::path(common.out) / video_file_name(id)).string(),
                                dataset[i].features);
        ann.videos.push_back({id, dataset[i].features.len(), dataset[i].instances});
        sim_sum += tal::mean_adjacent_similarity(dataset[i].features);
        total_instances += static_cast<int>(dataset[i].instances.size());
    }
    tal::write_annotations((fs::path(common.out) / "annotations.json").string(), ann);
    std::printf("wrote %d videos (T=%d, D=%d, C=%d), %d instances, %s\n", spec.num_videos,
                spec.seq_len, spec.input_dim, spec.num_classes, total_instances,
                ("mean adjacent cosine similarity " +
                 fmt("%.4f", sim_sum / dataset.size()))
                    .c_str());
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& features_dir,
              const std::string& annotations_path, const std::string& loss_log) {
    const tal::KvConfig cfg = common.load_config();
    const tal::AnnotationSet ann = tal::parse_annotations(annotations_path);

    std::vector<tal::VideoSample> dataset;
    for (const auto& video : ann.videos) {
        tal::SeqTensor feat = tal::read_feature_file(
            (fs::path(features_dir) / video_file_name(video.id)).string());
        if (feat.len() != video.num_clips) {
            throw std::runtime_error(video.id + ": feature file has " +
                                     std::to_string(feat.len()) + " clips, annotations say " +
                                     std::to_string(video.num_clips));
        }
        dataset.push_back({std::move(feat), video.instances});
    }
    if (dataset.empty()) throw std::runtime_error("train: no videos in annotations");

    tal::ModelConfig mcfg = model_config_from(cfg);
    mcfg.input_dim = dataset.front().features.channels();
    mcfg.num_classes = static_cast<int>(ann.classes.size());
    const tal::TrainConfig tcfg = train_config_from(cfg);

    const tal::TrainResult result = tal::train(dataset, mcfg, tcfg);

    ensure_parent_dir(common.out);
    tal::save_checkpoint(common.out, mcfg, result.ema);
    if (!loss_log.empty()) {
        ensure_parent_dir(loss_log);
        std::string csv = "step,loss\n";
        for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
            csv += std::to_string(i) + "," + fmt("%.17g", result.loss_history[i]) + "\n";
        }
        tal::detail::write_all_bytes(loss_log, csv);
    }
    std::printf("trained %d steps on %zu videos; loss %s -> %s; checkpoint %s\n", tcfg.steps,
                dataset.size(),
                result.loss_history.empty() ? "n/a" : fmt("%.4f", result.loss_history.front()).c_str(),
                result.loss_history.empty() ? "n/a" : fmt("%.4f", result.loss_history.back()).c_str(),
                common.out.c_str());
    return 0;
}

int cmd_infer(const CommonArgs& common, const std::string& checkpoint_path,
              const std::string& features_path, const std::string& annotations_path) {
    const tal::KvConfig cfg = common.load_config();
    auto [mcfg, params] = tal::load_checkpoint(checkpoint_path);
    const tal::DecodeConfig dcfg = decode_config_from(cfg);
    const tal::NmsConfig ncfg = nms_config_from(cfg);

    std::vector<std::string> class_names;
    if (!annotations_path.empty()) {
        class_names = tal::parse_annotations(annotations_path).classes;
        if (static_cast<int>(class_names.size()) != mcfg.num_classes) {
            throw std::runtime_error("infer: annotation class list size does not match checkpoint");
        }
    } else {
        for (int c = 0; c < mcfg.num_classes; ++c) {
            class_names.push_back("class_" + std::to_string(c));
        }
    }

    std::vector<std::pair<std::string, std::string>> feature_files;  // (id, path)
    if (fs::is_directory(features_path)) {
        for (const auto& entry : fs::directory_iterator(features_path)) {
            if (entry.path().extension() == ".feat") {
                feature_files.emplace_back(entry.path().stem().string(), entry.path().string());
            }
        }
        std::sort(feature_files.begin(), feature_files.end());
    } else {
        feature_files.emplace_back(fs::path(features_path).stem().string(), features_path);
    }
    if (feature_files.empty()) throw std::runtime_error("infer: no .feat files found");

    std::vector<tal::PredictionRecord> records;
    for (const auto& [id, path] : feature_files) {
        const tal::SeqTensor feat = tal::read_feature_file(path);
        const tal::HeadOutputs out = tal::model_forward(feat, params, mcfg);
        std::vector<tal::ScoredSegment> segs = tal::decode_predictions(out, 0, dcfg);
        segs = tal::soft_nms(std::move(segs), ncfg);
        for (const tal::ScoredSegment& s : segs) {
            records.push_back({id, s.start, s.end, class_names.at(s.label),
                               std::min(s.score, 1.0)});
        }
    }
    ensure_parent_dir(common.out);
    tal::write_predictions(common.out, records);
    std::printf("decoded %zu segments from %zu videos into %s\n", records.size(),
                feature_files.size(), common.out.c_str());
    return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& predictions_path,
             const std::string& annotations_path) {
    const tal::KvConfig cfg = common.load_config();
    const tal::AnnotationSet ann = tal::parse_annotations(annotations_path);
    const std::vector<tal::PredictionRecord> records = tal::parse_predictions(predictions_path);
    const std::vector<double> thresholds = thresholds_from(cfg);

    std::vector<tal::VideoInstance> gt;
    for (std::size_t v = 0; v < ann.videos.size(); ++v) {
        for (const tal::ActionInstance& a : ann.videos[v].instances) {
            gt.push_back({static_cast<int>(v), a});
        }
    }
    auto video_index = [&ann](const std::string& id) {
        for (std::size_t v = 0; v < ann.videos.size(); ++v) {
            if (ann.videos[v].id == id) return static_cast<int>(v);
        }
        throw std::runtime_error("eval: prediction references unknown video '" + id + "'");
    };
    std::vector<tal::ScoredSegment> preds;
    for (const tal::PredictionRecord& rec : records) {
        const int label = ann.class_index(rec.label);
        if (label < 0) {
            throw std::runtime_error("eval: prediction references unknown class '" + rec.label +
                                     "'");
        }
        preds.push_back({video_index(rec.video_id), rec.start, rec.end, label, rec.score});
    }

    const tal::EvalReport report = tal::mean_ap(preds, gt, thresholds);
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        std::printf("mAP@%.2f = %.4f\n", thresholds[i], report.map_per_threshold[i]);
    }
    std::printf("average mAP %.4f (%d predictions, %d ground-truth instances)\n",
                report.average_map, report.num_predictions, report.num_gt);

    if (!common.out.empty()) {
        nlohmann::json doc;
        doc["thresholds"] = report.thresholds;
        doc["map_per_threshold"] = report.map_per_threshold;
        doc["average_map"] = report.average_map;
        doc["num_gt"] = report.num_gt;
        doc["num_predictions"] = report.num_predictions;
        nlohmann::json per_class = nlohmann::json::object();
        for (const auto& [cls, aps] : report.per_class_ap) {
            per_class[ann.classes.at(cls)] = aps;
        }
        doc["per_class_ap"] = per_class;
        ensure_parent_dir(common.out);
        tal::detail::write_all_bytes(common.out, doc.dump(2) + "\n");
    }
    return 0;
}

void write_table(const std::string& prefix, const tal::AblationTable& table) {
    ensure_parent_dir(prefix + ".csv");
    tal::detail::write_all_bytes(prefix + ".csv", tal::format_table_csv(table));
    const std::string text = tal::format_table_text(table);
    tal::detail::write_all_bytes(prefix + ".txt", text);
    std::fputs(text.c_str(), stdout);
}

int cmd_ablate(const CommonArgs& common, const std::string& variants_csv,
               const std::string& seeds_csv) {
    const tal::KvConfig cfg = common.load_config();
    tal::BenchmarkSpec spec = benchmark_spec_from(cfg);
    std::vector<tal::TcmVariant> variants;
    for (const std::string& name : split_csv(variants_csv)) {
        variants.push_back(tal::tcm_variant_from_string(name));
    }
    const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_csv);
    const tal::AblationTable table = tal::run_ablation(spec, variants, seeds);
    write_table(common.out, table);
    return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& kernels_csv,
              const std::string& seeds_csv) {
    const tal::KvConfig cfg = common.load_config();
    tal::BenchmarkSpec spec = benchmark_spec_from(cfg);
    std::vector<int> kernels;
    for (const std::string& tok : split_csv(kernels_csv)) {
        try {
            kernels.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw std::runtime_error("kernels: invalid integer '" + tok + "'");
        }
    }
    const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_csv);
    const tal::AblationTable table = tal::run_kernel_sweep(spec, kernels, seeds);
    write_table(common.out, table);
    return 0;
}

int cmd_diag(const CommonArgs& common, const std::string& features_path) {
    const tal::SeqTensor feat = tal::read_feature_file(features_path);
    const tal::SeqTensor sim = tal::cosine_similarity_matrix(feat);
    std::string csv;
    for (int i = 0; i < sim.len(); ++i) {
        for (int j = 0; j < sim.channels(); ++j) {
            if (j) csv += ",";
            csv += fmt("%.10g", sim.at(i, j));
        }
        csv += "\n";
    }
    ensure_parent_dir(common.out);
    tal::detail::write_all_bytes(common.out, csv);
    std::printf("similarity matrix %dx%d written to %s; mean adjacent similarity %.4f\n",
                sim.len(), sim.channels(), common.out.c_str(),
                tal::mean_adjacent_similarity(feat));
    return 0;
}

int cmd_count(const CommonArgs& common, const std::string& variant, int T) {
    const tal::KvConfig cfg = common.load_config();
    tal::ModelConfig mcfg = model_config_from(cfg);

    std::vector<tal::TcmVariant> variants;
    if (!variant.empty()) {
        variants.push_back(tal::tcm_variant_from_string(variant));
    } else {
        variants = {tal::TcmVariant::kMaxPool, tal::TcmVariant::kAvgPool,
                    tal::TcmVariant::kSubsample, tal::TcmVariant::kConv,
                    tal::TcmVariant::kAttention};
    }
    std::string csv = "variant,params,macs\n";
    std::printf("%-10s %14s %18s   (T=%d)\n", "variant", "params", "macs", T);
    for (tal::TcmVariant v : variants) {
        mcfg.tcm_variant = v;
        const long long params = tal::count_params(tal::make_params(mcfg));
        const unsigned long long macs = tal::count_macs(mcfg, T);
        std::printf("%-10s %14lld %18llu\n", tal::to_string(v).c_str(), params, macs);
        csv += tal::to_string(v) + "," + std::to_string(params) + "," + std::to_string(macs) +
               "\n";
    }
    if (!common.out.empty()) {
        ensure_parent_dir(common.out);
        tal::detail::write_all_bytes(common.out, csv);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal action localization pipeline (synthetic desk-scale)"};
    app.require_subcommand(1);

    CommonArgs synth_args, train_args, infer_args, eval_args, ablate_args, sweep_args,
        diag_args, count_args;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, synth_args, true);

    auto* train = app.add_subcommand("train", "train a model to a checkpoint");
    std::string train_features, train_annotations, train_loss_log;
    train->add_option("--features", train_features, "directory of .feat files")->required();
    train->add_option("--annotations", train_annotations, "annotations JSON")->required();
    train->add_option("--loss-log", train_loss_log, "per-step loss CSV");
    add_common(train, train_args, true);

    auto* infer = app.add_subcommand("infer", "decode predictions from a checkpoint");
    std::string infer_checkpoint, infer_features, infer_annotations;
    infer->add_option("--checkpoint", infer_checkpoint, "checkpoint file")->required();
    infer->add_option("--features", infer_features, ".feat file or directory")->required();
    infer->add_option("--annotations", infer_annotations, "annotations JSON for class names");
    add_common(infer, infer_args, true);

    auto* evalc = app.add_subcommand("eval", "score predictions against annotations");
    std::string eval_predictions, eval_annotations;
    evalc->add_option("--predictions", eval_predictions, "predictions JSON")->required();
    evalc->add_option("--annotations", eval_annotations, "annotations JSON")->required();
    add_common(evalc, eval_args, false);

    auto* ablate = app.add_subcommand("ablate", "train/eval every TCM variant");
    std::string ablate_variants = "maxpool,avgpool,subsample,conv,attention";
    std::string ablate_seeds = "1,2,3,4,5";
    ablate->add_option("--variants", ablate_variants, "comma-separated variant list");
    ablate->add_option("--seeds", ablate_seeds, "comma-separated seed list");
    add_common(ablate, ablate_args, true);

    auto* sweep = app.add_subcommand("sweep", "kernel-size sweep of the pooling block");
    std::string sweep_kernels = "3,4,5,6";
    std::string sweep_seeds = "1,2,3,4,5";
    sweep->add_option("--kernels", sweep_kernels, "comma-separated kernel list");
    sweep->add_option("--seeds", sweep_seeds, "comma-separated seed list");
    add_common(sweep, sweep_args, true);

    auto* diag = app.add_subcommand("diag", "dump a cosine similarity matrix");
    std::string diag_features;
    diag->add_option("--features", diag_features, ".feat file")->required();
    add_common(diag, diag_args, true);

    auto* count = app.add_subcommand("count", "parameter and MAC accounting");
    std::string count_variant;
    int count_t = 2304;
    count->add_option("--variant", count_variant, "single variant (default: all)");
    count->add_option("--t", count_t, "sequence length for MAC counting");
    add_common(count, count_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) {
            return cmd_train(train_args, train_features, train_annotations, train_loss_log);
        }
        if (infer->parsed()) {
            return cmd_infer(infer_args, infer_checkpoint, infer_features, infer_annotations);
        }
        if (evalc->parsed()) return cmd_eval(eval_args, eval_predictions, eval_annotations);
        if (ablate->parsed()) return cmd_ablate(ablate_args, ablate_variants, ablate_seeds);
        if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_kernels, sweep_seeds);
        if (diag->parsed()) return cmd_diag(diag_args, diag_features);
        if (count->parsed()) return cmd_count(count_args, count_variant, count_t);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    std::cerr << "error: no subcommand given\n";
    return 2;
}
