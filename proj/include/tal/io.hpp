#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tal/eval.hpp"
#include "tal/model.hpp"
#include "tal/targets.hpp"

namespace tal {

// ---------------------------------------------------------------------------
// Little-endian primitives
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::string& out, float f) {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline float get_f32(const unsigned char* p) {
    return std::bit_cast<float>(get_u32(p));
}

inline std::string read_all_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_all_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(path + ": cannot open for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error(path + ": write failed");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Feature files: magic "TMXF", u32 version = 1, u32 T, u32 D, then T*D
// 32-bit little-endian IEEE-754 floats, time-major.
// ---------------------------------------------------------------------------

constexpr std::uint32_t kFeatureFileVersion = 1;

inline void write_feature_file(const std::string& path, const SeqTensor& x) {
    if (!x.all_finite()) {
        throw std::invalid_argument(path + ": refusing to write non-finite features");
    }
    std::string bytes;
    bytes.reserve(16 + 4 * x.data().size());
    bytes += "TMXF";
    detail::put_u32(bytes, kFeatureFileVersion);
    detail::put_u32(bytes, static_cast<std::uint32_t>(x.len()));
    detail::put_u32(bytes, static_cast<std::uint32_t>(x.channels()));
    for (double v : x.data()) detail::put_f32(bytes, static_cast<float>(v));
    detail::write_all_bytes(path, bytes);
}

inline SeqTensor read_feature_file(const std::string& path) {
    const std::string bytes = detail::read_all_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 16) {
        throw std::runtime_error(path + ": truncated header, need 16 bytes, got " +
                                 std::to_string(bytes.size()));
    }
    if (std::memcmp(p, "TMXF", 4) != 0) {
        throw std::runtime_error(path + ": bad magic at byte offset 0");
    }
    const std::uint32_t version = detail::get_u32(p + 4);
    if (version != kFeatureFileVersion) {
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version) +
                                 " at byte offset 4");
    }
    const std::uint32_t T = detail::get_u32(p + 8);
    const std::uint32_t D = detail::get_u32(p + 12);
    if (T < 1 || D < 1) {
        throw std::runtime_error(path + ": header declares empty tensor at byte offset 8");
    }
    const std::size_t expected = 4ull * T * D;
    const std::size_t actual = bytes.size() - 16;
    if (actual != expected) {
        throw std::runtime_error(path + ": payload has " + std::to_string(actual) +
                                 " bytes, expected " + std::to_string(expected));
    }
    SeqTensor x(static_cast<int>(T), static_cast<int>(D));
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        const float f = detail::get_f32(p + 16 + 4 * i);
        if (!std::isfinite(f)) {
            throw std::runtime_error(path + ": non-finite value at byte offset " +
                                     std::to_string(16 + 4 * i));
        }
        x.data()[i] = static_cast<double>(f);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Annotations (JSON, strict schema)
// ---------------------------------------------------------------------------

constexpr int kAnnotationVersion = 1;

struct AnnotationSet {
    std::vector<std::string> classes;
    struct Video {
        std::string id;
        int num_clips = 0;
        std::vector<ActionInstance> instances;
    };
    std::vector<Video> videos;

    int class_index(const std::string& name) const {
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (classes[i] == name) return static_cast<int>(i);
        }
        return -1;
    }
};

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& obj,
                                  const std::vector<std::string>& allowed,
                                  const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const std::string& k : allowed) {
            if (it.key() == k) known = true;
        }
        if (!known) {
            throw std::runtime_error("unknown field '" + path + it.key() + "'");
        }
    }
}

template <class T>
T require_field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) {
        throw std::runtime_error("missing field '" + path + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("field '" + path + key + "' has the wrong type");
    }
}

} // namespace detail

inline AnnotationSet parse_annotations(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(detail::read_all_bytes(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    try {
        if (!doc.is_object()) throw std::runtime_error("document root must be an object");
        detail::reject_unknown_fields(doc, {"version", "classes", "videos"}, "");
        if (detail::require_field<int>(doc, "version", "") != kAnnotationVersion) {
            throw std::runtime_error("unsupported annotation version");
        }
        AnnotationSet set;
        set.classes = detail::require_field<std::vector<std::string>>(doc, "classes", "");
        if (set.classes.empty()) throw std::runtime_error("field 'classes' must be non-empty");
        const nlohmann::json& videos = doc.at("videos");
        if (!videos.is_array()) throw std::runtime_error("field 'videos' must be an array");
        for (std::size_t i = 0; i < videos.size(); ++i) {
            const std::string vp = "videos[" + std::to_string(i) + "].";
            const nlohmann::json& jv = videos[i];
            detail::reject_unknown_fields(jv, {"id", "num_clips", "instances"}, vp);
            AnnotationSet::Video video;
            video.id = detail::require_field<std::string>(jv, "id", vp);
            video.num_clips = detail::require_field<int>(jv, "num_clips", vp);
            if (video.num_clips < 1) {
                throw std::runtime_error("field '" + vp + "num_clips' must be >= 1");
            }
            const nlohmann::json& insts = jv.at("instances");
            if (!insts.is_array()) {
                throw std::runtime_error("field '" + vp + "instances' must be an array");
            }
            for (std::size_t j = 0; j < insts.size(); ++j) {
                const std::string ip = vp + "instances[" + std::to_string(j) + "].";
                const nlohmann::json& ji = insts[j];
                detail::reject_unknown_fields(ji, {"start", "end", "label"}, ip);
                ActionInstance inst;
                inst.start = detail::require_field<double>(ji, "start", ip);
                inst.end = detail::require_field<double>(ji, "end", ip);
                const std::string label = detail::require_field<std::string>(ji, "label", ip);
                inst.label = set.class_index(label);
                if (inst.label < 0) {
                    throw std::runtime_error("field '" + ip + "label': unknown class '" +
                                             label + "'");
                }
                if (!(inst.start >= 0.0) || !(inst.start < inst.end) ||
                    !(inst.end <= video.num_clips)) {
                    throw std::runtime_error("field '" + ip +
                                             "start/end': need 0 <= start < end <= num_clips");
                }
                video.instances.push_back(inst);
            }
            set.videos.push_back(std::move(video));
        }
        return set;
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline void write_annotations(const std::string& path, const AnnotationSet& set) {
    nlohmann::json doc;
    doc["version"] = kAnnotationVersion;
    doc["classes"] = set.classes;
    doc["videos"] = nlohmann::json::array();
    for (const AnnotationSet::Video& v : set.videos) {
        nlohmann::json jv;
        jv["id"] = v.id;
        jv["num_clips"] = v.num_clips;
        jv["instances"] = nlohmann::json::array();
        for (const ActionInstance& a : v.instances) {
            nlohmann::json ji;
            ji["start"] = a.start;
            ji["end"] = a.end;
            ji["label"] = set.classes.at(a.label);
            jv["instances"].push_back(ji);
        }
        doc["videos"].push_back(jv);
    }
    detail::write_all_bytes(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Predictions (JSON)
// ---------------------------------------------------------------------------

constexpr int kPredictionVersion = 1;

struct PredictionRecord {
    std::string video_id;
    double start = 0.0;
    double end = 0.0;
    std::string label;
    double score = 0.0;
};

inline std::vector<PredictionRecord> parse_predictions(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(detail::read_all_bytes(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    try {
        if (!doc.is_object()) throw std::runtime_error("document root must be an object");
        detail::reject_unknown_fields(doc, {"version", "predictions"}, "");
        if (detail::require_field<int>(doc, "version", "") != kPredictionVersion) {
            throw std::runtime_error("unsupported prediction version");
        }
        const nlohmann::json& preds = doc.at("predictions");
        if (!preds.is_array()) throw std::runtime_error("field 'predictions' must be an array");
        std::vector<PredictionRecord> out;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const std::string pp = "predictions[" + std::to_string(i) + "].";
            const nlohmann::json& jp = preds[i];
            detail::reject_unknown_fields(jp, {"video_id", "start", "end", "label", "score"},
                                          pp);
            PredictionRecord rec;
            rec.video_id = detail::require_field<std::string>(jp, "video_id", pp);
            rec.start = detail::require_field<double>(jp, "start", pp);
            rec.end = detail::require_field<double>(jp, "end", pp);
            rec.label = detail::require_field<std::string>(jp, "label", pp);
            rec.score = detail::require_field<double>(jp, "score", pp);
            if (!(rec.start < rec.end)) {
                throw std::runtime_error("field '" + pp + "start/end': need start < end");
            }
            if (!(rec.score >= 0.0 && rec.score <= 1.0)) {
                throw std::runtime_error("field '" + pp + "score': must be in [0, 1]");
            }
            out.push_back(std::move(rec));
        }
        return out;
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline void write_predictions(const std::string& path,
                              const std::vector<PredictionRecord>& preds) {
    nlohmann::json doc;
    doc["version"] = kPredictionVersion;
    doc["predictions"] = nlohmann::json::array();
    for (const PredictionRecord& rec : preds) {
        nlohmann::json jp;
        jp["video_id"] = rec.video_id;
        jp["start"] = rec.start;
        jp["end"] = rec.end;
        jp["label"] = rec.label;
        jp["score"] = rec.score;
        doc["predictions"].push_back(jp);
    }
    detail::write_all_bytes(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "TMXC", u32 version, config, then every parameter tensor
// in for_each_tensor order with the feature-file numeric encoding (f32 LE).
// ---------------------------------------------------------------------------

constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ModelParams& params) {
    std::string bytes;
    bytes += "TMXC";
    detail::put_u32(bytes, kCheckpointVersion);
    detail::put_u32(bytes, static_cast<std::uint32_t>(cfg.input_dim));
    detail::put_u32(bytes, static_cast<std::uint32_t>(cfg.embed_dim));
    detail::put_u32(bytes, static_cast<std::uint32_t>(cfg.num_levels));
    detail::put_u32(bytes, static_cast<std::uint32_t>(cfg.tcm_variant));
    detail::put_u32(bytes, static_cast<std::uint32_t>(cfg.tcm_kernel));
    detail::put_u32(bytes, static_cast<std::uint32_t>(cfg.num_classes));
    detail::put_u32(bytes, static_cast<std::uint32_t>(cfg.head_kernel));
    for_each_tensor(const_cast<ModelParams&>(params),
                    [&bytes](const std::string&, const std::vector<double>& v) {
                        detail::put_u32(bytes, static_cast<std::uint32_t>(v.size()));
                        for (double x : v) detail::put_f32(bytes, static_cast<float>(x));
                    });
    detail::write_all_bytes(path, bytes);
}

inline std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
    const std::string bytes = detail::read_all_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 36) throw std::runtime_error(path + ": truncated checkpoint header");
    if (std::memcmp(p, "TMXC", 4) != 0) {
        throw std::runtime_error(path + ": bad checkpoint magic at byte offset 0");
    }
    if (detail::get_u32(p + 4) != kCheckpointVersion) {
        throw std::runtime_error(path + ": unsupported checkpoint version");
    }
    ModelConfig cfg;
    cfg.input_dim = static_cast<int>(detail::get_u32(p + 8));
    cfg.embed_dim = static_cast<int>(detail::get_u32(p + 12));
    cfg.num_levels = static_cast<int>(detail::get_u32(p + 16));
    const std::uint32_t variant = detail::get_u32(p + 20);
    if (variant > static_cast<std::uint32_t>(TcmVariant::kAttention)) {
        throw std::runtime_error(path + ": unknown TCM variant id at byte offset 20");
    }
    cfg.tcm_variant = static_cast<TcmVariant>(variant);
    cfg.tcm_kernel = static_cast<int>(detail::get_u32(p + 24));
    cfg.num_classes = static_cast<int>(detail::get_u32(p + 28));
    cfg.head_kernel = static_cast<int>(detail::get_u32(p + 32));
    cfg.validate();

    ModelParams params = make_params(cfg);
    std::size_t off = 36;
    for_each_tensor(params, [&](const std::string& name, std::vector<double>& v) {
        if (off + 4 > bytes.size()) {
            throw std::runtime_error(path + ": truncated before tensor '" + name + "'");
        }
        const std::uint32_t n = detail::get_u32(p + off);
        off += 4;
        if (n != v.size()) {
            throw std::runtime_error(path + ": tensor '" + name + "' has " +
                                     std::to_string(n) + " values, expected " +
                                     std::to_string(v.size()));
        }
        if (off + 4ull * n > bytes.size()) {
            throw std::runtime_error(path + ": truncated payload in tensor '" + name + "'");
        }
        for (std::uint32_t i = 0; i < n; ++i) {
            v[i] = static_cast<double>(detail::get_f32(p + off));
            off += 4;
        }
    });
    if (off != bytes.size()) {
        throw std::runtime_error(path + ": trailing bytes after parameters");
    }
    return {cfg, std::move(params)};
}

// ---------------------------------------------------------------------------
// Key-value config files: one "key = value" per line, '#' comments. The same
// file may carry keys for several subcommands; each command reads its own.
// ---------------------------------------------------------------------------

class KvConfig {
public:
    KvConfig() = default;

    static KvConfig from_file(const std::string& path) {
        KvConfig cfg;
        std::ifstream f(path);
        if (!f) throw std::runtime_error(path + ": cannot open config file");
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected 'key = value'");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key + "' has invalid number '" +
                                     it->second + "'");
        }
    }

    int get_int(const std::string& key, int fallback) const {
        const double v = get_double(key, static_cast<double>(fallback));
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v) {
            throw std::runtime_error("config: key '" + key + "' must be an integer");
        }
        return i;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key + "' has invalid integer '" +
                                     it->second + "'");
        }
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    std::map<std::string, std::string> values_;
};

} // namespace tal
