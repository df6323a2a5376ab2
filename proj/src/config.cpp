#include "dmsort/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dmsort {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw std::invalid_argument("config key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
        throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "yes" || v == "true" || v == "1") return true;
    if (v == "no" || v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected yes/no, got '" + v + "'");
}

struct Field {
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

Field num(std::string key, double& ref) {
    return {key, [&ref, key](const std::string& v) { ref = parse_double(key, v); },
            [&ref] { return format_double(ref); }};
}

Field integer(std::string key, int& ref) {
    return {key, [&ref, key](const std::string& v) { ref = static_cast<int>(parse_integer(key, v)); },
            [&ref] { return std::to_string(ref); }};
}

Field u64(std::string key, std::uint64_t& ref) {
    return {key,
            [&ref, key](const std::string& v) {
                const long long x = parse_integer(key, v);
                if (x < 0) throw std::invalid_argument("config key '" + key + "': must be non-negative");
                ref = static_cast<std::uint64_t>(x);
            },
            [&ref] { return std::to_string(ref); }};
}

Field flag(std::string key, bool& ref) {
    return {key, [&ref, key](const std::string& v) { ref = parse_bool(key, v); },
            [&ref] { return std::string(ref ? "yes" : "no"); }};
}

void apply_fields(const KeyValues& kv, const std::vector<Field>& fields) {
    for (const auto& [k, v] : kv) {
        bool found = false;
        for (const auto& f : fields) {
            if (f.key == k) {
                f.set(v);
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("unknown config key '" + k + "'");
    }
}

std::string dump(const std::vector<Field>& fields) {
    std::string out;
    for (const auto& f : fields) out += f.key + "=" + f.get() + "\n";
    return out;
}

// Low and new cascades use a plain IoU gate: one threshold sets both bounds.
Field iou_threshold(const std::string& key, DtIouParams& p) {
    return {key,
            [&p, key](const std::string& v) {
                p.upper = p.lower = parse_double(key, v);
                p.decay = 0.0;
            },
            [&p] { return format_double(p.upper); }};
}

void hpc_fields(std::vector<Field>& f, const std::string& prefix, AssociationWeights& w) {
    f.push_back(num(prefix + ".hpc.weight", w.hpc));
    f.push_back(num(prefix + ".hpc.height_weight", w.hpc_height));
    f.push_back(num(prefix + ".hpc.vertical_position_weight", w.hpc_vertical));
}

std::vector<Field> tracker_fields(TrackerConfig& c) {
    std::vector<Field> f;
    f.push_back(num("detection_confidence_threshold", c.detection_confidence_threshold));
    f.push_back(num("min_detection_confidence", c.min_detection_confidence));
    f.push_back(integer("track_max_time_lost", c.track_max_time_lost));
    f.push_back(integer("track_initialization_time", c.track_init_time));
    f.push_back(num("track_initialization_confidence", c.track_init_confidence));
    f.push_back(num("duplicate_track_iou_threshold", c.duplicate_iou_threshold));
    f.push_back(flag("apply_noise_filtering", c.apply_noise_filtering));
    f.push_back(flag("use_cmc", c.use_cmc));
    f.push_back(flag("cmc.lazy", c.lazy_cmc));
    f.push_back({"buffer.policy",
                 [&c](const std::string& v) {
                     if (v == "deepmovesort") c.buffer_policy = BufferPolicy::deepmovesort;
                     else if (v == "movesort") c.buffer_policy = BufferPolicy::movesort;
                     else throw std::invalid_argument("config key 'buffer.policy': expected deepmovesort or movesort");
                 },
                 [&c] { return std::string(c.buffer_policy == BufferPolicy::movesort ? "movesort" : "deepmovesort"); }});
    f.push_back(integer("buffer.t_max", c.buffer_t_max));
    f.push_back(integer("buffer.l_min", c.buffer_l_min));
    f.push_back(num("atcm.sigma", c.atcm_sigma));
    f.push_back(num("reid.ema_alpha", c.embedding_alpha));
    f.push_back(integer("threads", c.threads));

    f.push_back(flag("ha.enabled", c.ha.enabled));
    f.push_back(num("ha.dtiou.threshold_upper", c.ha.dtiou.upper));
    f.push_back(num("ha.dtiou.threshold_lower", c.ha.dtiou.lower));
    f.push_back(num("ha.dtiou.threshold_decay", c.ha.dtiou.decay));
    f.push_back(num("ha.dtiou.expansion_rate", c.ha.dtiou.e_rate));
    f.push_back(flag("ha.dtiou.fuse_detection_score", c.ha.dtiou.fuse_detection_score));
    f.push_back(num("ha.dtiou.weight", c.ha.weights.dtiou));
    f.push_back(num("ha.reid.weight", c.ha.weights.appearance));
    f.push_back(num("ha.atcm.weight", c.ha.weights.atcm));
    hpc_fields(f, "ha", c.ha.weights);

    for (auto [name, cc] : {std::pair<std::string, CascadeConfig*>{"la", &c.la}, {"na", &c.na}}) {
        f.push_back(flag(name + ".enabled", cc->enabled));
        f.push_back(iou_threshold(name + ".iou.threshold", cc->dtiou));
        f.push_back(num(name + ".iou.expansion_rate", cc->dtiou.e_rate));
        f.push_back(flag(name + ".iou.fuse_detection_score", cc->dtiou.fuse_detection_score));
        f.push_back(num(name + ".iou.weight", cc->weights.dtiou));
        f.push_back(num(name + ".atcm.weight", cc->weights.atcm));
        hpc_fields(f, name, cc->weights);
    }
    return f;
}

}  // namespace

TrackerConfig TrackerConfig::dancetrack() {
    TrackerConfig c;
    c.ha.dtiou = {0.5, 0.25, 0.2, 0.0, false};
    c.ha.weights = {1.0, 2.0, 1.0, 1.0, 1.5, 2.0};
    c.la.dtiou = {0.5, 0.5, 0.0, 0.0, false};
    c.la.weights = {1.0, 2.0, 1.0, 1.0, 1.0, 0.0};
    c.na.dtiou = {0.25, 0.25, 0.0, 0.0, false};
    c.na.weights = {1.0, 2.0, 1.0, 1.0, 0.0, 0.0};
    return c;
}

void TrackerConfig::validate() const {
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string("tracker config: ") + name + " must lie in [0, 1]");
    };
    unit(detection_confidence_threshold, "detection_confidence_threshold");
    unit(min_detection_confidence, "min_detection_confidence");
    unit(track_init_confidence, "track_initialization_confidence");
    unit(duplicate_iou_threshold, "duplicate_track_iou_threshold");
    unit(embedding_alpha, "reid.ema_alpha");
    if (track_max_time_lost < 1 || track_init_time < 1) {
        throw std::invalid_argument("tracker config: track times must be >= 1");
    }
    if (buffer_t_max < 1 || buffer_l_min < 0) throw std::invalid_argument("tracker config: invalid buffer limits");
    if (!(atcm_sigma >= 0.0)) throw std::invalid_argument("tracker config: atcm.sigma must be >= 0");
    if (threads < 1) throw std::invalid_argument("tracker config: threads must be >= 1");
    if (!ha.enabled) throw std::invalid_argument("tracker config: the high-confidence cascade cannot be disabled");
    for (const CascadeConfig* cc : {&ha, &la, &na}) {
        if (!cc->enabled) continue;
        cc->dtiou.validate();
        cc->weights.validate();
    }
    if (la.weights.appearance != 0.0 || na.weights.appearance != 0.0) {
        throw std::invalid_argument("tracker config: appearance is only used in the first cascade");
    }
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(origin + ":" + std::to_string(n) + ": expected key=value");
        }
        const std::string k = trim(line.substr(0, eq));
        const std::string v = trim(line.substr(eq + 1));
        if (k.empty()) throw std::runtime_error(origin + ":" + std::to_string(n) + ": empty key");
        if (!kv.emplace(k, v).second) {
            throw std::runtime_error(origin + ":" + std::to_string(n) + ": repeated key '" + k + "'");
        }
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_key_values(ss.str(), path.string());
}

TrackerConfig tracker_config_from(const KeyValues& kv, TrackerConfig base) {
    apply_fields(kv, tracker_fields(base));
    base.validate();
    return base;
}

std::string to_key_values(const TrackerConfig& c) {
    TrackerConfig copy = c;
    return dump(tracker_fields(copy));
}

namespace {

std::vector<Field> training_fields(TrainingSetup& s) {
    std::vector<Field> f;
    f.push_back(num("learning_rate", s.train.learning_rate));
    f.push_back(integer("warmup_epochs", s.train.warmup_epochs));
    f.push_back(num("lr_decay_factor", s.train.decay_factor));
    f.push_back(integer("lr_decay_period", s.train.decay_period));
    f.push_back(num("weight_decay", s.train.weight_decay));
    f.push_back(num("huber_delta", s.train.huber_delta));
    f.push_back(integer("batch_size", s.train.batch_size));
    f.push_back(integer("epochs", s.train.epochs));
    f.push_back(u64("seed", s.train.seed));
    f.push_back(num("augment.noise_scale", s.augmentation.noise_scale));
    f.push_back(num("augment.mask_probability", s.augmentation.mask_probability));
    f.push_back(integer("model.d_model", s.model.d_model));
    f.push_back(integer("model.n_heads", s.model.n_heads));
    f.push_back(integer("model.n_layers", s.model.n_layers));
    f.push_back(integer("model.ff_dim", s.model.ff_dim));
    f.push_back(integer("model.history", s.model.history));
    f.push_back(integer("model.horizon", s.model.horizon));
    f.push_back(integer("window.stride", s.window_stride));
    return f;
}

std::string kinds_to_string(const std::vector<MotionKind>& ks) {
    std::string out;
    for (std::size_t i = 0; i < ks.size(); ++i) out += (i ? "," : "") + std::string(to_string(ks[i]));
    return out;
}

std::vector<Field> scenario_fields(ScenarioConfig& s) {
    std::vector<Field> f;
    f.push_back(integer("image_width", s.image_width));
    f.push_back(integer("image_height", s.image_height));
    f.push_back(integer("frames", s.n_frames));
    f.push_back(integer("objects", s.n_objects));
    f.push_back({"motion_kinds",
                 [&s](const std::string& v) {
                     s.kinds.clear();
                     std::istringstream is(v);
                     std::string item;
                     while (std::getline(is, item, ',')) s.kinds.push_back(parse_motion_kind(trim(item)));
                 },
                 [&s] { return kinds_to_string(s.kinds); }});
    f.push_back(num("speed", s.speed));
    f.push_back(num("amplitude", s.amplitude));
    f.push_back(num("period", s.period));
    f.push_back(integer("switch_period", s.switch_period));
    f.push_back({"occlusions",
                 [&s](const std::string& v) {
                     // track:start:duration entries separated by commas
                     s.occlusions.clear();
                     std::istringstream is(v);
                     std::string item;
                     while (std::getline(is, item, ',')) {
                         item = trim(item);
                         if (item.empty()) continue;
                         OcclusionWindow o;
                         char c1 = 0, c2 = 0;
                         std::istringstream parts(item);
                         if (!(parts >> o.track >> c1 >> o.start >> c2 >> o.duration) || c1 != ':' || c2 != ':') {
                             throw std::invalid_argument("config key 'occlusions': expected track:start:duration, got '" +
                                                         item + "'");
                         }
                         s.occlusions.push_back(o);
                     }
                 },
                 [&s] {
                     std::string out;
                     for (std::size_t i = 0; i < s.occlusions.size(); ++i) {
                         const auto& o = s.occlusions[i];
                         out += (i ? "," : "") + std::to_string(o.track) + ":" + std::to_string(o.start) + ":" +
                                std::to_string(o.duration);
                     }
                     return out;
                 }});
    f.push_back(integer("random_occlusions", s.random_occlusions));
    f.push_back(integer("occlusion_min", s.occlusion_min));
    f.push_back(integer("occlusion_max", s.occlusion_max));
    f.push_back(num("noise_scale", s.noise_scale));
    f.push_back(num("confidence_high", s.conf_high));
    f.push_back(num("confidence_low", s.conf_low));
    f.push_back(num("confidence_jitter", s.conf_jitter));
    f.push_back(num("overlap_iou", s.overlap_iou));
    f.push_back(integer("embedding_dim", s.embedding_dim));
    f.push_back(num("embedding_noise", s.embedding_noise));
    f.push_back(num("camera_step", s.camera_step));
    f.push_back(u64("seed", s.seed));
    return f;
}

}  // namespace

TrainingSetup training_setup_from(const KeyValues& kv, TrainingSetup base) {
    apply_fields(kv, training_fields(base));
    base.train.validate();
    base.augmentation.validate();
    base.model.validate();
    if (base.window_stride < 1) throw std::invalid_argument("training config: window.stride must be >= 1");
    return base;
}

std::string to_key_values(const TrainingSetup& s) {
    TrainingSetup copy = s;
    return dump(training_fields(copy));
}

ScenarioConfig scenario_config_from(const KeyValues& kv, ScenarioConfig base) {
    apply_fields(kv, scenario_fields(base));
    base.validate();
    return base;
}

std::string to_key_values(const ScenarioConfig& s) {
    ScenarioConfig copy = s;
    return dump(scenario_fields(copy));
}

}  // namespace dmsort
