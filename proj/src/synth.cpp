#include "dmsort/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "dmsort/io.hpp"

namespace dmsort {

const char* to_string(MotionKind k) {
    switch (k) {
        case MotionKind::linear: return "linear";
        case MotionKind::sinusoidal: return "sinusoidal";
        case MotionKind::direction_switch: return "direction_switch";
        case MotionKind::circular: return "circular";
    }
    return "?";
}

MotionKind parse_motion_kind(const std::string& s) {
    if (s == "linear") return MotionKind::linear;
    if (s == "sinusoidal") return MotionKind::sinusoidal;
    if (s == "direction_switch") return MotionKind::direction_switch;
    if (s == "circular") return MotionKind::circular;
    throw std::invalid_argument("unknown motion kind '" + s + "'");
}

BoundingBox ObjectSpec::box_at(int t) const {
    const double two_pi = 2.0 * std::numbers::pi;
    double x = x0 + vx * t;
    double y = y0 + vy * t;
    switch (kind) {
        case MotionKind::linear:
            break;
        case MotionKind::sinusoidal:
            x = x0 + amplitude * std::sin(two_pi * t / period);
            break;
        case MotionKind::circular:
            x += amplitude * (std::cos(two_pi * t / period) - 1.0);
            y += amplitude * std::sin(two_pi * t / period);
            break;
        case MotionKind::direction_switch: {
            // Velocity reverses every switch_period frames: a triangle wave.
            const int p = std::max(switch_period, 1);
            const int seg = t / p;
            const int r = t % p;
            const double along = (seg % 2 == 0) ? r : p - r;
            x = x0 + vx * along;
            y = y0 + vy * along;
            break;
        }
    }
    return {x, y, w, h, 1.0};
}

void ScenarioConfig::validate() const {
    if (image_width <= 0 || image_height <= 0) throw std::invalid_argument("scenario: image size must be positive");
    if (n_frames < 1) throw std::invalid_argument("scenario: frames must be >= 1");
    if (objects.empty() && n_objects < 1) throw std::invalid_argument("scenario: objects must be >= 1");
    if (objects.empty() && kinds.empty()) throw std::invalid_argument("scenario: no motion kinds");
    if (!(period > 0.0) || switch_period < 1) throw std::invalid_argument("scenario: period must be positive");
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("scenario: noise scale must be >= 0");
    if (embedding_dim < 1) throw std::invalid_argument("scenario: embedding dimension must be >= 1");
    if (occlusion_min < 1 || occlusion_max < occlusion_min) {
        throw std::invalid_argument("scenario: invalid occlusion length range");
    }
    const int count = objects.empty() ? n_objects : static_cast<int>(objects.size());
    for (const auto& o : occlusions) {
        if (o.track < 0 || o.track >= count) throw std::invalid_argument("scenario: occlusion names a missing object");
        if (o.start < 0 || o.duration < 0 || o.start + o.duration > n_frames) {
            throw std::invalid_argument("scenario: occlusion window outside the sequence");
        }
    }
    for (const double c : {conf_high, conf_low}) {
        if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("scenario: confidences must lie in [0, 1]");
    }
}

namespace {

std::vector<ObjectSpec> random_objects(const ScenarioConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ObjectSpec> out;
    const double margin = cfg.amplitude + 20.0;
    for (int i = 0; i < cfg.n_objects; ++i) {
        ObjectSpec o;
        o.kind = cfg.kinds[static_cast<std::size_t>(i) % cfg.kinds.size()];
        o.w = 40.0 + 60.0 * u(rng);
        o.h = o.w * (1.5 + u(rng));
        const double angle = 2.0 * std::numbers::pi * u(rng);
        const double speed = cfg.speed * (0.5 + u(rng));
        o.vx = speed * std::cos(angle);
        o.vy = speed * std::sin(angle);
        o.amplitude = cfg.amplitude * (0.6 + 0.8 * u(rng));
        o.period = cfg.period * (0.7 + 0.6 * u(rng));
        o.switch_period = std::max(1, static_cast<int>(cfg.switch_period * (0.6 + 0.8 * u(rng))));
        if (o.kind == MotionKind::sinusoidal) {
            o.vx = 0.0;
            o.vy = cfg.speed * 0.3 * (u(rng) - 0.5);
        }
        // Place the object so its whole path stays roughly inside the image.
        const double travel_x = o.kind == MotionKind::direction_switch ? std::abs(o.vx) * o.switch_period
                                                                       : std::abs(o.vx) * cfg.n_frames;
        const double travel_y = o.kind == MotionKind::direction_switch ? std::abs(o.vy) * o.switch_period
                                                                       : std::abs(o.vy) * cfg.n_frames;
        const double span_x = std::max(1.0, cfg.image_width - o.w - 2 * margin - travel_x);
        const double span_y = std::max(1.0, cfg.image_height - o.h - 2 * margin - travel_y);
        o.x0 = margin + span_x * u(rng) + (o.vx < 0 ? travel_x : 0.0);
        o.y0 = margin + span_y * u(rng) + (o.vy < 0 ? travel_y : 0.0);
        out.push_back(o);
    }
    return out;
}

Embedding random_unit(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Embedding e(dim);
    for (int k = 0; k < dim; ++k) e[k] = n(rng);
    return e / e.norm();
}

}  // namespace

SyntheticSequence generate(const ScenarioConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const std::vector<ObjectSpec> objects = cfg.objects.empty() ? random_objects(cfg, rng) : cfg.objects;
    const int n_obj = static_cast<int>(objects.size());

    std::vector<OcclusionWindow> occ = cfg.occlusions;
    {
        std::uniform_int_distribution<int> len(cfg.occlusion_min, cfg.occlusion_max);
        for (int i = 0; i < n_obj; ++i) {
            for (int k = 0; k < cfg.random_occlusions; ++k) {
                const int d = std::min(len(rng), cfg.n_frames);
                std::uniform_int_distribution<int> start(0, cfg.n_frames - d);
                occ.push_back({i, start(rng), d});
            }
        }
    }
    auto occluded = [&](int obj, int f) {
        for (const auto& o : occ) {
            if (o.track == obj && f >= o.start && f < o.start + o.duration) return true;
        }
        return false;
    };

    std::vector<Embedding> identity;
    for (int i = 0; i < n_obj; ++i) identity.push_back(random_unit(cfg.embedding_dim, rng));

    SyntheticSequence seq;
    seq.image_width = cfg.image_width;
    seq.image_height = cfg.image_height;
    seq.n_frames = cfg.n_frames;
    seq.gt.resize(cfg.n_frames);
    seq.detections.resize(cfg.n_frames);
    seq.embeddings.resize(cfg.n_frames);

    // Camera offset random walk; image = world - offset.
    std::vector<Point2> offset(cfg.n_frames);
    if (cfg.camera_step > 0.0) {
        std::normal_distribution<double> step(0.0, cfg.camera_step);
        std::vector<AffineTransform> cmc(cfg.n_frames);
        for (int f = 1; f < cfg.n_frames; ++f) {
            offset[f] = {offset[f - 1].x + step(rng), offset[f - 1].y + step(rng)};
            cmc[f] = AffineTransform::translation(-(offset[f].x - offset[f - 1].x), -(offset[f].y - offset[f - 1].y));
        }
        seq.cmc = std::move(cmc);
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int f = 0; f < cfg.n_frames; ++f) {
        std::vector<int> alive;
        std::vector<BoundingBox> boxes;
        for (int i = 0; i < n_obj; ++i) {
            const ObjectSpec& o = objects[i];
            const int end = o.end_frame < 0 ? cfg.n_frames : o.end_frame;
            if (f < o.start_frame || f >= end) continue;
            BoundingBox b = o.box_at(f - o.start_frame);
            b.x -= offset[f].x;
            b.y -= offset[f].y;
            alive.push_back(i);
            boxes.push_back(b);
            seq.gt[f].emplace_back(i + 1, b);
        }
        for (std::size_t a = 0; a < alive.size(); ++a) {
            const int i = alive[a];
            if (occluded(i, f)) continue;
            // Partial cover by any other object, visible or not, lowers the confidence.
            bool covered = false;
            for (std::size_t b = 0; b < alive.size(); ++b) {
                if (b != a && iou(boxes[a], boxes[b]) > cfg.overlap_iou) covered = true;
            }
            BoundingBox d = boxes[a];
            if (cfg.noise_scale > 0.0) {
                d.x += gauss(rng) * cfg.noise_scale * boxes[a].w;
                d.y += gauss(rng) * cfg.noise_scale * boxes[a].h;
                d.w = std::max(1.0, d.w + gauss(rng) * cfg.noise_scale * boxes[a].w);
                d.h = std::max(1.0, d.h + gauss(rng) * cfg.noise_scale * boxes[a].h);
            }
            const double base = covered ? cfg.conf_low : cfg.conf_high;
            d.confidence = std::clamp(base + cfg.conf_jitter * gauss(rng), 0.0, 1.0);
            seq.detections[f].push_back({d, i});
            Embedding e = identity[i];
            if (cfg.embedding_noise > 0.0) {
                for (int k = 0; k < cfg.embedding_dim; ++k) e[k] += cfg.embedding_noise * gauss(rng);
            }
            seq.embeddings[f].push_back(e / e.norm());
        }
    }
    return seq;
}

std::vector<MotRecord> ground_truth_records(const SyntheticSequence& seq) {
    std::vector<MotRecord> gt;
    for (int f = 0; f < seq.n_frames; ++f) {
        for (const auto& [id, b] : seq.gt[f]) {
            MotRecord r{f, id, b};
            r.box.confidence = 1.0;
            gt.push_back(r);
        }
    }
    return gt;
}

FrameDetections detection_frames(const SyntheticSequence& seq) {
    FrameDetections out;
    for (int f = 0; f < seq.n_frames; ++f) {
        auto& v = out[f];
        for (const auto& d : seq.detections[f]) v.push_back(d.box);
    }
    return out;
}

EmbeddingTable embedding_table(const SyntheticSequence& seq) {
    EmbeddingTable emb;
    for (int f = 0; f < seq.n_frames; ++f) {
        for (std::size_t k = 0; k < seq.embeddings[f].size(); ++k) emb[{f, static_cast<int>(k)}] = seq.embeddings[f][k];
    }
    return emb;
}

void write_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir, const std::string& name) {
    const std::vector<MotRecord> gt = ground_truth_records(seq);
    std::vector<MotRecord> det;
    for (int f = 0; f < seq.n_frames; ++f) {
        for (const auto& d : seq.detections[f]) det.push_back({f, -1, d.box});
    }
    const EmbeddingTable emb = embedding_table(seq);
    write_results(dir / "gt" / "gt.txt", gt);
    write_detections(dir / "det" / "det.txt", det);
    write_embeddings(dir / "embeddings.bin", emb);
    write_seqinfo(dir / "seqinfo.ini", {name, seq.image_width, seq.image_height, seq.n_frames});
    if (seq.cmc) {
        CmcTable t;
        for (int f = 1; f < seq.n_frames; ++f) t.set(f, (*seq.cmc)[f]);
        write_cmc(dir / "cmc.txt", t);
    }
}

}  // namespace dmsort
