#include "dmsort/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

#include "dmsort/assignment.hpp"

namespace dmsort {

Tracker::Tracker(TrackerConfig config, std::shared_ptr<const MotionModel> motion, ImageSize image)
    : config_(std::move(config)), motion_(std::move(motion)), image_(image) {
    config_.validate();
    if (!motion_) throw std::invalid_argument("tracker: null motion model");
    if (!(image_.width > 0.0 && image_.height > 0.0)) throw std::invalid_argument("tracker: invalid image size");
}

void Tracker::predict_all(int frame) {
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Track& t = tracks_[i];
            t.pending_alignment.flush(t.buffer);
            t.predicted = t.motion->predict(t.buffer, frame);
            t.predicted_confidence = t.confidence.predict();
            t.predicted.confidence = std::clamp(t.predicted_confidence, 0.0, 1.0);
        }
    };
    const std::size_t n = tracks_.size();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config_.threads), n);
    if (workers <= 1) {
        work(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk, e = std::min(n, b + chunk);
        pool.emplace_back([&, w, b, e] {
            try {
                work(b, e);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

void Tracker::associate(int /*frame*/, const std::vector<BoundingBox>& dets,
                        const std::vector<std::optional<Embedding>>* embeddings, const std::vector<int>& track_rows,
                        const std::vector<int>& det_cols, const CascadeConfig& cc, bool use_appearance, Cascade which,
                        std::vector<char>& track_done, std::vector<char>& det_done) {
    std::vector<int> rows, cols;
    for (int r : track_rows) {
        if (!track_done[r]) rows.push_back(r);
    }
    for (int c : det_cols) {
        if (!det_done[c]) cols.push_back(c);
    }
    if (rows.empty() || cols.empty()) return;

    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(cols.size());
    CostTerms terms;
    terms.dtiou.resize(nr, nc);
    terms.hpc.resize(nr, nc);
    terms.atcm.resize(nr, nc);
    if (use_appearance) terms.appearance.resize(nr, nc);
    for (Eigen::Index i = 0; i < nr; ++i) {
        const Track& t = tracks_[rows[i]];
        const BoundingBox pred_n = to_normalized(t.predicted, image_);
        for (Eigen::Index j = 0; j < nc; ++j) {
            const BoundingBox& d = dets[cols[j]];
            terms.dtiou(i, j) = dtiou_cost(t.predicted, d, t.frames_since_seen, cc.dtiou);
            terms.hpc(i, j) = hpc_cost(pred_n, to_normalized(d, image_), cc.weights.hpc_height, cc.weights.hpc_vertical);
            terms.atcm(i, j) = atcm_cost(t.predicted_confidence, d.confidence);
            if (use_appearance) {
                const std::optional<Embedding>* e = embeddings ? &(*embeddings)[cols[j]] : nullptr;
                terms.appearance(i, j) = (t.embedding && e && e->has_value())
                                             ? appearance_cost(*t.embedding, **e)
                                             : std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    AssociationWeights w = cc.weights;
    if (!use_appearance) w.appearance = 0.0;
    const Assignment a = solve(fuse(terms, w));
    for (const auto& [i, j] : a.matches) {
        track_done[rows[i]] = 1;
        det_done[cols[j]] = 1;
        matches_.push_back({rows[i], cols[j], which});
    }
}

std::vector<MotRecord> Tracker::step(int frame, const std::vector<BoundingBox>& detections,
                                     const std::vector<std::optional<Embedding>>* embeddings,
                                     const AffineTransform* cmc) {
    if (frame <= last_frame_) {
        throw std::invalid_argument("tracker: frame " + std::to_string(frame) + " does not follow frame " +
                                    std::to_string(last_frame_));
    }
    if (embeddings && embeddings->size() != detections.size()) {
        throw std::invalid_argument("tracker: " + std::to_string(embeddings->size()) + " embeddings for " +
                                    std::to_string(detections.size()) + " detections");
    }
    for (const auto& d : detections) {
        if (!is_valid(d)) throw std::invalid_argument("tracker: invalid detection box");
    }
    last_frame_ = frame;
    matches_.clear();

    if (config_.use_cmc && cmc && !cmc->is_identity()) {
        for (Track& t : tracks_) {
            if (config_.lazy_cmc) {
                t.pending_alignment.push(*cmc);
            } else {
                t.buffer.align_to_camera(*cmc);
            }
            t.motion->align(*cmc);
        }
    }

    std::vector<int> high, low;
    for (int i = 0; i < static_cast<int>(detections.size()); ++i) {
        const double c = detections[i].confidence;
        if (c < config_.min_detection_confidence) continue;
        (c >= config_.detection_confidence_threshold ? high : low).push_back(i);
    }

    predict_all(frame);

    std::vector<int> all_tracks, old_tracks, fresh_tracks;
    for (int i = 0; i < static_cast<int>(tracks_.size()); ++i) {
        all_tracks.push_back(i);
        (tracks_[i].status == TrackStatus::fresh ? fresh_tracks : old_tracks).push_back(i);
    }
    std::vector<char> track_done(tracks_.size(), 0), det_done(detections.size(), 0);
    associate(frame, detections, embeddings, all_tracks, high, config_.ha, config_.uses_appearance(), Cascade::high,
              track_done, det_done);
    if (config_.la.enabled) {
        associate(frame, detections, embeddings, old_tracks, low, config_.la, false, Cascade::low, track_done,
                  det_done);
    }
    if (config_.na.enabled) {
        associate(frame, detections, embeddings, fresh_tracks, high, config_.na, false, Cascade::fresh, track_done,
                  det_done);
    }

    for (const Match& m : matches_) {
        Track& t = tracks_[m.track_id];
        const BoundingBox& d = detections[m.detection];
        BoundingBox stored = t.motion->correct(t.buffer, {frame, d}, config_.apply_noise_filtering);
        stored.confidence = d.confidence;
        t.buffer.update(TimedBox{frame, stored}, frame);
        t.confidence.update(d.confidence);
        if (embeddings && (*embeddings)[m.detection]) {
            t.embedding = update_track_embedding(t.embedding, *(*embeddings)[m.detection], config_.embedding_alpha);
        }
        t.frames_since_seen = 0;
        ++t.consecutive_hits;
        t.current = stored;
        if (t.status == TrackStatus::lost) t.status = TrackStatus::active;
        if (t.status == TrackStatus::fresh && t.consecutive_hits >= config_.track_init_time) {
            t.status = TrackStatus::active;
        }
    }
    for (Match& m : matches_) m.track_id = tracks_[m.track_id].id;

    std::vector<char> remove(tracks_.size(), 0);
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (track_done[i]) continue;
        Track& t = tracks_[i];
        t.buffer.update(std::nullopt, frame);
        ++t.frames_since_seen;
        t.consecutive_hits = 0;
        t.current = t.predicted;
        if (t.status == TrackStatus::fresh) {
            remove[i] = 1;
        } else {
            t.status = TrackStatus::lost;
            if (t.frames_since_seen > config_.track_max_time_lost) remove[i] = 1;
        }
    }

    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (remove[i] || tracks_[i].status == TrackStatus::fresh) continue;
        for (std::size_t j = i + 1; j < tracks_.size(); ++j) {
            if (remove[j] || tracks_[j].status == TrackStatus::fresh) continue;
            if (iou(tracks_[i].current, tracks_[j].current) < config_.duplicate_iou_threshold) continue;
            const Track& a = tracks_[i];
            const Track& b = tracks_[j];
            const bool a_younger = a.birth_frame != b.birth_frame ? a.birth_frame > b.birth_frame : a.id > b.id;
            remove[a_younger ? i : j] = 1;
            if (a_younger) break;
        }
    }

    std::vector<Track> kept;
    kept.reserve(tracks_.size());
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (!remove[i]) kept.push_back(std::move(tracks_[i]));
    }
    tracks_ = std::move(kept);

    for (int c : high) {
        if (det_done[c]) continue;
        const BoundingBox& d = detections[c];
        if (d.confidence < config_.track_init_confidence) continue;
        Track t;
        t.id = next_id_++;
        t.birth_frame = frame;
        t.buffer = MeasurementBuffer(config_.buffer_policy, config_.buffer_t_max, config_.buffer_l_min);
        t.buffer.update(TimedBox{frame, d}, frame);
        t.motion = motion_->start({frame, d}, image_);
        t.confidence = ConfidenceKalman::initiate(d.confidence, config_.atcm_sigma);
        if (embeddings && (*embeddings)[c]) t.embedding = *(*embeddings)[c];
        t.consecutive_hits = 1;
        t.status = config_.track_init_time <= 1 ? TrackStatus::active : TrackStatus::fresh;
        t.predicted = t.current = d;
        t.predicted_confidence = d.confidence;
        tracks_.push_back(std::move(t));
    }

    std::vector<MotRecord> out;
    for (const Track& t : tracks_) {
        if (t.status == TrackStatus::active) out.push_back({frame, t.id, t.current});
    }
    return out;
}

std::vector<MotRecord> run_sequence(const TrackerConfig& config, std::shared_ptr<const MotionModel> motion,
                                    const SequenceInput& input) {
    int n_frames = input.n_frames;
    if (!input.detections.empty()) n_frames = std::max(n_frames, input.detections.rbegin()->first + 1);
    for (const auto& [key, e] : input.embeddings) {
        const auto it = input.detections.find(key.first);
        if (it == input.detections.end() || key.second >= static_cast<int>(it->second.size())) {
            throw std::invalid_argument("run_sequence: embedding for frame " + std::to_string(key.first + 1) +
                                        " ordinal " + std::to_string(key.second) + " has no detection");
        }
    }

    Tracker tracker(config, std::move(motion), input.image);
    std::vector<MotRecord> results;
    const std::vector<BoundingBox> none;
    for (int f = 0; f < n_frames; ++f) {
        const auto it = input.detections.find(f);
        const std::vector<BoundingBox>& dets = it == input.detections.end() ? none : it->second;
        std::vector<std::optional<Embedding>> emb;
        const bool have_embeddings = !input.embeddings.empty();
        if (have_embeddings) {
            emb.resize(dets.size());
            for (int k = 0; k < static_cast<int>(dets.size()); ++k) {
                const auto e = input.embeddings.find({f, k});
                if (e != input.embeddings.end()) emb[k] = e->second;
            }
        }
        const AffineTransform* cmc = input.cmc ? &input.cmc->at(f) : nullptr;
        auto recs = tracker.step(f, dets, have_embeddings ? &emb : nullptr, cmc);
        results.insert(results.end(), recs.begin(), recs.end());
    }
    return results;
}

}  // namespace dmsort
