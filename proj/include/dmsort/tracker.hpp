#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "dmsort/buffer.hpp"
#include "dmsort/config.hpp"
#include "dmsort/io.hpp"
#include "dmsort/kalman.hpp"
#include "dmsort/motion_model.hpp"

namespace dmsort {

enum class TrackStatus { fresh, active, lost };

struct Track {
    int id = 0;
    TrackStatus status = TrackStatus::fresh;
    MeasurementBuffer buffer{BufferPolicy::deepmovesort, 30};
    LazyAlignment pending_alignment;
    std::unique_ptr<TrackMotion> motion;
    ConfidenceKalman confidence;
    std::optional<Embedding> embedding;
    int frames_since_seen = 0;
    int consecutive_hits = 0;
    int birth_frame = 0;

    BoundingBox predicted;        // pixels, this frame
    double predicted_confidence = 0.0;
    BoundingBox current;          // stored box when matched, else the prediction
};

/// Which cascade produced a match.
enum class Cascade { high, low, fresh };

struct Match {
    int track_id = 0;
    int detection = 0;  // index into the frame's detection list
    Cascade cascade = Cascade::high;
};

class Tracker {
public:
    Tracker(TrackerConfig config, std::shared_ptr<const MotionModel> motion, ImageSize image);

    /// Advances to `frame` (strictly increasing). `embeddings`, when given,
    /// align with `detections`. Returns the active tracks' boxes.
    std::vector<MotRecord> step(int frame, const std::vector<BoundingBox>& detections,
                                const std::vector<std::optional<Embedding>>* embeddings = nullptr,
                                const AffineTransform* cmc = nullptr);

    const std::vector<Track>& tracks() const { return tracks_; }
    const std::vector<Match>& last_matches() const { return matches_; }
    const TrackerConfig& config() const { return config_; }

private:
    void predict_all(int frame);
    void associate(int frame, const std::vector<BoundingBox>& dets,
                   const std::vector<std::optional<Embedding>>* embeddings, const std::vector<int>& track_rows,
                   const std::vector<int>& det_cols, const CascadeConfig& cc, bool use_appearance, Cascade which,
                   std::vector<char>& track_done, std::vector<char>& det_done);

    TrackerConfig config_;
    std::shared_ptr<const MotionModel> motion_;
    ImageSize image_;
    std::vector<Track> tracks_;
    std::vector<Match> matches_;
    int next_id_ = 1;
    int last_frame_ = -1;
};

/// Inputs of one sequence, indexed by 0-based frame.
struct SequenceInput {
    int n_frames = 0;
    ImageSize image;
    FrameDetections detections;
    EmbeddingTable embeddings;  // may be empty
    std::optional<CmcTable> cmc;
};

/// Runs the tracker over frames 0..n_frames-1.
std::vector<MotRecord> run_sequence(const TrackerConfig& config, std::shared_ptr<const MotionModel> motion,
                                    const SequenceInput& input);

}  // namespace dmsort
