#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmsort/association.hpp"
#include "dmsort/geometry.hpp"
#include "dmsort/io.hpp"

namespace dmsort {

enum class MotionKind { linear, sinusoidal, direction_switch, circular };

const char* to_string(MotionKind k);
MotionKind parse_motion_kind(const std::string& s);

/// One object's trajectory in world pixels. Frame-local time is
/// t = frame - start_frame.
struct ObjectSpec {
    MotionKind kind = MotionKind::linear;
    double x0 = 100.0, y0 = 100.0;  // top-left at t = 0
    double w = 50.0, h = 120.0;
    double vx = 0.0, vy = 0.0;      // px / frame (linear drift for every kind)
    double amplitude = 50.0;        // px, sinusoidal and circular
    double period = 40.0;           // frames, sinusoidal and circular
    int switch_period = 25;         // frames between direction switches
    int start_frame = 0;
    int end_frame = -1;             // exclusive, -1 = sequence end

    /// Top-left position and size at frame-local time t.
    BoundingBox box_at(int t) const;
};

struct OcclusionWindow {
    int track = 0;  // object index
    int start = 0;  // first occluded frame
    int duration = 0;
};

struct ScenarioConfig {
    int image_width = 1280;
    int image_height = 720;
    int n_frames = 200;
    int n_objects = 6;
    /// Kinds cycled over the randomly generated objects.
    std::vector<MotionKind> kinds{MotionKind::sinusoidal, MotionKind::direction_switch};
    double speed = 3.0;      // px / frame
    double amplitude = 60.0; // px
    double period = 40.0;    // frames
    int switch_period = 25;
    /// Explicit objects replace random generation when non-empty.
    std::vector<ObjectSpec> objects;
    std::vector<OcclusionWindow> occlusions;
    int random_occlusions = 0;  // extra windows drawn per object
    int occlusion_min = 5;
    int occlusion_max = 20;
    double noise_scale = 0.0;     // detector noise std as a fraction of width / height
    double conf_high = 0.95;
    double conf_low = 0.4;
    double conf_jitter = 0.03;
    double overlap_iou = 0.05;    // IoU above which an object counts as partially covered
    int embedding_dim = 16;
    double embedding_noise = 0.05;
    double camera_step = 0.0;     // px per frame random-walk step of the camera, 0 = static
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticDetection {
    BoundingBox box;
    int object = -1;  // source object index
};

struct SyntheticSequence {
    int image_width = 0;
    int image_height = 0;
    int n_frames = 0;
    /// Ground truth per frame in image coordinates, ids are object index + 1.
    std::vector<std::vector<std::pair<int, BoundingBox>>> gt;
    std::vector<std::vector<SyntheticDetection>> detections;
    std::vector<std::vector<Embedding>> embeddings;  // aligned with detections
    /// Transform from frame k-1 to frame k coordinates; present only with
    /// camera motion.
    std::optional<std::vector<AffineTransform>> cmc;
};

SyntheticSequence generate(const ScenarioConfig& cfg);

std::vector<MotRecord> ground_truth_records(const SyntheticSequence& seq);
/// Detection boxes grouped by frame, in emission order.
FrameDetections detection_frames(const SyntheticSequence& seq);
/// Embeddings keyed by (frame, detection ordinal).
EmbeddingTable embedding_table(const SyntheticSequence& seq);

/// Writes gt/gt.txt, det/det.txt, embeddings.bin, seqinfo.ini and, with
/// camera motion, cmc.txt under `dir`.
void write_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir, const std::string& name);

}  // namespace dmsort
