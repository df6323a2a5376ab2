#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "dmsort/association.hpp"
#include "dmsort/buffer.hpp"
#include "dmsort/synth.hpp"
#include "dmsort/training.hpp"

namespace dmsort {

struct CascadeConfig {
    bool enabled = true;
    DtIouParams dtiou;
    AssociationWeights weights;
};

struct TrackerConfig {
    double detection_confidence_threshold = 0.6;
    double min_detection_confidence = 0.1;  // below this a detection is ignored
    int track_max_time_lost = 30;
    int track_init_time = 3;
    double track_init_confidence = 0.7;
    double duplicate_iou_threshold = 1.0;
    bool apply_noise_filtering = false;
    bool use_cmc = false;
    bool lazy_cmc = false;
    BufferPolicy buffer_policy = BufferPolicy::deepmovesort;
    int buffer_t_max = 30;
    int buffer_l_min = 5;
    double atcm_sigma = 0.2;
    double embedding_alpha = 0.9;
    int threads = 1;  // parallel per-track prediction, output does not depend on it
    CascadeConfig ha, la, na;

    /// DanceTrack column of the published configuration.
    static TrackerConfig dancetrack();

    void validate() const;
    /// Appearance is used in the first cascade only.
    bool uses_appearance() const { return ha.enabled && ha.weights.appearance > 0.0; }
};

using KeyValues = std::map<std::string, std::string>;

/// `key=value` lines; blank lines and `#` comments are skipped. Throws
/// std::runtime_error naming the line for malformed or repeated keys.
KeyValues read_key_values(const std::filesystem::path& path);
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<string>");

/// Applies keys over `base`; unknown keys and bad values are errors.
TrackerConfig tracker_config_from(const KeyValues& kv, TrackerConfig base = TrackerConfig::dancetrack());
std::string to_key_values(const TrackerConfig& c);

struct TrainingSetup {
    TrainConfig train;
    AugmentationConfig augmentation;
    TransFilterConfig model;
    int window_stride = 1;
};

TrainingSetup training_setup_from(const KeyValues& kv, TrainingSetup base = {});
std::string to_key_values(const TrainingSetup& s);

ScenarioConfig scenario_config_from(const KeyValues& kv, ScenarioConfig base = {});
std::string to_key_values(const ScenarioConfig& s);

}  // namespace dmsort
