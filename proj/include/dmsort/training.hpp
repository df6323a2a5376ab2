#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dmsort/io.hpp"
#include "dmsort/motion_model.hpp"
#include "dmsort/transfilter.hpp"

namespace dmsort {

/// A ground-truth track: normalized boxes at strictly increasing frames.
using Trajectory = std::vector<TimedBox>;

/// Groups ground-truth records by id into normalized trajectories ordered by
/// id, each sorted by frame. Throws on boxes outside the sanity window.
std::vector<Trajectory> group_trajectories(std::span<const MotRecord> records, const ImageSize& image);

struct TrainingWindow {
    std::vector<TimedBox> input;   // at most H boxes, last one is the anchor
    std::vector<TimedBox> target;  // consecutive frames after the anchor, at most m_max
    int sequence = 0;
    int track = 0;
};

/// Sliding windows ending at every `stride`-th box. A window is emitted when
/// its full horizon lies inside the track's lifetime; tracks too short for
/// any such window contribute windows with truncated targets instead. Targets
/// stop at the first missing frame.
std::vector<TrainingWindow> make_windows(std::span<const Trajectory> tracks, int history, int horizon, int stride,
                                         int sequence_id = 0);

struct AugmentationConfig {
    double noise_scale = 0.05;      // std as a fraction of width / height
    double mask_probability = 0.2;  // per non-final input point

    void validate() const;
    static AugmentationConfig none() { return {0.0, 0.0}; }
};

/// Gaussian coordinate noise and random point removal on the input; the last
/// input point always survives and the target is left alone.
TrainingWindow augment(const TrainingWindow& w, const AugmentationConfig& cfg, std::mt19937_64& rng);

/// Per-window random stream for a given epoch.
std::mt19937_64 window_rng(std::uint64_t seed, int epoch, std::size_t window);

/// Builds the feature-space sample. Decoder observations are the target boxes
/// with the augmentation noise applied.
TrainingSample make_sample(const TrainingWindow& w, const TransFilterModel& model, const AugmentationConfig& aug,
                           std::mt19937_64& rng);

/// Standardization constants over the windows as training sees them: each
/// window is augmented once with its own stream derived from `seed`, targets
/// are taken relative to the augmented anchor.
FeatureStats fit_stats(std::span<const TrainingWindow> windows, const AugmentationConfig& aug = AugmentationConfig::none(),
                       std::uint64_t seed = 0);

struct TrainConfig {
    double learning_rate = 5e-5;
    int warmup_epochs = 4;
    double decay_factor = 0.1;
    int decay_period = 4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double huber_delta = 0.5;
    int batch_size = 32;
    int epochs = 16;
    std::uint64_t seed = 0;

    void validate() const;
    /// Linear warm-up over the first epochs, then step decay counted from the
    /// end of the warm-up.
    double learning_rate_at(int epoch) const;
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean sample loss per epoch
};

/// Called after every epoch with (epoch, mean loss).
using EpochCallback = std::function<void(int, double)>;

/// AdamW with decoupled weight decay. Throws std::runtime_error naming the
/// epoch when the loss turns non-finite.
TrainResult train(TransFilterModel& model, std::span<const TrainingWindow> windows, const TrainConfig& cfg,
                  const AugmentationConfig& aug, const EpochCallback& on_epoch = {});

/// Mean L1 error over the 4 normalized coordinates for the first
/// `max_steps` valid target steps of every window.
double prediction_ade(const TransFilterModel& model, std::span<const TrainingWindow> windows, int max_steps);

/// Same probe for a Kalman filter run over each window's input.
double kalman_prediction_ade(std::span<const TrainingWindow> windows, int max_steps);

}  // namespace dmsort
