#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dmsort/geometry.hpp"

namespace dmsort {

/// A box observed at a frame. Coordinates are normalized by image size.
struct TimedBox {
    int frame = 0;
    BoundingBox box;

    bool operator==(const TimedBox&) const = default;
};

using Coords4 = std::array<double, 4>;

inline Coords4 coords_of(const BoundingBox& b) { return {b.x, b.y, b.w, b.h}; }

/// Standardization constants. `diff` covers the per-frame first-order
/// differences, `rel` the time-scaled input coordinates relative to the last
/// observation and `target` the unscaled offsets of future boxes from the
/// last observation.
struct FeatureStats {
    Coords4 diff_mean{0, 0, 0, 0};
    Coords4 diff_std{1, 1, 1, 1};
    Coords4 rel_mean{0, 0, 0, 0};
    Coords4 rel_std{1, 1, 1, 1};
    Coords4 target_mean{0, 0, 0, 0};
    Coords4 target_std{1, 1, 1, 1};

    static FeatureStats identity() { return {}; }
    bool operator==(const FeatureStats&) const = default;
};

inline constexpr double kMinFeatureStd = 1e-8;

/// Input layout per row: 4 absolute coords | 4 standardized differences |
/// 4 standardized relative-to-last coords | relative time.
inline constexpr int kInputFeatureWidth = 13;
/// Target layout per row: 4 standardized relative-to-last coords | relative time.
inline constexpr int kTargetFeatureWidth = 5;
/// Layout tag stored in model files.
inline constexpr unsigned kFeatureLayoutTag = 0x0D05;

using FeatureMatrix = Eigen::MatrixXd;

/// Throws std::invalid_argument for boxes outside the normalized sanity
/// window [-2, 3] or with non-positive size.
void validate_normalized(const TimedBox& tb);

FeatureMatrix extract_input(std::span<const TimedBox> history, const FeatureStats& stats);

FeatureMatrix extract_target(const TimedBox& last, std::span<const TimedBox> future,
                             const FeatureStats& stats);

/// Recovers an absolute box from a standardized relative-to-last row.
BoundingBox target_row_to_box(const TimedBox& last, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                              const FeatureStats& stats);

/// Per-channel mean and population std over all difference and relative
/// values found in `histories`; target channels come from `futures[i]`
/// relative to the last element of `histories[i]` and stay at the identity
/// when no futures are given. Result is independent of input order.
FeatureStats fit_stats(std::span<const std::vector<TimedBox>> histories,
                       std::span<const std::vector<TimedBox>> futures = {});

}  // namespace dmsort
